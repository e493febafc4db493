#include "mage/reader.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mage {

Var attention(Tape& tape, Var h_q, Var H_d) {
  const Tensor& H = tape.value(H_d);
  const Tensor& q = tape.value(h_q);
  if (H.rank() != 2 || q.rank() != 1 || H.cols() != q.size())
    throw std::invalid_argument("attention: query width " + q.shape_str() +
                                " does not match document " + H.shape_str());
  return tape.softmax(tape.matvec(H_d, h_q));
}

double answer_extractive(const Tensor& alpha, const std::vector<std::int32_t>& token_map,
                         std::int32_t w) {
  if (alpha.rank() != 1 || alpha.size() != token_map.size())
    throw std::invalid_argument("answer_extractive: need one token per position");
  double mass = 0.0;
  for (Index i = 0; i < token_map.size(); ++i)
    if (token_map[i] == w) mass += alpha[i];
  return mass;
}

Var extractive_distribution(Tape& tape, Var alpha, std::vector<std::int32_t> group_of_pos,
                            Index n_groups) {
  return tape.group_sums(alpha, std::move(group_of_pos), n_groups);
}

Var answer_classify(Tape& tape, Var alpha, Var H_d, Var W_C) {
  const Var h_d = tape.vecmat(alpha, H_d);
  return tape.softmax(tape.vecmat(h_d, W_C));
}

Index argmax_lowest(const Tensor& p) {
  Index best = 0;
  for (Index i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

Var append_onehot(Tape& tape, Var embedding, const OneHotFeatures& feats, Index pos, Index m_max,
                  Index* overflow_counter) {
  if (m_max == 0) throw std::invalid_argument("append_onehot: m_max must be positive");
  Tensor suffix = Tensor::zeros({m_max});
  const std::int32_t chain = feats.chain_of_pos.at(pos);
  if (chain >= 0) {
    if (static_cast<Index>(chain) < m_max) {
      suffix[static_cast<Index>(chain)] = 1.0;
    } else if (overflow_counter) {
      ++*overflow_counter;
    }
  }
  const Var parts[2] = {embedding, tape.constant(std::move(suffix))};
  return tape.concat(parts, 0);
}

std::vector<std::vector<double>> sentence_probe(const Tensor& H_d,
                                                const std::vector<Index>& boundaries,
                                                const Tensor& W_C) {
  if (H_d.rank() != 2 || W_C.rank() != 2 || H_d.cols() != W_C.rows())
    throw std::invalid_argument("sentence_probe: width mismatch between document and lookup table");
  std::vector<std::vector<double>> rows;
  rows.reserve(boundaries.size());
  Index prev = 0;
  for (Index b : boundaries) {
    if (b >= H_d.rows()) throw std::invalid_argument("sentence_probe: boundary out of range");
    if (!rows.empty() && b < prev) throw std::invalid_argument("sentence_probe: boundaries not sorted");
    prev = b;
    const Index C = W_C.cols();
    std::vector<double> logits(C, 0.0);
    for (Index k = 0; k < W_C.rows(); ++k) {
      const double hv = H_d.at(b, k);
      for (Index c = 0; c < C; ++c) logits[c] += hv * W_C.at(k, c);
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (auto& v : logits) {
      v = std::exp(v - mx);
      z += v;
    }
    for (auto& v : logits) v /= z;
    rows.push_back(std::move(logits));
  }
  return rows;
}

std::string format_probe_table(const std::vector<std::vector<double>>& rows,
                               const std::vector<std::string>& candidate_names) {
  std::string out = "sentence";
  for (const auto& name : candidate_names) {
    out += '\t';
    out += name;
  }
  out += '\n';
  char buf[32];
  for (Index s = 0; s < rows.size(); ++s) {
    out += std::to_string(s + 1);
    for (double v : rows[s]) {
      std::snprintf(buf, sizeof(buf), "\t%.4f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace mage

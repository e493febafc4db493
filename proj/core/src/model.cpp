#include "mage/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace mage {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::kBiGru: return "bigru";
    case EncoderKind::kBiGruOneHot: return "onehot";
    case EncoderKind::kMage: return "mage";
    case EncoderKind::kMageShared: return "mage-shared";
  }
  return "?";
}

std::string to_string(HeadKind k) {
  return k == HeadKind::kClassify ? "classify" : "extractive";
}

EncoderKind encoder_from_string(const std::string& s) {
  if (s == "bigru") return EncoderKind::kBiGru;
  if (s == "onehot" || s == "bigru+onehot") return EncoderKind::kBiGruOneHot;
  if (s == "mage") return EncoderKind::kMage;
  if (s == "mage-shared") return EncoderKind::kMageShared;
  throw std::invalid_argument("unknown encoder '" + s + "' (bigru|onehot|mage|mage-shared)");
}

HeadKind head_from_string(const std::string& s) {
  if (s == "classify") return HeadKind::kClassify;
  if (s == "extractive") return HeadKind::kExtractive;
  throw std::invalid_argument("unknown head '" + s + "' (classify|extractive)");
}

void ModelConfig::validate() const {
  if (d_emb == 0 || seq_dim == 0) throw std::invalid_argument("d_emb and seq_dim must be positive");
  if (layers == 0) throw std::invalid_argument("layer count must be at least 1");
  const bool mage_like = encoder == EncoderKind::kMage || encoder == EncoderKind::kMageShared;
  if (mage_like && coref_dim == 0)
    throw std::invalid_argument("mage encoders need a positive coref state width");
  if (!mage_like && coref_dim != 0)
    throw std::invalid_argument("coref state width applies to mage encoders only");
  if (encoder == EncoderKind::kBiGruOneHot && m_max == 0)
    throw std::invalid_argument("one-hot encoder needs a positive m_max");
}

Index ModelConfig::dir_width() const { return seq_dim + coref_dim; }

ReaderModel::ReaderModel(const ModelConfig& cfg, Vocab vocab, std::vector<std::string> candidates,
                         std::uint64_t init_seed)
    : cfg_(cfg), vocab_(std::move(vocab)), candidates_(std::move(candidates)) {
  cfg_.validate();
  if (candidates_.size() < 2) throw std::invalid_argument("need at least two candidates");
  coref_type_ = registry_.register_edge_type("coref").first;

  std::mt19937_64 rng(init_seed);
  embed_ = &store_.create_uniform("embed.table", {vocab_.size(), cfg_.d_emb}, cfg_.d_emb,
                                  cfg_.d_emb, rng);

  const bool onehot = cfg_.encoder == EncoderKind::kBiGruOneHot;
  const bool with_coref =
      cfg_.encoder == EncoderKind::kMage || cfg_.encoder == EncoderKind::kMageShared;
  const bool shared = cfg_.encoder == EncoderKind::kMageShared;
  const Index d_in0 = cfg_.d_emb + (onehot ? cfg_.m_max : 0);

  const TypeId coref_inv = registry_.partner(coref_type_);
  for (Index l = 0; l < cfg_.layers; ++l) {
    EdgeDimSplit fwd, bwd;
    if (shared) {
      const Index d = cfg_.dir_width();
      fwd.dims = {{kSeqType, d}, {coref_type_, d}};
      bwd.dims = {{kSeqInvType, d}, {coref_inv, d}};
    } else if (with_coref) {
      fwd.dims = {{kSeqType, cfg_.seq_dim}, {coref_type_, cfg_.coref_dim}};
      bwd.dims = {{kSeqInvType, cfg_.seq_dim}, {coref_inv, cfg_.coref_dim}};
    } else {
      fwd.dims = {{kSeqType, cfg_.seq_dim}};
      bwd.dims = {{kSeqInvType, cfg_.seq_dim}};
    }
    const Index d_in = l == 0 ? d_in0 : cfg_.out_width();
    layers_.push_back(make_mage_params(store_, "mage.l" + std::to_string(l), registry_, fwd, bwd,
                                       d_in, shared, rng));
  }

  w_c_ = &store_.create_uniform("head.W_C", {cfg_.out_width(), candidates_.size()},
                                cfg_.out_width(), candidates_.size(), rng);
}

ReaderModel::Prepared ReaderModel::prepare(const BabiExample& ex, const CorefAnnotation& coref,
                                           const std::vector<Index>* permutation) const {
  const bool with_coref =
      cfg_.encoder == EncoderKind::kMage || cfg_.encoder == EncoderKind::kMageShared;

  Prepared p;
  static const CorefAnnotation kNoChains{};
  p.built = build_example_graph(ex, with_coref ? coref : kNoChains, registry_, coref_type_, vocab_,
                                permutation);
  p.decomp = decompose(p.built.graph);

  const auto [doc_off, doc_len] = p.built.layout.segments[0];
  const auto [q_off, q_len] = p.built.layout.segments[1];
  p.doc_positions.resize(doc_len);
  for (Index i = 0; i < doc_len; ++i) p.doc_positions[i] = doc_off + i;
  p.query_positions.resize(q_len);
  for (Index i = 0; i < q_len; ++i) p.query_positions[i] = q_off + i;

  p.doc_token_ids.resize(doc_len);
  for (Index i = 0; i < doc_len; ++i) p.doc_token_ids[i] = p.built.graph.tokens[doc_off + i];

  p.sentence_bounds = sentence_boundaries(ex);

  // chain id per global node (doc-first annotation coordinates -> layout)
  p.onehot.n_chains = coref.chains.size();
  p.onehot.chain_of_pos.assign(p.built.graph.node_count, -1);
  auto to_global = [&](Index doc_first_pos) {
    return doc_first_pos < doc_len ? doc_off + doc_first_pos : q_off + (doc_first_pos - doc_len);
  };
  for (Index c = 0; c < coref.chains.size(); ++c)
    for (Index pos : coref.chains[c])
      p.onehot.chain_of_pos[to_global(pos)] = static_cast<std::int32_t>(c);

  // distinct-token groups over the document (extractive head)
  p.group_of_doc_pos.resize(doc_len);
  std::unordered_map<std::int32_t, std::int32_t> group_of_token;
  for (Index i = 0; i < doc_len; ++i) {
    const auto tok = p.doc_token_ids[i];
    auto it = group_of_token.find(tok);
    if (it == group_of_token.end()) {
      it = group_of_token.emplace(tok, static_cast<std::int32_t>(p.group_token_ids.size())).first;
      p.group_token_ids.push_back(tok);
    }
    p.group_of_doc_pos[i] = it->second;
  }

  if (ex.answers.size() == 1) {
    p.answer = ex.answers[0];
    const auto it = std::find(candidates_.begin(), candidates_.end(), p.answer);
    if (it != candidates_.end())
      p.answer_candidate = static_cast<int>(it - candidates_.begin());
    const auto tok = vocab_.id(p.answer);
    if (tok >= 0) {
      const auto git = group_of_token.find(tok);
      if (git != group_of_token.end()) p.answer_group = git->second;
    }
  }
  // multi-answer examples keep answer empty and never score as correct
  return p;
}

ReaderModel::Encoded ReaderModel::encode(Tape& tape, const Prepared& p) const {
  const Var table = tape.leaf(*embed_);
  const bool onehot = cfg_.encoder == EncoderKind::kBiGruOneHot;

  std::vector<Var> inputs(p.built.graph.node_count);
  for (Index t = 0; t < p.built.graph.node_count; ++t) {
    Var emb = tape.select_row(table, static_cast<Index>(p.built.graph.tokens[t]));
    if (onehot) emb = append_onehot(tape, emb, p.onehot, t, cfg_.m_max, &onehot_overflows_);
    inputs[t] = emb;
  }

  CellOptions opts;
  opts.path = cfg_.path;
  opts.interpolate_with_memory = cfg_.interpolate_with_memory;

  std::vector<const MageGruParams*> layer_ptrs;
  for (const auto& l : layers_) layer_ptrs.push_back(&l);
  const auto rows = stack_layers(tape, p.decomp, inputs, layer_ptrs, opts);

  std::vector<Var> doc_rows(p.doc_positions.size());
  for (Index i = 0; i < p.doc_positions.size(); ++i) doc_rows[i] = rows[p.doc_positions[i]];

  // Query pooling: final forward state and initial backward state of the
  // query segment (the two halves of the row are the direction outputs).
  const Index w = cfg_.dir_width();
  const Var q_last = rows[p.query_positions.back()];
  const Var q_first = rows[p.query_positions.front()];
  const Var parts[2] = {tape.slice(q_last, 0, 0, w), tape.slice(q_first, 0, w, w)};

  Encoded enc;
  enc.H_d = tape.stack_rows(doc_rows);
  enc.h_q = tape.concat(parts, 0);
  enc.W_C = tape.leaf(*w_c_);
  return enc;
}

ReaderModel::Output ReaderModel::forward(Tape& tape, const Prepared& p) const {
  const Encoded enc = encode(tape, p);
  const Var alpha = attention(tape, enc.h_q, enc.H_d);

  Output out;
  if (cfg_.head == HeadKind::kClassify) {
    const Var p_c = answer_classify(tape, alpha, enc.H_d, enc.W_C);
    out.distribution = tape.value(p_c);
    const Index best = argmax_lowest(out.distribution);
    out.predicted = candidates_[best];
    if (p.answer_candidate >= 0) {
      out.loss = tape.nll_loss(p_c, static_cast<Index>(p.answer_candidate));
      out.has_loss = true;
    }
  } else {
    const Var dist = extractive_distribution(tape, alpha, p.group_of_doc_pos,
                                             p.group_token_ids.size());
    out.distribution = tape.value(dist);
    const Index best = argmax_lowest(out.distribution);
    out.predicted = vocab_.token(p.group_token_ids[best]);
    if (p.answer_group >= 0) {
      out.loss = tape.nll_loss(dist, static_cast<Index>(p.answer_group));
      out.has_loss = true;
    }
  }
  out.correct = !p.answer.empty() && out.predicted == p.answer;
  return out;
}

std::vector<std::vector<double>> ReaderModel::probe(Tape& tape, const Prepared& p) const {
  const Encoded enc = encode(tape, p);
  return sentence_probe(tape.value(enc.H_d), p.sentence_bounds, w_c_->value);
}

}  // namespace mage

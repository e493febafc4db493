#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mage/tape.hpp"

namespace mage {

/// Attention distribution over document positions: softmax of the inner
/// products between the query vector and each document row.
Var attention(Tape& tape, Var h_q, Var H_d);

/// Attention-sum probability of answering with token `w`: the attention mass
/// summed over every position where `w` occurs. Absent tokens score 0.
double answer_extractive(const Tensor& alpha, const std::vector<std::int32_t>& token_map,
                         std::int32_t w);

/// Attention mass folded over occurrences, as a distribution over the
/// document's distinct tokens: out[g] = sum of alpha[i] with group_of_pos[i] == g.
Var extractive_distribution(Tape& tape, Var alpha, std::vector<std::int32_t> group_of_pos,
                            Index n_groups);

/// Classification head: h_d = alpha^T H_d, p = softmax(h_d^T W_C).
Var answer_classify(Tape& tape, Var alpha, Var H_d, Var W_C);

/// Deterministic argmax with lowest-index tie-break.
Index argmax_lowest(const Tensor& p);

struct OneHotFeatures {
  Index n_chains = 0;                      // M for this (d, q) pair
  std::vector<std::int32_t> chain_of_pos;  // -1 when the token is in no chain
};

/// Appends the chain-membership indicator (width m_max) to an embedding.
/// Chains at or beyond m_max map to the zero vector and bump the counter.
Var append_onehot(Tape& tape, Var embedding, const OneHotFeatures& feats, Index pos, Index m_max,
                  Index* overflow_counter = nullptr);

/// Candidate distribution from the document representation at each sentence
/// boundary instead of the attention-weighted one. Rows sum to 1.
std::vector<std::vector<double>> sentence_probe(const Tensor& H_d,
                                                const std::vector<Index>& boundaries,
                                                const Tensor& W_C);

/// Tab-separated probe table, probabilities with 4 decimal places.
std::string format_probe_table(const std::vector<std::vector<double>>& rows,
                               const std::vector<std::string>& candidate_names);

}  // namespace mage

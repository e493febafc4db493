#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mage/babi.hpp"
#include "mage/cell.hpp"
#include "mage/graph.hpp"
#include "mage/params.hpp"
#include "mage/reader.hpp"
#include "mage/tape.hpp"

namespace mage {

enum class EncoderKind { kBiGru, kBiGruOneHot, kMage, kMageShared };
enum class HeadKind { kClassify, kExtractive };

std::string to_string(EncoderKind k);
std::string to_string(HeadKind k);
EncoderKind encoder_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);

struct ModelConfig {
  EncoderKind encoder = EncoderKind::kMage;
  HeadKind head = HeadKind::kClassify;
  Index d_emb = 64;
  Index seq_dim = 48;    // sequential state width per direction
  Index coref_dim = 16;  // coreference state width per direction (0 for non-mage)
  Index layers = 1;
  Index m_max = 10;  // one-hot feature width cap
  bool interpolate_with_memory = false;
  StepPath path = StepPath::kAuto;

  void validate() const;
  Index dir_width() const;  // per-direction output width
  Index out_width() const { return 2 * dir_width(); }
};

/// Document/query reading model: token embeddings, a (MAGE-)GRU encoder over
/// the example's DAG, and the attention heads over (H^d, h^q).
class ReaderModel {
 public:
  ReaderModel(const ModelConfig& cfg, Vocab vocab, std::vector<std::string> candidates,
              std::uint64_t init_seed);

  /// Everything derivable from the example once, reused across epochs.
  struct Prepared {
    BuildResult built;
    DagDecomposition decomp;
    std::vector<Index> doc_positions;    // global node index per document position
    std::vector<Index> query_positions;  // global node index per query position
    std::vector<std::int32_t> doc_token_ids;
    std::vector<Index> sentence_bounds;  // document positions of statement-final tokens
    OneHotFeatures onehot;               // chain id per global node
    // extractive head grouping: distinct document tokens
    std::vector<std::int32_t> group_of_doc_pos;
    std::vector<std::int32_t> group_token_ids;
    int answer_candidate = -1;  // classify target, -1 when absent
    int answer_group = -1;      // extractive target, -1 when absent
    std::string answer;
  };

  Prepared prepare(const BabiExample& ex, const CorefAnnotation& coref,
                   const std::vector<Index>* permutation = nullptr) const;

  struct Output {
    bool has_loss = false;
    Var loss{};
    Tensor distribution;    // over candidates (classify) or distinct doc tokens (extractive)
    std::string predicted;  // answer string
    bool correct = false;
  };

  Output forward(Tape& tape, const Prepared& p) const;

  /// Candidate distributions at every sentence boundary (diagnostic).
  std::vector<std::vector<double>> probe(Tape& tape, const Prepared& p) const;

  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& candidates() const { return candidates_; }
  const EdgeTypeRegistry& registry() const { return registry_; }
  TypeId coref_type() const { return coref_type_; }
  Index onehot_overflows() const { return onehot_overflows_; }

 private:
  struct Encoded {
    Var H_d;   // |d| x out_width
    Var h_q;   // out_width
    Var W_C;   // out_width x |C| leaf
  };
  Encoded encode(Tape& tape, const Prepared& p) const;

  ModelConfig cfg_;
  Vocab vocab_;
  std::vector<std::string> candidates_;
  EdgeTypeRegistry registry_;
  TypeId coref_type_ = 0;
  ParameterStore store_;
  Parameter* embed_ = nullptr;
  Parameter* w_c_ = nullptr;
  std::vector<MageGruParams> layers_;
  mutable Index onehot_overflows_ = 0;
};

}  // namespace mage

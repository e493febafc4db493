#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mage/graph.hpp"

namespace mage {

/// One question with the statements that precede it in its story block.
/// Tokens are lowercased; terminal '.'/'?' are split off as their own tokens.
struct BabiExample {
  std::vector<std::vector<std::string>> story;  // statements only, in order
  std::vector<int> sentence_numbers;            // original line number per statement
  std::vector<std::string> question;
  std::vector<std::string> answers;             // comma-separated answers split apart
  std::vector<int> supporting;                  // original line numbers
  int story_index = 0;                          // block index within the file
};

struct BabiFile {
  std::vector<BabiExample> examples;
  std::set<std::string> capitalized;  // lowercased forms seen with an initial capital
  int n_stories = 0;
};

BabiFile parse_babi(const std::string& path);
BabiFile parse_babi_text(const std::string& text, const std::string& origin = "<memory>");

/// Entity lexicon for the synthetic text: tokens capitalized in the raw file
/// plus answer-vocabulary tokens that occur in stories.
std::set<std::string> derive_entity_lexicon(const BabiFile& file);

/// Coreference chains over the concatenated (story || question) index space.
/// Positions are strictly increasing within a chain; chains are disjoint and
/// keep only entities with at least two mentions.
struct CorefAnnotation {
  std::vector<std::vector<Index>> chains;
  std::vector<std::string> entities;  // parallel to chains
};

CorefAnnotation extract_coref(const BabiExample& ex, const std::set<std::string>& lexicon,
                              bool link_question = true);

/// String-id vocabulary with deterministic insertion order.
class Vocab {
 public:
  std::int32_t add(const std::string& token);
  std::int32_t id(const std::string& token) const;  // -1 when unknown
  std::int32_t id_or_unk(const std::string& token) const;
  const std::string& token(std::int32_t id) const { return tokens_[static_cast<Index>(id)]; }
  Index size() const { return tokens_.size(); }

  static constexpr const char* kUnknown = "<unk>";
  static Vocab build(const std::vector<BabiExample>& examples);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Graph of (flattened story, question) with coreference edges linking
/// consecutive chain mentions. Defaults to document-first concatenation;
/// pass a permutation for the randomized order.
BuildResult build_example_graph(const BabiExample& ex, const CorefAnnotation& coref,
                                const EdgeTypeRegistry& registry, TypeId coref_type,
                                const Vocab& vocab,
                                const std::vector<Index>* permutation = nullptr);

/// Sorted unique answer tokens of a training split.
std::vector<std::string> build_candidates(const std::vector<BabiExample>& training);

/// Flattened story tokens followed by question tokens (the default layout).
std::vector<std::string> concat_tokens(const BabiExample& ex);

/// Positions (in the flattened story) of each statement's final token.
std::vector<Index> sentence_boundaries(const BabiExample& ex);

}  // namespace mage

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace mage {

/// Raw task-file lines, kept verbatim so a mix re-parses byte-compatibly.
struct RawLine {
  int n = 0;          // original line number within the block
  std::string body;   // text after the number, tabs included for questions
};
using RawStory = std::vector<RawLine>;

std::vector<RawStory> split_raw_stories(const std::string& text);
std::string render_story(const RawStory& story);

struct MixConfig {
  /// Alternate names substituted into the second story. The pools must be
  /// disjoint from the entities of both sources.
  std::vector<std::string> alt_persons = {"David", "Emma", "Frank", "Julie", "Peter", "Susan"};
  std::vector<std::string> alt_objects = {"juice", "boat", "hat", "melon", "kite", "brick"};
  /// Lowercase object nouns used to detect object mentions.
  std::vector<std::string> object_vocab = {"football", "milk", "apple",
                                           "juice", "boat", "hat", "melon", "kite", "brick"};
};

struct MixOutcome {
  RawStory mixed;                               // renumbered 1..N
  std::vector<int> source;                      // 0 = first story, 1 = second, per line
  std::map<std::string, std::string> rename;    // surface form -> alternate
};

/// Renames the second story's entity mentions via a fresh bijection, then
/// interleaves the two line sequences uniformly at random preserving each
/// story's internal order. Supporting-fact ids are renumbered.
MixOutcome mix_stories(const RawStory& a, const RawStory& b, const MixConfig& cfg,
                       std::mt19937_64& rng);

/// Pairs consecutive stories of a task file ((1,2), (3,4), ...) and emits one
/// mixed block per pair, in the same file format.
std::string generate_babi_mix(const std::string& task_file_text, const MixConfig& cfg,
                              std::uint64_t seed);

}  // namespace mage

#pragma once

#include <cstdint>
#include <string>

namespace mage {

/// Synthetic story generator emitting the bAbi task file format
/// (`<n> <sentence>` / `<n> <question>\t<answer>\t<supporting>`).
/// Task 1: persons move between locations, questions ask where a person is
/// (one supporting fact). Task 2: persons also pick up and drop objects,
/// questions ask where an object is (two supporting facts).
struct StoryGenConfig {
  int task = 1;                  // 1 or 2
  int stories = 200;             // blocks; 5 questions each
  std::uint64_t seed = 1;
  int questions_per_story = 5;
  int statements_per_question = 2;  // task 2 uses more distractors, see below
};

std::string generate_babi_stories(const StoryGenConfig& cfg);

}  // namespace mage

#include "mage/babi_sim.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mage {

namespace {

const std::vector<std::string> kPersons = {"Mary", "John", "Daniel", "Sandra"};
const std::vector<std::string> kLocations = {"bathroom", "hallway", "garden",
                                             "office", "kitchen", "bedroom"};
const std::vector<std::string> kObjects = {"football", "milk", "apple"};
const std::vector<std::string> kMoveVerbs = {"moved to the", "went to the", "journeyed to the",
                                             "travelled to the", "went back to the"};
const std::vector<std::string> kTakeVerbs = {"took the", "got the", "grabbed the", "picked up the"};
const std::vector<std::string> kDropVerbs = {"dropped the", "discarded the", "put down the",
                                             "left the"};

template <typename T>
const T& pick(const std::vector<T>& xs, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
  return xs[d(rng)];
}

struct World {
  std::map<std::string, int> person_loc;        // -1 unknown
  std::map<std::string, int> person_move_line;  // latest move
  struct ObjState {
    bool placed = false;
    bool held = false;
    std::string holder;
    int loc = -1;
    int act_line = 0;       // the take (held) or drop (placed, !held) line
    int drop_move_line = 0; // holder's move that fixed the drop location
  };
  std::map<std::string, ObjState> objects;

  World() {
    for (const auto& p : kPersons) {
      person_loc[p] = -1;
      person_move_line[p] = 0;
    }
    for (const auto& o : kObjects) objects[o] = {};
  }
};

struct LineSink {
  std::string text;
  int n = 0;
  void statement(const std::string& body) {
    ++n;
    text += std::to_string(n) + " " + body + "\n";
  }
  void question(const std::string& q, const std::string& answer, const std::vector<int>& support) {
    ++n;
    text += std::to_string(n) + " " + q + "\t" + answer + "\t";
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (i) text += ' ';
      text += std::to_string(support[i]);
    }
    text += "\n";
  }
};

void emit_move(LineSink& sink, World& w, std::mt19937_64& rng) {
  const auto& p = pick(kPersons, rng);
  int loc = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, kLocations.size() - 1)(rng));
  if (loc == w.person_loc.at(p)) loc = (loc + 1) % static_cast<int>(kLocations.size());
  sink.statement(p + " " + pick(kMoveVerbs, rng) + " " + kLocations[static_cast<std::size_t>(loc)] + ".");
  w.person_loc[p] = loc;
  w.person_move_line[p] = sink.n;
}

bool emit_take(LineSink& sink, World& w, std::mt19937_64& rng) {
  // a located person picks up an object that is unplaced or lying at their location
  std::vector<std::pair<std::string, std::string>> options;
  for (const auto& p : kPersons) {
    const int ploc = w.person_loc.at(p);
    if (ploc < 0) continue;
    for (const auto& o : kObjects) {
      const auto& st = w.objects.at(o);
      if (st.held) continue;
      if (st.placed && st.loc != ploc) continue;
      options.push_back({p, o});
    }
  }
  if (options.empty()) return false;
  const auto& [p, o] = pick(options, rng);
  sink.statement(p + " " + pick(kTakeVerbs, rng) + " " + o + " there.");
  auto& st = w.objects[o];
  st.placed = true;
  st.held = true;
  st.holder = p;
  st.act_line = sink.n;
  return true;
}

bool emit_drop(LineSink& sink, World& w, std::mt19937_64& rng) {
  std::vector<std::string> held;
  for (const auto& o : kObjects) {
    const auto& st = w.objects.at(o);
    if (st.held && w.person_loc.at(st.holder) >= 0) held.push_back(o);
  }
  if (held.empty()) return false;
  const auto& o = pick(held, rng);
  auto& st = w.objects[o];
  sink.statement(st.holder + " " + pick(kDropVerbs, rng) + " " + o + " there.");
  st.held = false;
  st.loc = w.person_loc.at(st.holder);
  st.act_line = sink.n;
  st.drop_move_line = w.person_move_line.at(st.holder);
  return true;
}

// Objects whose location is answerable right now.
std::vector<std::string> determined_objects(const World& w) {
  std::vector<std::string> out;
  for (const auto& o : kObjects) {
    const auto& st = w.objects.at(o);
    if (!st.placed) continue;
    if (st.held && w.person_loc.at(st.holder) < 0) continue;
    out.push_back(o);
  }
  return out;
}

void task1_story(LineSink& sink, const StoryGenConfig& cfg, std::mt19937_64& rng) {
  World w;
  for (int q = 0; q < cfg.questions_per_story; ++q) {
    for (int s = 0; s < cfg.statements_per_question; ++s) emit_move(sink, w, rng);
    std::vector<std::string> located;
    for (const auto& p : kPersons)
      if (w.person_loc.at(p) >= 0) located.push_back(p);
    const auto& p = pick(located, rng);
    sink.question("Where is " + p + "?", kLocations[static_cast<std::size_t>(w.person_loc.at(p))],
                  {w.person_move_line.at(p)});
  }
}

void task2_story(LineSink& sink, const StoryGenConfig& cfg, std::mt19937_64& rng) {
  World w;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int q = 0; q < cfg.questions_per_story; ++q) {
    int emitted = 0;
    while (emitted < cfg.statements_per_question || determined_objects(w).empty()) {
      const double c = coin(rng);
      bool ok = false;
      if (c < 0.55) {
        emit_move(sink, w, rng);
        ok = true;
      } else if (c < 0.85) {
        ok = emit_take(sink, w, rng);
      } else {
        ok = emit_drop(sink, w, rng);
      }
      if (!ok) {
        emit_move(sink, w, rng);
      }
      ++emitted;
    }
    const auto ready = determined_objects(w);
    const auto& o = pick(ready, rng);
    const auto& st = w.objects.at(o);
    int answer_loc;
    std::vector<int> support;
    if (st.held) {
      answer_loc = w.person_loc.at(st.holder);
      support = {st.act_line, w.person_move_line.at(st.holder)};
    } else {
      answer_loc = st.loc;
      support = {st.drop_move_line, st.act_line};
    }
    std::sort(support.begin(), support.end());
    sink.question("Where is the " + o + "?", kLocations[static_cast<std::size_t>(answer_loc)],
                  support);
  }
}

}  // namespace

std::string generate_babi_stories(const StoryGenConfig& cfg) {
  if (cfg.task != 1 && cfg.task != 2) throw std::invalid_argument("story generator: task must be 1 or 2");
  if (cfg.stories <= 0 || cfg.questions_per_story <= 0 || cfg.statements_per_question <= 0)
    throw std::invalid_argument("story generator: counts must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::string out;
  for (int b = 0; b < cfg.stories; ++b) {
    LineSink sink;
    if (cfg.task == 1)
      task1_story(sink, cfg, rng);
    else
      task2_story(sink, cfg, rng);
    out += sink.text;
  }
  return out;
}

}  // namespace mage

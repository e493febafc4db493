#include "mage/babi_mix.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mage {

namespace {

const std::set<std::string> kQuestionWords = {"Where", "What",  "Who",  "Why", "When", "How",
                                              "Is",    "Are",   "Does", "Did", "The",  "A",
                                              "An",    "After", "Then", "Yes", "No"};

bool is_question(const RawLine& line) { return line.body.find('\t') != std::string::npos; }

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string strip_punct(const std::string& w, std::string* punct) {
  std::string core = w;
  while (!core.empty() && (core.back() == '.' || core.back() == '?' || core.back() == '!')) {
    punct->insert(punct->begin(), core.back());
    core.pop_back();
  }
  return core;
}

// Token-wise rename of one whitespace-separated text field.
std::string rename_field(const std::string& field, const std::map<std::string, std::string>& rename) {
  std::string out;
  std::istringstream is(field);
  std::string w;
  bool first = true;
  while (is >> w) {
    std::string punct;
    const std::string core = strip_punct(w, &punct);
    auto it = rename.find(core);
    if (!first) out += ' ';
    out += (it == rename.end() ? core : it->second) + punct;
    first = false;
  }
  return out;
}

std::string rename_line_body(const std::string& body, const std::map<std::string, std::string>& rename) {
  // Question lines: rename the question and answer fields, keep supporting ids.
  std::vector<std::string> fields;
  std::string cur;
  for (char c : body) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  std::string out = rename_field(fields[0], rename);
  for (std::size_t i = 1; i < fields.size(); ++i) {
    out += '\t';
    out += i <= 1 ? rename_field(fields[i], rename) : fields[i];
  }
  return out;
}

// Entity mentions of a story: capitalized statement tokens that are not
// question/function words, plus configured object nouns.
void collect_entities(const RawStory& story, const MixConfig& cfg, std::set<std::string>* persons,
                      std::set<std::string>* objects) {
  const std::set<std::string> object_vocab(cfg.object_vocab.begin(), cfg.object_vocab.end());
  for (const auto& line : story) {
    const std::string text = line.body.substr(0, line.body.find('\t'));
    for (const auto& w : split_ws(text)) {
      std::string punct;
      const std::string core = strip_punct(w, &punct);
      if (core.empty()) continue;
      if (std::isupper(static_cast<unsigned char>(core[0]))) {
        if (!is_question(line) && !kQuestionWords.count(core)) persons->insert(core);
      } else if (object_vocab.count(core)) {
        objects->insert(core);
      }
    }
  }
}

}  // namespace

std::vector<RawStory> split_raw_stories(const std::string& text) {
  std::vector<RawStory> stories;
  std::istringstream is(text);
  std::string line;
  int prev_n = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error("malformed task line: " + line);
    const int n = std::stoi(line.substr(0, sp));
    if (n == 1 || n <= prev_n || stories.empty()) stories.emplace_back();
    prev_n = n;
    stories.back().push_back({n, line.substr(sp + 1)});
  }
  return stories;
}

std::string render_story(const RawStory& story) {
  std::string out;
  for (const auto& line : story) out += std::to_string(line.n) + " " + line.body + "\n";
  return out;
}

MixOutcome mix_stories(const RawStory& a, const RawStory& b, const MixConfig& cfg,
                       std::mt19937_64& rng) {
  std::set<std::string> a_persons, a_objects, b_persons, b_objects;
  collect_entities(a, cfg, &a_persons, &a_objects);
  collect_entities(b, cfg, &b_persons, &b_objects);

  MixOutcome out;
  auto assign = [&](const std::set<std::string>& sources, const std::vector<std::string>& pool,
                    const char* what) {
    std::size_t next = 0;
    for (const auto& s : sources) {
      while (next < pool.size() &&
             (a_persons.count(pool[next]) || a_objects.count(pool[next]) ||
              b_persons.count(pool[next]) || b_objects.count(pool[next])))
        ++next;
      if (next >= pool.size())
        throw std::invalid_argument(std::string("alternate ") + what + " pool too small");
      out.rename[s] = pool[next++];
    }
  };
  assign(b_persons, cfg.alt_persons, "person");
  assign(b_objects, cfg.alt_objects, "object");

  RawStory renamed;
  renamed.reserve(b.size());
  for (const auto& line : b) renamed.push_back({line.n, rename_line_body(line.body, out.rename)});

  // Uniform merge preserving each story's order.
  std::vector<int> old_to_new_a(a.size() + 1, 0), old_to_new_b(b.size() + 1, 0);
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    bool take_a;
    if (ia == a.size()) {
      take_a = false;
    } else if (ib == renamed.size()) {
      take_a = true;
    } else {
      const double rem_a = static_cast<double>(a.size() - ia);
      const double rem_b = static_cast<double>(renamed.size() - ib);
      std::uniform_real_distribution<double> d(0.0, rem_a + rem_b);
      take_a = d(rng) < rem_a;
    }
    const RawLine& src = take_a ? a[ia] : renamed[ib];
    const int new_n = static_cast<int>(out.mixed.size()) + 1;
    (take_a ? old_to_new_a : old_to_new_b)[static_cast<std::size_t>(src.n)] = new_n;
    out.mixed.push_back({new_n, src.body});
    out.source.push_back(take_a ? 0 : 1);
    take_a ? ++ia : ++ib;
  }

  // Rewrite supporting ids through the source story's renumbering.
  for (std::size_t i = 0; i < out.mixed.size(); ++i) {
    auto& line = out.mixed[i];
    const auto tab2 = line.body.rfind('\t');
    const auto tab1 = line.body.find('\t');
    if (tab1 == std::string::npos || tab2 == tab1) continue;  // no supporting field
    const auto& map = out.source[i] == 0 ? old_to_new_a : old_to_new_b;
    std::istringstream ss(line.body.substr(tab2 + 1));
    std::string rewritten;
    int sid;
    while (ss >> sid) {
      if (!rewritten.empty()) rewritten += ' ';
      rewritten += std::to_string(map.at(static_cast<std::size_t>(sid)));
    }
    line.body = line.body.substr(0, tab2 + 1) + rewritten;
  }
  return out;
}

std::string generate_babi_mix(const std::string& task_file_text, const MixConfig& cfg,
                              std::uint64_t seed) {
  const auto stories = split_raw_stories(task_file_text);
  std::mt19937_64 rng(seed);
  std::string out;
  for (std::size_t i = 0; i + 1 < stories.size(); i += 2) {
    const auto mixed = mix_stories(stories[i], stories[i + 1], cfg, rng);
    out += render_story(mixed.mixed);
  }
  return out;
}

}  // namespace mage

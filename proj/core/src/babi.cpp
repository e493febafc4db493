#include "mage/babi.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mage {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_upper_initial(const std::string& s) {
  return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
}

// Whitespace split with terminal '.'/'?'/'!' split off as their own tokens.
// Capitalized surface forms are recorded (lowercased) in `caps`.
std::vector<std::string> tokenize(const std::string& text, std::set<std::string>* caps) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) {
    std::string punct;
    while (!w.empty() && (w.back() == '.' || w.back() == '?' || w.back() == '!')) {
      punct.insert(punct.begin(), w.back());
      w.pop_back();
    }
    if (!w.empty()) {
      if (caps && is_upper_initial(w)) caps->insert(lower(w));
      out.push_back(lower(w));
    }
    for (char c : punct) out.push_back(std::string(1, c));
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(lower(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(lower(cur));
  return out;
}

[[noreturn]] void parse_fail(const std::string& origin, Index line_no, const std::string& why) {
  throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + why);
}

}  // namespace

BabiFile parse_babi(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open bAbi file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_babi_text(buf.str(), path);
}

BabiFile parse_babi_text(const std::string& text, const std::string& origin) {
  BabiFile file;
  std::istringstream is(text);
  std::string line;
  Index line_no = 0;

  std::vector<std::vector<std::string>> story;
  std::vector<int> numbers;
  int prev_n = 0;
  int story_index = -1;

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto sp = line.find(' ');
    const std::string head = sp == std::string::npos ? line : line.substr(0, sp);
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(head, &used);
      if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
      parse_fail(origin, line_no, "non-numeric line prefix '" + head + "'");
    }
    std::string body = sp == std::string::npos ? std::string() : line.substr(sp + 1);

    if (n == 1 || n <= prev_n) {
      // numbering reset starts a new story block
      story.clear();
      numbers.clear();
      ++story_index;
      ++file.n_stories;
    }
    prev_n = n;

    const auto tab = body.find('\t');
    if (tab == std::string::npos) {
      std::string trimmed = body;
      while (!trimmed.empty() && trimmed.back() == ' ') trimmed.pop_back();
      if (!trimmed.empty() && trimmed.back() == '?')
        parse_fail(origin, line_no, "question line without tab-separated answer");
      story.push_back(tokenize(body, &file.capitalized));
      numbers.push_back(n);
    } else {
      const std::string question_text = body.substr(0, tab);
      std::string rest = body.substr(tab + 1);
      const auto tab2 = rest.find('\t');
      std::string answer_text = tab2 == std::string::npos ? rest : rest.substr(0, tab2);
      std::string support_text = tab2 == std::string::npos ? std::string() : rest.substr(tab2 + 1);

      BabiExample ex;
      ex.story = story;
      ex.sentence_numbers = numbers;
      ex.question = tokenize(question_text, &file.capitalized);
      ex.answers = split_commas(answer_text);
      if (ex.answers.empty()) parse_fail(origin, line_no, "empty answer field");
      std::istringstream ss(support_text);
      int sid;
      while (ss >> sid) ex.supporting.push_back(sid);
      ex.story_index = story_index;
      file.examples.push_back(std::move(ex));
    }
  }
  return file;
}

namespace {
// Closed-class tokens that echo between questions and stories without being
// entity mentions.
const std::set<std::string> kStopwords = {
    "the",  "a",    "an",  "is",  "are",  "was", "were", "in",   "on",   "at",
    "to",   "of",   "and", "or",  "not",  "no",  "yes",  "there", "back", "where",
    "what", "who",  "why", "how", "when", "did", "does", "do",    ".",    "?",
    "!",    "that", "this"};
}  // namespace

std::set<std::string> derive_entity_lexicon(const BabiFile& file) {
  std::set<std::string> lexicon = file.capitalized;
  std::set<std::string> answers;
  std::set<std::string> story_tokens;
  std::set<std::string> question_tokens;
  for (const auto& ex : file.examples) {
    for (const auto& a : ex.answers) answers.insert(a);
    for (const auto& sent : ex.story)
      for (const auto& t : sent) story_tokens.insert(t);
    for (const auto& t : ex.question) question_tokens.insert(t);
  }
  for (const auto& a : answers)
    if (story_tokens.count(a)) lexicon.insert(a);
  // The asked-about entities (objects in particular) are the open-class
  // tokens shared between questions and stories.
  for (const auto& q : question_tokens)
    if (story_tokens.count(q) && !kStopwords.count(q)) lexicon.insert(q);
  for (const auto& s : kStopwords) lexicon.erase(s);
  return lexicon;
}

std::vector<std::string> concat_tokens(const BabiExample& ex) {
  std::vector<std::string> out;
  for (const auto& sent : ex.story) out.insert(out.end(), sent.begin(), sent.end());
  out.insert(out.end(), ex.question.begin(), ex.question.end());
  return out;
}

std::vector<Index> sentence_boundaries(const BabiExample& ex) {
  std::vector<Index> out;
  Index pos = 0;
  for (const auto& sent : ex.story) {
    pos += sent.size();
    out.push_back(pos - 1);
  }
  return out;
}

CorefAnnotation extract_coref(const BabiExample& ex, const std::set<std::string>& lexicon,
                              bool link_question) {
  Index doc_len = 0;
  for (const auto& sent : ex.story) doc_len += sent.size();
  const auto tokens = concat_tokens(ex);

  std::map<std::string, std::vector<Index>> mentions;
  for (Index i = 0; i < tokens.size(); ++i) {
    if (!link_question && i >= doc_len) break;
    if (lexicon.count(tokens[i])) mentions[tokens[i]].push_back(i);
  }

  CorefAnnotation out;
  for (auto& [entity, positions] : mentions) {
    if (positions.size() < 2) continue;
    out.chains.push_back(std::move(positions));
    out.entities.push_back(entity);
  }
  return out;
}

std::int32_t Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::int32_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

std::int32_t Vocab::id_or_unk(const std::string& token) const {
  const auto i = id(token);
  return i >= 0 ? i : id(kUnknown);
}

Vocab Vocab::build(const std::vector<BabiExample>& examples) {
  Vocab v;
  v.add(kUnknown);
  for (const auto& ex : examples) {
    for (const auto& sent : ex.story)
      for (const auto& t : sent) v.add(t);
    for (const auto& t : ex.question) v.add(t);
    for (const auto& a : ex.answers) v.add(a);
  }
  return v;
}

BuildResult build_example_graph(const BabiExample& ex, const CorefAnnotation& coref,
                                const EdgeTypeRegistry& registry, TypeId coref_type,
                                const Vocab& vocab, const std::vector<Index>* permutation) {
  std::vector<std::int32_t> doc, query;
  for (const auto& sent : ex.story)
    for (const auto& t : sent) doc.push_back(vocab.id_or_unk(t));
  for (const auto& t : ex.question) query.push_back(vocab.id_or_unk(t));
  if (doc.empty() || query.empty())
    throw std::invalid_argument("build_example_graph: empty story or question");

  const Index doc_len = doc.size();
  auto locate = [&](Index global) -> std::pair<Index, Index> {
    if (global < doc_len) return {0, global};
    return {1, global - doc_len};
  };

  std::vector<Relation> relations;
  for (const auto& chain : coref.chains) {
    for (Index i = 0; i + 1 < chain.size(); ++i) {
      const auto [sa, pa] = locate(chain[i]);
      const auto [sb, pb] = locate(chain[i + 1]);
      relations.push_back({sa, pa, sb, pb, coref_type});
    }
  }

  const std::vector<std::vector<std::int32_t>> sequences = {doc, query};
  return build_graph(sequences, relations, registry, permutation);
}

std::vector<std::string> build_candidates(const std::vector<BabiExample>& training) {
  if (training.empty()) throw std::invalid_argument("build_candidates: empty training set");
  std::set<std::string> answers;
  for (const auto& ex : training)
    for (const auto& a : ex.answers) answers.insert(a);
  return {answers.begin(), answers.end()};
}

}  // namespace mage

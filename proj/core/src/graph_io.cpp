#include "mage/graph_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mage {

using nlohmann::json;

void write_graph_dump_line(std::ostream& os, const GraphDumpRecord& rec) {
  json j;
  j["tokens"] = rec.tokens;
  auto& segs = j["segments"] = json::array();
  for (const auto& [off, len] : rec.segments) segs.push_back({off, len});
  auto& edges = j["edges"] = json::array();
  for (const auto& [src, dst, type] : rec.edges) edges.push_back({src, dst, type});
  os << j.dump() << '\n';
}

std::vector<GraphDumpRecord> read_graph_dump(std::istream& is) {
  std::vector<GraphDumpRecord> out;
  std::string line;
  Index line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("graph dump line " + std::to_string(line_no) + ": " + e.what());
    }
    GraphDumpRecord rec;
    rec.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& s : j.at("segments"))
      rec.segments.emplace_back(s.at(0).get<Index>(), s.at(1).get<Index>());
    for (const auto& e : j.at("edges"))
      rec.edges.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>(), e.at(2).get<std::string>());
    out.push_back(std::move(rec));
  }
  return out;
}

GraphDumpRecord to_dump_record(const AnnotatedGraph& g, const MultiSequenceLayout& layout,
                               const std::vector<std::string>& token_strings,
                               const EdgeTypeRegistry& registry) {
  if (token_strings.size() != g.tokens.size())
    throw std::invalid_argument("to_dump_record: one token string per node required");
  GraphDumpRecord rec;
  rec.tokens = token_strings;
  rec.segments = layout.segments;
  for (const auto& e : g.base_edges) rec.edges.emplace_back(e.src, e.dst, registry.name(e.type));
  return rec;
}

BuildResult from_dump_record(const GraphDumpRecord& rec, const EdgeTypeRegistry& registry,
                             const std::function<std::int32_t(const std::string&)>& intern) {
  std::vector<std::vector<std::int32_t>> sequences(rec.segments.size());
  for (Index k = 0; k < rec.segments.size(); ++k) {
    const auto [off, len] = rec.segments[k];
    if (off + len > rec.tokens.size()) throw std::runtime_error("graph dump: segment out of range");
    for (Index i = 0; i < len; ++i) sequences[k].push_back(intern(rec.tokens[off + i]));
  }

  // The concatenation order is the segments sorted by offset.
  std::vector<Index> permutation(rec.segments.size());
  for (Index i = 0; i < permutation.size(); ++i) permutation[i] = i;
  std::sort(permutation.begin(), permutation.end(),
            [&](Index a, Index b) { return rec.segments[a].first < rec.segments[b].first; });

  auto seq_of = [&](Index global) -> std::pair<Index, Index> {
    for (Index k = 0; k < rec.segments.size(); ++k) {
      const auto [off, len] = rec.segments[k];
      if (global >= off && global < off + len) return {k, global - off};
    }
    throw std::runtime_error("graph dump: edge endpoint outside every segment");
  };

  std::vector<Relation> relations;
  for (const auto& [src, dst, type_name] : rec.edges) {
    const auto type = registry.find(type_name);
    if (!type) throw std::runtime_error("graph dump: unknown edge type '" + type_name + "'");
    if (*type == kSeqType || *type == kSeqInvType) continue;  // regenerated from segments
    const auto [sa, pa] = seq_of(src);
    const auto [sb, pb] = seq_of(dst);
    relations.push_back({sa, pa, sb, pb, *type});
  }
  return build_graph(sequences, relations, registry, &permutation);
}

}  // namespace mage

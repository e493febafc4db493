#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "mage/graph.hpp"

namespace mage {

/// One graph per line: tokens as strings, per-sequence [offset, length]
/// segments, and the base edges as [src, dst, type-name]. Inverse edges are
/// never written; loading regenerates them.
struct GraphDumpRecord {
  std::vector<std::string> tokens;
  std::vector<std::pair<Index, Index>> segments;
  std::vector<std::tuple<Index, Index, std::string>> edges;
};

void write_graph_dump_line(std::ostream& os, const GraphDumpRecord& rec);
std::vector<GraphDumpRecord> read_graph_dump(std::istream& is);

GraphDumpRecord to_dump_record(const AnnotatedGraph& g, const MultiSequenceLayout& layout,
                               const std::vector<std::string>& token_strings,
                               const EdgeTypeRegistry& registry);

/// Rebuilds the annotated graph (with regenerated inverses) from a record.
/// Tokens are re-interned through `intern`. Sequential edges are regenerated
/// from the segments; recorded seq entries are skipped rather than re-added.
BuildResult from_dump_record(const GraphDumpRecord& rec, const EdgeTypeRegistry& registry,
                             const std::function<std::int32_t(const std::string&)>& intern);

}  // namespace mage

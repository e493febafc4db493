#include "mage/graph.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <stdexcept>

namespace mage {

EdgeTypeRegistry::EdgeTypeRegistry() {
  entries_.push_back({"seq", false, kSeqInvType});
  entries_.push_back({"seq_inv", true, kSeqType});
}

std::pair<TypeId, TypeId> EdgeTypeRegistry::register_edge_type(const std::string& name) {
  if (find(name) || find(name + "_inv"))
    throw std::invalid_argument("edge type already registered: " + name);
  const TypeId id = static_cast<TypeId>(entries_.size());
  const TypeId inv = id + 1;
  entries_.push_back({name, false, inv});
  entries_.push_back({name + "_inv", true, id});
  return {id, inv};
}

std::optional<TypeId> EdgeTypeRegistry::find(const std::string& name) const {
  for (TypeId i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

Index MultiSequenceLayout::total() const {
  Index n = 0;
  for (const auto& [off, len] : segments) n += len;
  return n;
}

BuildResult build_graph(const std::vector<std::vector<std::int32_t>>& sequences,
                        const std::vector<Relation>& relations, const EdgeTypeRegistry& registry,
                        const std::vector<Index>* permutation) {
  const Index S = sequences.size();
  if (S == 0) throw std::invalid_argument("build_graph: no sequences");

  std::vector<Index> order(S);
  if (permutation) {
    if (permutation->size() != S) throw std::invalid_argument("build_graph: permutation size mismatch");
    std::vector<bool> seen(S, false);
    for (Index k : *permutation) {
      if (k >= S || seen[k]) throw std::invalid_argument("build_graph: invalid permutation");
      seen[k] = true;
    }
    order = *permutation;
  } else {
    for (Index i = 0; i < S; ++i) order[i] = i;
  }

  BuildResult out;
  out.layout.permutation = order;
  out.layout.segments.resize(S);

  Index offset = 0;
  for (Index k : order) {
    const auto& seq = sequences[k];
    if (seq.empty()) throw std::invalid_argument("build_graph: empty sequence");
    out.layout.segments[k] = {offset, seq.size()};
    out.graph.tokens.insert(out.graph.tokens.end(), seq.begin(), seq.end());
    offset += seq.size();
  }
  out.graph.node_count = offset;

  auto& base = out.graph.base_edges;
  for (Index k : order) {
    const auto [off, len] = out.layout.segments[k];
    for (Index i = 0; i + 1 < len; ++i) base.push_back({off + i, off + i + 1, kSeqType});
  }

  std::set<std::tuple<Index, Index, TypeId>> dedup;
  for (const auto& r : relations) {
    if (r.seq_a >= S || r.seq_b >= S) throw std::invalid_argument("build_graph: sequence index out of range");
    if (r.pos_a >= sequences[r.seq_a].size() || r.pos_b >= sequences[r.seq_b].size())
      throw std::invalid_argument("build_graph: relation position out of range");
    if (r.type >= registry.size()) throw std::invalid_argument("build_graph: unregistered edge type");
    if (registry.is_inverse(r.type))
      throw std::invalid_argument("build_graph: relations must use base types, got " +
                                  registry.name(r.type));
    const Index src = out.layout.segments[r.seq_a].first + r.pos_a;
    const Index dst = out.layout.segments[r.seq_b].first + r.pos_b;
    if (src == dst) {
      ++out.dropped_same_token;  // split into E_f/E_b undefined at i == j
      continue;
    }
    if (!dedup.insert({src, dst, r.type}).second)
      throw std::invalid_argument("build_graph: duplicate edge (" + std::to_string(src) + " -> " +
                                  std::to_string(dst) + ", " + registry.name(r.type) + ")");
    base.push_back({src, dst, r.type});
  }

  out.graph.all_edges = base;
  for (const auto& e : base) out.graph.all_edges.push_back({e.dst, e.src, registry.partner(e.type)});
  return out;
}

DagDecomposition decompose(const AnnotatedGraph& g) {
  DagDecomposition d;
  d.node_count = g.node_count;
  d.incoming_fwd.resize(g.node_count);
  d.incoming_bwd.resize(g.node_count);
  for (const auto& e : g.all_edges) {
    assert(e.src != e.dst);
    if (e.src < e.dst) {
      d.forward_edges.push_back(e);
      d.incoming_fwd[e.dst].push_back({e.src, e.type});
    } else {
      d.backward_edges.push_back(e);
      d.incoming_bwd[e.dst].push_back({e.src, e.type});
    }
  }
  return d;
}

bool is_chain_decomposable(const DagDecomposition& d) {
  auto unique_types = [](const std::vector<IncomingEdge>& in) {
    for (Index i = 0; i < in.size(); ++i)
      for (Index j = i + 1; j < in.size(); ++j)
        if (in[i].type == in[j].type) return false;
    return true;
  };
  for (const auto& in : d.incoming_fwd)
    if (!unique_types(in)) return false;
  for (const auto& in : d.incoming_bwd)
    if (!unique_types(in)) return false;
  return true;
}

}  // namespace mage

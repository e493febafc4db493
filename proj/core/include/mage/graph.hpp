#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mage/tensor.hpp"

namespace mage {

using TypeId = std::uint32_t;

constexpr TypeId kSeqType = 0;
constexpr TypeId kSeqInvType = 1;

/// Registered edge types. Every type has exactly one inverse partner; the
/// sequential pair (seq, seq_inv) occupies ids 0 and 1. Registering "coref"
/// creates "coref" and "coref_inv" with mutual partner links.
class EdgeTypeRegistry {
 public:
  EdgeTypeRegistry();

  std::pair<TypeId, TypeId> register_edge_type(const std::string& name);

  Index size() const { return entries_.size(); }
  TypeId partner(TypeId t) const { return entries_.at(t).partner; }
  bool is_inverse(TypeId t) const { return entries_.at(t).is_inverse; }
  const std::string& name(TypeId t) const { return entries_.at(t).name; }
  std::optional<TypeId> find(const std::string& name) const;

 private:
  struct Entry {
    std::string name;
    bool is_inverse;
    TypeId partner;
  };
  std::vector<Entry> entries_;
};

struct Edge {
  Index src, dst;
  TypeId type;
  bool operator==(const Edge&) const = default;
};

/// Token sequence plus typed directed edges. base_edges holds the annotated
/// set; all_edges additionally holds one generated inverse per base edge.
struct AnnotatedGraph {
  Index node_count = 0;
  std::vector<std::int32_t> tokens;
  std::vector<Edge> base_edges;
  std::vector<Edge> all_edges;
};

/// Where each original sequence landed in the concatenated index space.
struct MultiSequenceLayout {
  std::vector<std::pair<Index, Index>> segments;  // by original sequence: (offset, length)
  std::vector<Index> permutation;                 // concatenation order used
  Index total() const;
};

/// A typed relation between positions of two (possibly equal) sequences.
struct Relation {
  Index seq_a, pos_a;
  Index seq_b, pos_b;
  TypeId type;
};

struct BuildResult {
  AnnotatedGraph graph;
  MultiSequenceLayout layout;
  Index dropped_same_token = 0;  // annotations collapsing to one token
};

/// Concatenates the sequences in the given order (identity when absent), adds
/// sequential edges within each segment, maps relations to global indices and
/// generates inverse edges.
BuildResult build_graph(const std::vector<std::vector<std::int32_t>>& sequences,
                        const std::vector<Relation>& relations, const EdgeTypeRegistry& registry,
                        const std::vector<Index>* permutation = nullptr);

struct IncomingEdge {
  Index source;
  TypeId type;
  bool operator==(const IncomingEdge&) const = default;
};

/// The forward/backward split of all_edges by index order, with per-node
/// incoming-edge sets for each direction's topological order.
struct DagDecomposition {
  Index node_count = 0;
  std::vector<Edge> forward_edges;   // src < dst
  std::vector<Edge> backward_edges;  // src > dst
  std::vector<std::vector<IncomingEdge>> incoming_fwd;
  std::vector<std::vector<IncomingEdge>> incoming_bwd;
};

DagDecomposition decompose(const AnnotatedGraph& g);

/// True iff every node has at most one incoming edge of each type in each
/// direction, i.e. the DAG splits into independent chains.
bool is_chain_decomposable(const DagDecomposition& d);

}  // namespace mage

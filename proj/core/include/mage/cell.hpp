#pragma once

#include <random>
#include <string>
#include <vector>

#include "mage/graph.hpp"
#include "mage/params.hpp"
#include "mage/tape.hpp"

namespace mage {

/// Per-direction hidden-state widths, one entry per edge type the direction
/// handles, in registry-id order. The concatenated output width is total().
struct EdgeDimSplit {
  std::vector<std::pair<TypeId, Index>> dims;

  Index total() const;
  int index_of(TypeId t) const;  // -1 when absent
  void validate() const;         // positive widths, strictly increasing type ids
};

/// Weights for one direction of a MAGE-GRU. One state slot per edge type
/// (one shared slot when `shared` is set, aliased by every type in the
/// split). Slot i updates with W_*[i] (d_i x d_in), cross-slot recurrences
/// U_*[i][j] (d_i x d_j) and biases b_*[i] (d_i).
struct MageGruDirParams {
  Index d_in = 0;
  bool shared = false;
  EdgeDimSplit split;                 // as configured (per type)
  std::vector<Index> slot_dims;       // per slot
  std::vector<Parameter*> W_r, W_z, W_h;
  std::vector<std::vector<Parameter*>> U_r, U_z, U_h;
  std::vector<Parameter*> b_r, b_z, b_h;

  Index n_slots() const { return slot_dims.size(); }
  Index out_width() const;
  int slot_of(TypeId t) const;  // -1 when the type is not handled

  std::vector<Parameter*> all() const;
};

struct MageGruParams {
  MageGruDirParams fwd, bwd;
  std::vector<Parameter*> all() const;
};

/// Creates and initializes one direction's parameters under `prefix`
/// (e.g. "mage.fwd"). Weight names follow "<prefix>.U_r.<type>.<type'>".
MageGruDirParams make_dir_params(ParameterStore& store, const std::string& prefix,
                                 const EdgeTypeRegistry& registry, const EdgeDimSplit& split,
                                 Index d_in, bool shared, std::mt19937_64& rng);

MageGruParams make_mage_params(ParameterStore& store, const std::string& prefix,
                               const EdgeTypeRegistry& registry, const EdgeDimSplit& fwd_split,
                               const EdgeDimSplit& bwd_split, Index d_in, bool shared,
                               std::mt19937_64& rng);

enum class Direction { kForward, kBackward };
enum class StepPath { kAuto, kGeneral, kChain };

struct CellOptions {
  StepPath path = StepPath::kAuto;
  /// Interpolate h_t with the incoming memory state g_t instead of the state
  /// at the sequential predecessor (zero at sequence starts). Default off:
  /// the update's last line as written anchors on the previous position.
  bool interpolate_with_memory = false;
};

struct EncodeStats {
  Index steps = 0;  // one per node visit per direction
};

/// Leaf vars for one direction's parameters on a given tape.
struct MageGruDirLeafs {
  std::vector<Var> W_r, W_z, W_h;
  std::vector<std::vector<Var>> U_r, U_z, U_h;
  std::vector<Var> b_r, b_z, b_h;
  static MageGruDirLeafs bind(Tape& tape, const MageGruDirParams& dp);
};

/// One typed gated update (per-slot form). `incoming` carries
/// (source slot, source state) pairs; `prev` holds each slot's state at the
/// previous topological position. Returns the new per-slot states.
std::vector<Var> step_general(Tape& tape, const MageGruDirParams& dp, const MageGruDirLeafs& leafs,
                              Var x, const std::vector<std::pair<int, Var>>& incoming,
                              const std::vector<Var>& prev);

/// Concatenation of per-slot states in registry order.
Var concat_output(Tape& tape, const std::vector<Var>& slot_states);

/// The direction's parameters block-stacked into single matrices, assembled
/// on-tape so gradients flow back into the per-type parameters.
struct StackedDirLeafs {
  Var W_r, W_z, W_h, U_r, U_z, U_h, b_r, b_z, b_h;
  static StackedDirLeafs stack(Tape& tape, const MageGruDirParams& dp, const MageGruDirLeafs& leafs);
};

/// One combined GRU update over the stacked parameters with memory vector g.
Var step_chain(Tape& tape, const StackedDirLeafs& sp, Var x, Var g, Var h_prev);

/// Encodes every node of one direction's DAG in its topological order,
/// touching each node exactly once. Returns the concatenated output per node,
/// indexed by original position.
std::vector<Var> encode_direction(Tape& tape, const DagDecomposition& d, Direction dir,
                                  const std::vector<Var>& inputs, const MageGruDirParams& dp,
                                  const CellOptions& opts = {}, EncodeStats* stats = nullptr);

/// Row t is fwd_output[t] || bwd_output[t]; both splits must agree in total width.
std::vector<Var> encode_bidirectional(Tape& tape, const DagDecomposition& d,
                                      const std::vector<Var>& inputs, const MageGruParams& params,
                                      const CellOptions& opts = {}, EncodeStats* stats = nullptr);

/// Feeds each layer's bidirectional output to the next layer over the same DAG.
std::vector<Var> stack_layers(Tape& tape, const DagDecomposition& d, const std::vector<Var>& inputs,
                              const std::vector<const MageGruParams*>& layers,
                              const CellOptions& opts = {}, EncodeStats* stats = nullptr);

/// True iff the direction's incoming sets never repeat a type at a node.
bool direction_chain_decomposable(const DagDecomposition& d, Direction dir);

}  // namespace mage

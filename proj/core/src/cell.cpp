#include "mage/cell.hpp"

#include <algorithm>
#include <stdexcept>

namespace mage {

Index EdgeDimSplit::total() const {
  Index n = 0;
  for (const auto& [t, d] : dims) n += d;
  return n;
}

int EdgeDimSplit::index_of(TypeId t) const {
  for (Index i = 0; i < dims.size(); ++i)
    if (dims[i].first == t) return static_cast<int>(i);
  return -1;
}

void EdgeDimSplit::validate() const {
  if (dims.empty()) throw std::invalid_argument("edge dim split is empty");
  for (Index i = 0; i < dims.size(); ++i) {
    if (dims[i].second == 0) throw std::invalid_argument("edge state width must be positive");
    if (i > 0 && dims[i].first <= dims[i - 1].first)
      throw std::invalid_argument("edge dim split must be in registry order");
  }
}

Index MageGruDirParams::out_width() const {
  Index n = 0;
  for (Index d : slot_dims) n += d;
  return n;
}

int MageGruDirParams::slot_of(TypeId t) const {
  const int i = split.index_of(t);
  if (i < 0) return -1;
  return shared ? 0 : i;
}

std::vector<Parameter*> MageGruDirParams::all() const {
  std::vector<Parameter*> out;
  for (auto* p : W_r) out.push_back(p);
  for (auto* p : W_z) out.push_back(p);
  for (auto* p : W_h) out.push_back(p);
  for (const auto& row : U_r)
    for (auto* p : row) out.push_back(p);
  for (const auto& row : U_z)
    for (auto* p : row) out.push_back(p);
  for (const auto& row : U_h)
    for (auto* p : row) out.push_back(p);
  for (auto* p : b_r) out.push_back(p);
  for (auto* p : b_z) out.push_back(p);
  for (auto* p : b_h) out.push_back(p);
  return out;
}

std::vector<Parameter*> MageGruParams::all() const {
  auto out = fwd.all();
  for (auto* p : bwd.all()) out.push_back(p);
  return out;
}

MageGruDirParams make_dir_params(ParameterStore& store, const std::string& prefix,
                                 const EdgeTypeRegistry& registry, const EdgeDimSplit& split,
                                 Index d_in, bool shared, std::mt19937_64& rng) {
  split.validate();
  if (d_in == 0) throw std::invalid_argument("d_in must be positive");

  MageGruDirParams dp;
  dp.d_in = d_in;
  dp.shared = shared;
  dp.split = split;

  std::vector<std::string> slot_names;
  if (shared) {
    const Index d = split.dims.front().second;
    for (const auto& [t, dt] : split.dims)
      if (dt != d) throw std::invalid_argument("shared mode requires one common state width");
    dp.slot_dims = {d};
    slot_names = {"shared"};
  } else {
    for (const auto& [t, d] : split.dims) {
      dp.slot_dims.push_back(d);
      slot_names.push_back(registry.name(t));
    }
  }

  const Index S = dp.n_slots();
  auto weight = [&](const std::string& gate, Index e) {
    return &store.create_uniform(prefix + ".W_" + gate + "." + slot_names[e],
                                 {dp.slot_dims[e], d_in}, d_in, dp.slot_dims[e], rng);
  };
  auto recur = [&](const std::string& gate, Index e, Index e2) {
    return &store.create_uniform(prefix + ".U_" + gate + "." + slot_names[e] + "." + slot_names[e2],
                                 {dp.slot_dims[e], dp.slot_dims[e2]}, dp.slot_dims[e2],
                                 dp.slot_dims[e], rng);
  };
  auto bias = [&](const std::string& gate, Index e) {
    return &store.create_zeros(prefix + ".b_" + gate + "." + slot_names[e], {dp.slot_dims[e]});
  };

  for (Index e = 0; e < S; ++e) {
    dp.W_r.push_back(weight("r", e));
    dp.W_z.push_back(weight("z", e));
    dp.W_h.push_back(weight("h", e));
    dp.b_r.push_back(bias("r", e));
    dp.b_z.push_back(bias("z", e));
    dp.b_h.push_back(bias("h", e));
  }
  dp.U_r.resize(S);
  dp.U_z.resize(S);
  dp.U_h.resize(S);
  for (Index e = 0; e < S; ++e)
    for (Index e2 = 0; e2 < S; ++e2) {
      dp.U_r[e].push_back(recur("r", e, e2));
      dp.U_z[e].push_back(recur("z", e, e2));
      dp.U_h[e].push_back(recur("h", e, e2));
    }
  return dp;
}

MageGruParams make_mage_params(ParameterStore& store, const std::string& prefix,
                               const EdgeTypeRegistry& registry, const EdgeDimSplit& fwd_split,
                               const EdgeDimSplit& bwd_split, Index d_in, bool shared,
                               std::mt19937_64& rng) {
  MageGruParams p;
  p.fwd = make_dir_params(store, prefix + ".fwd", registry, fwd_split, d_in, shared, rng);
  p.bwd = make_dir_params(store, prefix + ".bwd", registry, bwd_split, d_in, shared, rng);
  return p;
}

MageGruDirLeafs MageGruDirLeafs::bind(Tape& tape, const MageGruDirParams& dp) {
  MageGruDirLeafs l;
  const Index S = dp.n_slots();
  l.U_r.resize(S);
  l.U_z.resize(S);
  l.U_h.resize(S);
  for (Index e = 0; e < S; ++e) {
    l.W_r.push_back(tape.leaf(*dp.W_r[e]));
    l.W_z.push_back(tape.leaf(*dp.W_z[e]));
    l.W_h.push_back(tape.leaf(*dp.W_h[e]));
    l.b_r.push_back(tape.leaf(*dp.b_r[e]));
    l.b_z.push_back(tape.leaf(*dp.b_z[e]));
    l.b_h.push_back(tape.leaf(*dp.b_h[e]));
    for (Index e2 = 0; e2 < S; ++e2) {
      l.U_r[e].push_back(tape.leaf(*dp.U_r[e][e2]));
      l.U_z[e].push_back(tape.leaf(*dp.U_z[e][e2]));
      l.U_h[e].push_back(tape.leaf(*dp.U_h[e][e2]));
    }
  }
  return l;
}

std::vector<Var> step_general(Tape& tape, const MageGruDirParams& dp, const MageGruDirLeafs& leafs,
                              Var x, const std::vector<std::pair<int, Var>>& incoming,
                              const std::vector<Var>& prev) {
  const Index S = dp.n_slots();
  if (prev.size() != S) throw std::invalid_argument("step_general: one previous state per slot");
  std::vector<Var> next(S);
  for (Index e = 0; e < S; ++e) {
    Var pre_r = tape.matvec(leafs.W_r[e], x);
    Var pre_z = tape.matvec(leafs.W_z[e], x);
    for (const auto& [e2, h] : incoming) {
      pre_r = tape.add(pre_r, tape.matvec(leafs.U_r[e][e2], h));
      pre_z = tape.add(pre_z, tape.matvec(leafs.U_z[e][e2], h));
    }
    const Var r = tape.sigmoid(tape.add(pre_r, leafs.b_r[e]));
    const Var z = tape.sigmoid(tape.add(pre_z, leafs.b_z[e]));

    Var pre_h = tape.matvec(leafs.W_h[e], x);
    if (!incoming.empty()) {
      Var acc = tape.matvec(leafs.U_h[e][incoming[0].first], incoming[0].second);
      for (Index i = 1; i < incoming.size(); ++i)
        acc = tape.add(acc, tape.matvec(leafs.U_h[e][incoming[i].first], incoming[i].second));
      pre_h = tape.add(pre_h, tape.hadamard(r, acc));
    }
    const Var htil = tape.tanh(tape.add(pre_h, leafs.b_h[e]));

    const Var keep = tape.hadamard(tape.scale_shift(z, -1.0, 1.0), prev[e]);
    next[e] = tape.add(keep, tape.hadamard(z, htil));
  }
  return next;
}

Var concat_output(Tape& tape, const std::vector<Var>& slot_states) {
  if (slot_states.empty()) throw std::invalid_argument("concat_output: no states");
  if (slot_states.size() == 1) return slot_states[0];
  return tape.concat(slot_states, 0);
}

StackedDirLeafs StackedDirLeafs::stack(Tape& tape, const MageGruDirParams& dp,
                                       const MageGruDirLeafs& leafs) {
  const Index S = dp.n_slots();
  auto rows = [&](const std::vector<Var>& parts) {
    return parts.size() == 1 ? parts[0] : tape.concat(parts, 0);
  };
  auto block = [&](const std::vector<std::vector<Var>>& u) {
    std::vector<Var> stacked_rows(S);
    for (Index e = 0; e < S; ++e)
      stacked_rows[e] = u[e].size() == 1 ? u[e][0] : tape.concat(u[e], 1);
    return rows(stacked_rows);
  };
  StackedDirLeafs sp;
  sp.W_r = rows(leafs.W_r);
  sp.W_z = rows(leafs.W_z);
  sp.W_h = rows(leafs.W_h);
  sp.U_r = block(leafs.U_r);
  sp.U_z = block(leafs.U_z);
  sp.U_h = block(leafs.U_h);
  sp.b_r = rows(leafs.b_r);
  sp.b_z = rows(leafs.b_z);
  sp.b_h = rows(leafs.b_h);
  return sp;
}

Var step_chain(Tape& tape, const StackedDirLeafs& sp, Var x, Var g, Var h_prev) {
  const Var r = tape.sigmoid(tape.add(tape.add(tape.matvec(sp.W_r, x), tape.matvec(sp.U_r, g)), sp.b_r));
  const Var z = tape.sigmoid(tape.add(tape.add(tape.matvec(sp.W_z, x), tape.matvec(sp.U_z, g)), sp.b_z));
  const Var htil = tape.tanh(
      tape.add(tape.add(tape.matvec(sp.W_h, x), tape.hadamard(r, tape.matvec(sp.U_h, g))), sp.b_h));
  const Var keep = tape.hadamard(tape.scale_shift(z, -1.0, 1.0), h_prev);
  return tape.add(keep, tape.hadamard(z, htil));
}

bool direction_chain_decomposable(const DagDecomposition& d, Direction dir) {
  const auto& incoming = dir == Direction::kForward ? d.incoming_fwd : d.incoming_bwd;
  for (const auto& in : incoming)
    for (Index i = 0; i < in.size(); ++i)
      for (Index j = i + 1; j < in.size(); ++j)
        if (in[i].type == in[j].type) return false;
  return true;
}

namespace {

// Shared driver state: the per-node, per-slot hidden states produced so far.
struct DirectionPlan {
  const std::vector<std::vector<IncomingEdge>>* incoming;
  std::vector<Index> order;  // topological visit order
  TypeId seq_type;           // the direction's sequential edge type
};

DirectionPlan plan_direction(const DagDecomposition& d, Direction dir) {
  DirectionPlan p;
  p.order.resize(d.node_count);
  if (dir == Direction::kForward) {
    p.incoming = &d.incoming_fwd;
    p.seq_type = kSeqType;
    for (Index t = 0; t < d.node_count; ++t) p.order[t] = t;
  } else {
    p.incoming = &d.incoming_bwd;
    p.seq_type = kSeqInvType;
    for (Index t = 0; t < d.node_count; ++t) p.order[t] = d.node_count - 1 - t;
  }
  return p;
}

int required_slot(const MageGruDirParams& dp, TypeId type) {
  const int slot = dp.slot_of(type);
  if (slot < 0)
    throw std::invalid_argument("edge type id " + std::to_string(type) +
                                " has no state width in this direction's dim split");
  return slot;
}

// The interpolation anchor h_{t-1} is the state at the node's sequential
// predecessor (the incoming seq-type edge source), zero at sequence starts.
// This coincides with the previous topological position inside a sequence and
// keeps disconnected segments independent.
const std::vector<IncomingEdge>* find_seq_source(const std::vector<IncomingEdge>& incoming,
                                                 TypeId seq_type, Index* source) {
  for (const auto& in : incoming) {
    if (in.type == seq_type) {
      *source = in.source;
      return &incoming;
    }
  }
  return nullptr;
}

std::vector<Var> encode_general(Tape& tape, const DagDecomposition& d, const DirectionPlan& plan,
                                const std::vector<Var>& inputs, const MageGruDirParams& dp,
                                const CellOptions& opts, EncodeStats* stats) {
  const Index S = dp.n_slots();
  const MageGruDirLeafs leafs = MageGruDirLeafs::bind(tape, dp);

  std::vector<Var> zero_state(S);
  for (Index e = 0; e < S; ++e) zero_state[e] = tape.zeros({dp.slot_dims[e]});

  std::vector<std::vector<Var>> states(d.node_count);
  std::vector<Var> out(d.node_count);

  for (Index t : plan.order) {
    std::vector<std::pair<int, Var>> incoming;
    incoming.reserve((*plan.incoming)[t].size());
    for (const auto& in : (*plan.incoming)[t]) {
      const int slot = required_slot(dp, in.type);
      incoming.push_back({slot, states[in.source][slot]});
    }

    std::vector<Var> prev = zero_state;
    if (opts.interpolate_with_memory) {
      for (Index e = 0; e < S; ++e) {
        Var acc;
        bool found = false;
        for (const auto& [slot, h] : incoming) {
          if (static_cast<Index>(slot) != e) continue;
          acc = found ? tape.add(acc, h) : h;
          found = true;
        }
        if (found) prev[e] = acc;
      }
    } else {
      Index seq_src = 0;
      if (find_seq_source((*plan.incoming)[t], plan.seq_type, &seq_src)) prev = states[seq_src];
    }

    states[t] = step_general(tape, dp, leafs, inputs[t], incoming, prev);
    out[t] = concat_output(tape, states[t]);
    if (stats) ++stats->steps;
  }
  return out;
}

std::vector<Var> encode_chain(Tape& tape, const DagDecomposition& d, const DirectionPlan& plan,
                              const std::vector<Var>& inputs, const MageGruDirParams& dp,
                              const CellOptions& opts, EncodeStats* stats) {
  const Index S = dp.n_slots();
  const MageGruDirLeafs leafs = MageGruDirLeafs::bind(tape, dp);
  const StackedDirLeafs sp = StackedDirLeafs::stack(tape, dp, leafs);

  std::vector<Var> zero_state(S);
  for (Index e = 0; e < S; ++e) zero_state[e] = tape.zeros({dp.slot_dims[e]});
  const Var zero_full = tape.zeros({dp.out_width()});

  // Per-node per-slot states (slices of the stacked output) for later edges,
  // plus the full stacked state used as the interpolation anchor.
  std::vector<std::vector<Var>> states(d.node_count);
  std::vector<Var> full_state(d.node_count);
  std::vector<Var> out(d.node_count);

  for (Index t : plan.order) {
    const auto& in_edges = (*plan.incoming)[t];

    Var g;
    if (dp.shared) {
      // One slot: the stacked update's memory is the sum of incoming states.
      bool found = false;
      for (const auto& in : in_edges) {
        required_slot(dp, in.type);
        const Var h = states[in.source][0];
        g = found ? tape.add(g, h) : h;
        found = true;
      }
      if (!found) g = zero_full;
    } else {
      std::vector<Var> pieces(S);
      std::vector<bool> filled(S, false);
      for (const auto& in : in_edges) {
        const int slot = required_slot(dp, in.type);
        if (filled[slot])
          throw std::invalid_argument(
              "chain step on a non-chain-decomposable DAG (two incoming edges of one type at node " +
              std::to_string(t) + ")");
        pieces[slot] = states[in.source][slot];
        filled[slot] = true;
      }
      for (Index e = 0; e < S; ++e)
        if (!filled[e]) pieces[e] = zero_state[e];
      g = S == 1 ? pieces[0] : tape.concat(pieces, 0);
    }

    Var anchor = zero_full;
    if (opts.interpolate_with_memory) {
      anchor = g;
    } else {
      Index seq_src = 0;
      if (find_seq_source(in_edges, plan.seq_type, &seq_src)) anchor = full_state[seq_src];
    }
    const Var h = step_chain(tape, sp, inputs[t], g, anchor);

    auto& slots = states[t];
    slots.resize(S);
    if (S == 1) {
      slots[0] = h;
    } else {
      Index off = 0;
      for (Index e = 0; e < S; ++e) {
        slots[e] = tape.slice(h, 0, off, dp.slot_dims[e]);
        off += dp.slot_dims[e];
      }
    }
    out[t] = h;
    full_state[t] = h;
    if (stats) ++stats->steps;
  }
  return out;
}

}  // namespace

std::vector<Var> encode_direction(Tape& tape, const DagDecomposition& d, Direction dir,
                                  const std::vector<Var>& inputs, const MageGruDirParams& dp,
                                  const CellOptions& opts, EncodeStats* stats) {
  if (inputs.size() != d.node_count)
    throw std::invalid_argument("encode_direction: need one input per node");
  if (d.node_count == 0) throw std::invalid_argument("encode_direction: empty graph");
  const DirectionPlan plan = plan_direction(d, dir);

  StepPath path = opts.path;
  if (path == StepPath::kAuto)
    path = direction_chain_decomposable(d, dir) ? StepPath::kChain : StepPath::kGeneral;
  else if (path == StepPath::kChain && !dp.shared && !direction_chain_decomposable(d, dir))
    throw std::invalid_argument("chain path requested for a non-chain-decomposable DAG");

  return path == StepPath::kChain ? encode_chain(tape, d, plan, inputs, dp, opts, stats)
                                  : encode_general(tape, d, plan, inputs, dp, opts, stats);
}

std::vector<Var> encode_bidirectional(Tape& tape, const DagDecomposition& d,
                                      const std::vector<Var>& inputs, const MageGruParams& params,
                                      const CellOptions& opts, EncodeStats* stats) {
  if (params.fwd.out_width() != params.bwd.out_width())
    throw std::invalid_argument("encode_bidirectional: forward width " +
                                std::to_string(params.fwd.out_width()) + " != backward width " +
                                std::to_string(params.bwd.out_width()));
  const auto hf = encode_direction(tape, d, Direction::kForward, inputs, params.fwd, opts, stats);
  const auto hb = encode_direction(tape, d, Direction::kBackward, inputs, params.bwd, opts, stats);
  std::vector<Var> rows(d.node_count);
  for (Index t = 0; t < d.node_count; ++t) {
    const Var parts[2] = {hf[t], hb[t]};
    rows[t] = tape.concat(parts, 0);
  }
  return rows;
}

std::vector<Var> stack_layers(Tape& tape, const DagDecomposition& d, const std::vector<Var>& inputs,
                              const std::vector<const MageGruParams*>& layers,
                              const CellOptions& opts, EncodeStats* stats) {
  if (layers.empty()) throw std::invalid_argument("stack_layers: need at least one layer");
  std::vector<Var> cur = inputs;
  for (Index l = 0; l < layers.size(); ++l) {
    const MageGruParams& p = *layers[l];
    const Index need = p.fwd.d_in;
    if (tape.value(cur[0]).size() != need)
      throw std::invalid_argument("stack_layers: layer " + std::to_string(l) + " expects width " +
                                  std::to_string(need) + ", got " +
                                  std::to_string(tape.value(cur[0]).size()));
    cur = encode_bidirectional(tape, d, cur, p, opts, stats);
  }
  return cur;
}

}  // namespace mage

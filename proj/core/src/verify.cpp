#include "mage/verify.hpp"

#include <random>

#include "mage/cell.hpp"
#include "mage/grad_check.hpp"
#include "mage/graph.hpp"
#include "mage/reader.hpp"

namespace mage {

namespace {

Tensor random_tensor(std::vector<Index> shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(-scale, scale);
  for (Index i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

struct Fixture {
  ParameterStore store;
  std::vector<Parameter*> params;
  Parameter& param(const std::string& name, Tensor init) {
    Parameter& p = store.create(name, std::move(init));
    params.push_back(&p);
    return p;
  }
};

CheckResult run(const std::string& name, Fixture& fx, const LossBuilder& f,
                double threshold = 1e-4) {
  const auto r = grad_check(f, fx.params, 1e-5);
  return {name, r.max_rel_error, threshold, r.max_rel_error < threshold};
}

// Weighted sum makes the output gradient non-uniform.
Var weigh(Tape& t, Var v, const Tensor& weights) { return t.sum(t.hadamard(v, t.constant(weights))); }

}  // namespace

std::vector<CheckResult> grad_check_primitives(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({3, 4}, rng));
    Parameter& b = fx.param("b", random_tensor({4, 2}, rng));
    const Tensor w = random_tensor({3, 2}, rng);
    out.push_back(run("matmul", fx, [&](Tape& t) { return weigh(t, t.matmul(t.leaf(a), t.leaf(b)), w); }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({5, 3}, rng));
    Parameter& x = fx.param("x", random_tensor({3}, rng));
    const Tensor w = random_tensor({5}, rng);
    out.push_back(run("matvec", fx, [&](Tape& t) { return weigh(t, t.matvec(t.leaf(a), t.leaf(x)), w); }));
  }
  {
    Fixture fx;
    Parameter& x = fx.param("x", random_tensor({4}, rng));
    Parameter& a = fx.param("a", random_tensor({4, 6}, rng));
    const Tensor w = random_tensor({6}, rng);
    out.push_back(run("vecmat", fx, [&](Tape& t) { return weigh(t, t.vecmat(t.leaf(x), t.leaf(a)), w); }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({6}, rng));
    Parameter& b = fx.param("b", random_tensor({6}, rng));
    const Tensor w = random_tensor({6}, rng);
    out.push_back(run("add", fx, [&](Tape& t) { return weigh(t, t.add(t.leaf(a), t.leaf(b)), w); }));
    out.push_back(
        run("hadamard", fx, [&](Tape& t) { return weigh(t, t.hadamard(t.leaf(a), t.leaf(b)), w); }));
    out.push_back(run("scale_shift", fx,
                      [&](Tape& t) { return weigh(t, t.scale_shift(t.leaf(a), -1.7, 0.3), w); }));
    out.push_back(run("sigmoid", fx, [&](Tape& t) { return weigh(t, t.sigmoid(t.leaf(a)), w); }));
    out.push_back(run("tanh", fx, [&](Tape& t) { return weigh(t, t.tanh(t.leaf(a)), w); }));
    out.push_back(run("softmax", fx, [&](Tape& t) { return weigh(t, t.softmax(t.leaf(a)), w); }));
    out.push_back(run("nll_loss", fx,
                      [&](Tape& t) { return t.nll_loss(t.softmax(t.leaf(a)), 2); }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({3}, rng));
    Parameter& b = fx.param("b", random_tensor({5}, rng));
    const Tensor w = random_tensor({8}, rng);
    out.push_back(run("concat.axis0", fx, [&](Tape& t) {
      const Var parts[2] = {t.leaf(a), t.leaf(b)};
      return weigh(t, t.concat(parts, 0), w);
    }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({2, 3}, rng));
    Parameter& b = fx.param("b", random_tensor({2, 2}, rng));
    const Tensor w = random_tensor({2, 5}, rng);
    out.push_back(run("concat.axis1", fx, [&](Tape& t) {
      const Var parts[2] = {t.leaf(a), t.leaf(b)};
      return weigh(t, t.concat(parts, 1), w);
    }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({8}, rng));
    const Tensor w = random_tensor({3}, rng);
    out.push_back(
        run("slice", fx, [&](Tape& t) { return weigh(t, t.slice(t.leaf(a), 0, 2, 3), w); }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({4}, rng));
    Parameter& b = fx.param("b", random_tensor({4}, rng));
    const Tensor w = random_tensor({2, 4}, rng);
    out.push_back(run("stack_rows", fx, [&](Tape& t) {
      const Var rows[2] = {t.leaf(a), t.leaf(b)};
      return weigh(t, t.stack_rows(rows), w);
    }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({5, 4}, rng));
    const Tensor w = random_tensor({4}, rng);
    out.push_back(
        run("select_row", fx, [&](Tape& t) { return weigh(t, t.select_row(t.leaf(a), 3), w); }));
  }
  {
    Fixture fx;
    Parameter& a = fx.param("a", random_tensor({6}, rng));
    out.push_back(run("sum", fx, [&](Tape& t) { return t.sum(t.leaf(a)); }));
    const Tensor w = random_tensor({3}, rng);
    out.push_back(run("group_sums", fx, [&](Tape& t) {
      return weigh(t, t.group_sums(t.softmax(t.leaf(a)), {0, 1, 2, 0, 1, 0}, 3), w);
    }));
  }
  return out;
}

std::vector<CheckResult> grad_check_full_encode(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  EdgeTypeRegistry registry;
  const auto [coref, coref_inv] = registry.register_edge_type("coref");

  const Index n = 8, d_in = 5;
  const EdgeDimSplit fwd{{{kSeqType, 4}, {coref, 3}}};
  const EdgeDimSplit bwd{{{kSeqInvType, 4}, {coref_inv, 3}}};

  struct Case {
    const char* name;
    StepPath path;
    std::vector<Relation> relations;
  };
  // General path: a node with two incoming coref edges; chain path: disjoint links.
  const std::vector<Case> cases = {
      {"encode.general", StepPath::kGeneral, {{0, 1, 0, 5, coref}, {0, 3, 0, 5, coref}, {0, 2, 0, 7, coref}}},
      {"encode.chain", StepPath::kChain, {{0, 1, 0, 5, coref}, {0, 2, 0, 7, coref}}},
  };

  for (const auto& c : cases) {
    Fixture fx;
    const std::vector<std::vector<std::int32_t>> seqs = {{0, 1, 2, 3, 4, 5, 6, 7}};
    const auto built = build_graph(seqs, c.relations, registry);
    const auto decomp = decompose(built.graph);

    std::mt19937_64 init(seed ^ 0xabcdef);
    MageGruParams params = make_mage_params(fx.store, "mage", registry, fwd, bwd, d_in, false, init);
    for (auto* p : params.all()) fx.params.push_back(p);
    std::vector<Parameter*> inputs;
    for (Index t = 0; t < n; ++t)
      inputs.push_back(&fx.param("x." + std::to_string(t), random_tensor({d_in}, rng, 0.8)));
    Parameter& w_c = fx.param("W_C", random_tensor({14, 3}, rng, 0.8));
    const Tensor h_q = random_tensor({14}, rng, 0.8);

    CellOptions opts;
    opts.path = c.path;
    auto loss_builder = [&](Tape& t) {
      std::vector<Var> xs;
      for (auto* p : inputs) xs.push_back(t.leaf(*p));
      const auto rows = encode_bidirectional(t, decomp, xs, params, opts);
      const Var H = t.stack_rows(rows);
      const Var alpha = attention(t, t.constant(h_q), H);
      const Var p_c = answer_classify(t, alpha, H, t.leaf(w_c));
      return t.nll_loss(p_c, 1);
    };
    out.push_back(run(c.name, fx, loss_builder));
  }
  return out;
}

std::vector<CheckResult> grad_check_all(std::uint64_t seed) {
  auto out = grad_check_primitives(seed);
  for (auto& r : grad_check_full_encode(seed)) out.push_back(std::move(r));
  return out;
}

}  // namespace mage

#include <benchmark/benchmark.h>

#include <random>

#include "mage/babi.hpp"
#include "mage/babi_sim.hpp"
#include "mage/cell.hpp"
#include "mage/graph.hpp"
#include "mage/model.hpp"
#include "mage/train.hpp"

using namespace mage;

namespace {

std::vector<Var> make_inputs(Tape& tape, Index n, Index d_in, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Var> xs;
  for (Index t = 0; t < n; ++t) {
    Tensor x({d_in});
    for (Index i = 0; i < d_in; ++i) x[i] = dist(rng);
    xs.push_back(tape.constant(std::move(x)));
  }
  return xs;
}

struct EncodeFixture {
  EdgeTypeRegistry reg;
  ParameterStore store;
  MageGruParams params;
  BuildResult built;
  DagDecomposition decomp;
  Index d_in = 64;

  explicit EncodeFixture(Index nodes) {
    const auto coref = reg.register_edge_type("coref").first;
    std::mt19937_64 rng(1);
    const EdgeDimSplit fwd{{{kSeqType, 48}, {coref, 16}}};
    const EdgeDimSplit bwd{{{kSeqInvType, 48}, {reg.partner(coref), 16}}};
    params = make_mage_params(store, "m", reg, fwd, bwd, d_in, false, rng);

    std::vector<std::int32_t> toks(nodes);
    std::vector<Relation> rels;
    for (Index i = 0; i + 6 < nodes; i += 6) rels.push_back({0, i, 0, i + 6, coref});
    built = build_graph({toks}, rels, reg);
    decomp = decompose(built.graph);
  }
};

void BM_EncodeBidirectional(benchmark::State& state, StepPath path) {
  EncodeFixture fx(static_cast<Index>(state.range(0)));
  std::mt19937_64 rng(2);
  Tape tape;
  for (auto _ : state) {
    tape.reset();
    const auto xs = make_inputs(tape, fx.decomp.node_count, fx.d_in, rng);
    const auto rows = encode_bidirectional(tape, fx.decomp, xs, fx.params, {path, false});
    benchmark::DoNotOptimize(tape.value(rows.back()).data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EncodeGeneral(benchmark::State& state) { BM_EncodeBidirectional(state, StepPath::kGeneral); }
void BM_EncodeChain(benchmark::State& state) { BM_EncodeBidirectional(state, StepPath::kChain); }

void BM_TrainStep(benchmark::State& state) {
  StoryGenConfig gen;
  gen.task = 1;
  gen.stories = 4;
  gen.seed = 5;
  const auto file = parse_babi_text(generate_babi_stories(gen), "bench");
  const auto lexicon = derive_entity_lexicon(file);

  ModelConfig mc;
  ReaderModel model(mc, Vocab::build(file.examples), build_candidates(file.examples), 1);
  std::vector<ReaderModel::Prepared> prepared;
  for (const auto& ex : file.examples)
    prepared.push_back(model.prepare(ex, extract_coref(ex, lexicon)));

  Adam adam(1e-3);
  Tape tape;
  Index i = 0;
  for (auto _ : state) {
    const auto& prep = prepared[i++ % prepared.size()];
    tape.reset();
    const auto out = model.forward(tape, prep);
    model.store().zero_grads();
    tape.backward(out.loss);
    clip_gradients(model.store(), 5.0);
    adam.step(model.store());
  }
  state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_EncodeGeneral)->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(BM_EncodeChain)->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(BM_TrainStep);

BENCHMARK_MAIN();

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mage/babi_sim.hpp"
#include "mage/train.hpp"
#include "test_util.hpp"

using namespace mage;
using testutil::random_tensor;

namespace {

// Small generated task-1 dataset shared by the training tests.
struct TinyTask {
  std::string dir;
  TrainConfig cfg;

  TinyTask() {
    dir = std::filesystem::temp_directory_path() / "mage_tiny_task";
    std::filesystem::create_directories(dir);
    StoryGenConfig gen;
    gen.task = 1;
    gen.stories = 30;
    gen.seed = 42;
    std::ofstream(dir + "/train.txt") << generate_babi_stories(gen);
    gen.seed = 43;
    gen.stories = 10;
    std::ofstream(dir + "/test.txt") << generate_babi_stories(gen);

    cfg.model.encoder = EncoderKind::kMage;
    cfg.model.head = HeadKind::kClassify;
    cfg.model.d_emb = 16;
    cfg.model.seq_dim = 12;
    cfg.model.coref_dim = 4;
    cfg.epochs = 2;
    cfg.patience = 5;
    cfg.seed = 7;
    cfg.train_path = dir + "/train.txt";
    cfg.test_path = dir + "/test.txt";
  }
};

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterStore store;
    std::mt19937_64 rng(1);
    Parameter& p = store.create("p", random_tensor({4}, rng));
    const Tensor before = p.value;
    Adam adam(0.1);
    store.zero_grads();
    adam.step(store);
    for (Index i = 0; i < 4; ++i) CHECK(p.value[i] == before[i]);
  }

  SUBCASE("first step with scalar gradient matches the hand computation") {
    // m1 = (1-b1) g, v1 = (1-b2) g^2; with bias correction the update is
    // lr * g / (|g| + eps) exactly on step one.
    ParameterStore store;
    Parameter& p = store.create("p", Tensor::scalar(2.0));
    const double g = 0.37, lr = 0.05, eps = 1e-8;
    p.grad[0] = g;
    Adam adam(lr, 0.9, 0.999, eps);
    adam.step(store);
    const double expect = 2.0 - lr * g / (std::abs(g) + eps);
    CHECK(p.value[0] == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("constant gradient drives steps toward lr * sign(g)") {
    ParameterStore store;
    Parameter& p = store.create("p", Tensor::scalar(0.0));
    Adam adam(0.01);
    double prev = 0.0;
    for (int t = 0; t < 200; ++t) {
      p.grad[0] = -3.0;
      adam.step(store);
      const double delta = p.value[0] - prev;
      prev = p.value[0];
      if (t > 50) CHECK(delta == doctest::Approx(0.01).epsilon(1e-3));  // +lr against negative g
    }
  }
}

TEST_CASE("gradient clipping") {
  ParameterStore store;
  std::mt19937_64 rng(5);
  store.create("a", random_tensor({8}, rng));
  store.create("b", random_tensor({3, 3}, rng));
  for (Index i = 0; i < store.size(); ++i)
    for (Index j = 0; j < store.at(i).grad.size(); ++j) store.at(i).grad[j] = 2.0;

  const double before = store.grad_norm();
  CHECK(before > 5.0);
  clip_gradients(store, 5.0);
  CHECK(std::abs(store.grad_norm() - 5.0) <= 1e-9);

  // under the threshold nothing changes
  const double small = store.grad_norm();
  clip_gradients(store, 50.0);
  CHECK(store.grad_norm() == small);
}

TEST_CASE("load_task splits validation by trailing stories") {
  TinyTask t;
  const auto data = load_task(t.cfg);
  CHECK(data.train.size() + data.valid.size() == 150);  // 30 stories x 5 questions
  CHECK(data.valid.size() == 15);                       // last 3 of 30 stories
  CHECK(data.test.size() == 50);
  CHECK(!data.candidates.empty());
  CHECK(data.lexicon.count("mary"));
}

TEST_CASE("lr = 0 leaves parameters identical after training") {
  TinyTask t;
  t.cfg.lr = 0.0;
  t.cfg.epochs = 1;
  const auto data = load_task(t.cfg);

  ReaderModel probe_model(t.cfg.model, data.vocab, data.candidates, t.cfg.seed);
  std::vector<Tensor> before;
  for (Index i = 0; i < probe_model.store().size(); ++i)
    before.push_back(probe_model.store().at(i).value);

  const auto result = train_run(t.cfg, data);
  (void)result;
  // rebuild the model the same way train_run does; zero lr means the snapshot
  // at epoch 0 equals the initialization
  ReaderModel after(t.cfg.model, data.vocab, data.candidates, t.cfg.seed);
  for (Index i = 0; i < after.store().size(); ++i)
    for (Index j = 0; j < after.store().at(i).value.size(); ++j)
      CHECK(after.store().at(i).value[j] == before[i][j]);
}

TEST_CASE("fixed seed reproduces the run bitwise") {
  TinyTask t;
  const auto data = load_task(t.cfg);
  const RunResult a = train_run(t.cfg, data);
  const RunResult b = train_run(t.cfg, data);
  REQUIRE(a.train_loss.size() == b.train_loss.size());
  for (Index i = 0; i < a.train_loss.size(); ++i) {
    CHECK(a.train_loss[i] == b.train_loss[i]);
    CHECK(a.valid_error[i] == b.valid_error[i]);
  }
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.test_error == b.test_error);
}

TEST_CASE("checkpoint round trip reproduces the validation error bitwise") {
  TinyTask t;
  t.cfg.out_dir = t.dir + "/run";
  const auto data = load_task(t.cfg);
  const RunResult r = train_run(t.cfg, data);

  ReaderModel model(t.cfg.model, data.vocab, data.candidates, t.cfg.seed);
  model.store().load(t.cfg.out_dir + "/model.ckpt");
  const auto valid_prep = prepare_examples(model, data.valid, data.lexicon, t.cfg.link_question);
  const double err1 = evaluate_split(model, valid_prep);
  const double err2 = evaluate_split(model, valid_prep);
  CHECK(err1 == r.best_valid);
  CHECK(err1 == err2);

  // the result record echoes config and outcome
  std::ifstream rec(t.cfg.out_dir + "/result.txt");
  std::string contents((std::istreambuf_iterator<char>(rec)), std::istreambuf_iterator<char>());
  CHECK(contents.find("encoder=mage") != std::string::npos);
  CHECK(contents.find("best_valid=") != std::string::npos);
}

TEST_CASE("multi_seed selects by validation with lowest-seed ties") {
  TinyTask t;
  t.cfg.epochs = 1;
  const auto data = load_task(t.cfg);
  const RunResult one = multi_seed(t.cfg, {7});
  const RunResult solo = train_run(t.cfg, data);
  CHECK(one.best_valid == solo.best_valid);
  CHECK(one.seed == solo.seed);

  const RunResult best = multi_seed(t.cfg, {7, 8});
  const TrainConfig cfg8 = [&] {
    TrainConfig c = t.cfg;
    c.seed = 8;
    return c;
  }();
  const RunResult run8 = train_run(cfg8, data);
  const double expect = std::min(solo.best_valid, run8.best_valid);
  CHECK(best.best_valid == expect);
  if (solo.best_valid == run8.best_valid) CHECK(best.seed == 7);
}

TEST_CASE("encoder variants share the head width contract") {
  TinyTask t;
  t.cfg.epochs = 1;
  const auto data = load_task(t.cfg);
  for (auto enc : {EncoderKind::kBiGru, EncoderKind::kBiGruOneHot, EncoderKind::kMage,
                   EncoderKind::kMageShared}) {
    TrainConfig cfg = t.cfg;
    cfg.model.encoder = enc;
    const bool mage_like = enc == EncoderKind::kMage || enc == EncoderKind::kMageShared;
    if (!mage_like) {
      cfg.model.seq_dim = 16;  // matched capacity: equals mage seq + coref
      cfg.model.coref_dim = 0;
    }
    CHECK(cfg.model.out_width() == 32);
    const auto r = train_run(cfg, data);
    CHECK(r.valid_error.size() == 1);
    CHECK(r.test_error >= 0.0);
    CHECK(r.test_error <= 1.0);
  }
}

TEST_CASE("invalid configs are rejected") {
  TrainConfig cfg;
  cfg.model.encoder = EncoderKind::kBiGru;
  cfg.model.coref_dim = 8;
  CHECK_THROWS_AS(cfg.model.validate(), std::invalid_argument);
  cfg.model.coref_dim = 0;
  cfg.model.layers = 0;
  CHECK_THROWS_AS(cfg.model.validate(), std::invalid_argument);
  cfg.model.layers = 1;
  cfg.model.encoder = EncoderKind::kMage;
  cfg.model.coref_dim = 0;
  CHECK_THROWS_AS(cfg.model.validate(), std::invalid_argument);
}

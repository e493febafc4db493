#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "mage/grad_check.hpp"
#include "mage/params.hpp"
#include "mage/tape.hpp"
#include "mage/verify.hpp"
#include "test_util.hpp"

using namespace mage;
using testutil::random_tensor;

TEST_CASE("tensor shape contracts") {
  Tensor t = Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor::from_matrix(2, 2, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({3, 0}), std::invalid_argument);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(Tensor::from_vector({1, 2}).item(), std::invalid_argument);
}

TEST_CASE("matmul forward") {
  Tape t;
  SUBCASE("identity") {
    const Var eye = t.constant(Tensor::from_matrix(2, 2, {1, 0, 0, 1}));
    const Var a = t.constant(Tensor::from_matrix(2, 2, {1, 2, 3, 4}));
    const Tensor& out = t.value(t.matmul(eye, a));
    const double expect[4] = {1, 2, 3, 4};
    for (Index i = 0; i < 4; ++i) CHECK(out[i] == expect[i]);
  }
  SUBCASE("hand expansion") {
    const Var a = t.constant(Tensor::from_matrix(1, 2, {1, 2}));
    const Var b = t.constant(Tensor::from_matrix(2, 1, {3, 4}));
    CHECK(t.value(t.matmul(a, b)).item() == 11.0);
  }
  SUBCASE("dimension error names both shapes") {
    const Var a = t.constant(Tensor::zeros({2, 3}));
    const Var b = t.constant(Tensor::zeros({2, 3}));
    CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
  }
}

TEST_CASE("matmul gradient matches central differences below 1e-7") {
  std::mt19937_64 rng(11);
  ParameterStore store;
  Parameter& a = store.create("a", random_tensor({3, 4}, rng));
  Parameter& b = store.create("b", random_tensor({4, 2}, rng));
  const auto res = grad_check([&](Tape& t) { return t.sum(t.matmul(t.leaf(a), t.leaf(b))); },
                              {&a, &b}, 1e-5);
  CHECK(res.max_rel_error < 1e-7);
}

TEST_CASE("elementwise op examples") {
  Tape t;
  CHECK(t.value(t.sigmoid(t.constant(Tensor::scalar(0.0)))).item() == 0.5);
  CHECK(t.value(t.tanh(t.constant(Tensor::scalar(0.0)))).item() == 0.0);
  const Var a = t.constant(Tensor::from_vector({1, 2, 3}));
  const Var b = t.constant(Tensor::from_vector({4, 5, 6}));
  CHECK(t.value(t.add(a, b))[2] == 9.0);
  CHECK(t.value(t.hadamard(a, b))[1] == 10.0);
  CHECK(t.value(t.scale(a, 2.5))[2] == 7.5);
  CHECK_THROWS_AS(t.add(a, t.constant(Tensor::from_vector({1, 2}))), std::invalid_argument);
}

TEST_CASE("concat/slice round trip is bitwise exact") {
  std::mt19937_64 rng(3);
  Tape t;
  const Tensor u = random_tensor({3}, rng);
  const Tensor v = random_tensor({2}, rng);
  const Var parts[2] = {t.constant(u), t.constant(v)};
  const Var cat = t.concat(parts, 0);
  CHECK(t.value(cat).size() == 5);
  const Tensor& u2 = t.value(t.slice(cat, 0, 0, 3));
  const Tensor& v2 = t.value(t.slice(cat, 0, 3, 2));
  for (Index i = 0; i < 3; ++i) CHECK(u2[i] == u[i]);
  for (Index i = 0; i < 2; ++i) CHECK(v2[i] == v[i]);

  // rank-2 concat along the column axis round-trips too
  const Tensor m1 = random_tensor({2, 3}, rng), m2 = random_tensor({2, 2}, rng);
  const Var mparts[2] = {t.constant(m1), t.constant(m2)};
  const Var wide = t.concat(mparts, 1);
  const Tensor& m1b = t.value(t.slice(wide, 1, 0, 3));
  for (Index i = 0; i < m1.size(); ++i) CHECK(m1b[i] == m1[i]);

  CHECK_THROWS_AS(t.slice(cat, 0, 3, 4), std::invalid_argument);
}

TEST_CASE("softmax examples and invariants") {
  Tape t;
  SUBCASE("uniform") {
    const Tensor& p = t.value(t.softmax(t.constant(Tensor::from_vector({0, 0}))));
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
  }
  SUBCASE("reference values for [1,2,3]") {
    // independent straight-line scalar evaluation of exp(x_i)/sum
    const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    const double z = e1 + e2 + e3;
    const Tensor& p = t.value(t.softmax(t.constant(Tensor::from_vector({1, 2, 3}))));
    CHECK(p[0] == doctest::Approx(e1 / z).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(e2 / z).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(e3 / z).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.24472847105479767).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.66524095577482190).epsilon(1e-9));
  }
  SUBCASE("max subtraction avoids overflow") {
    const Tensor& p = t.value(t.softmax(t.constant(Tensor::from_vector({1000, 1000}))));
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
  }
  SUBCASE("sums to one and shift invariant within 1e-12") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<Index> n_d(1, 8);
      const Tensor logits = random_tensor({n_d(rng)}, rng, 10.0);
      const Var v = t.constant(logits);
      const Tensor& p = t.value(t.softmax(v));
      double s = 0.0;
      for (Index i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        s += p[i];
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
      const Tensor& q = t.value(t.softmax(t.scale_shift(v, 1.0, 17.25)));
      for (Index i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
  }
}

TEST_CASE("nll_loss examples") {
  Tape t;
  CHECK(t.value(t.nll_loss(t.constant(Tensor::from_vector({1.0, 0.0})), 0)).item() == 0.0);
  CHECK(t.value(t.nll_loss(t.constant(Tensor::from_vector({0.5, 0.5})), 1)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(t.nll_loss(t.constant(Tensor::from_vector({0.5, 0.5})), 2), std::invalid_argument);
  // collapsed entry hits the log floor instead of producing -inf
  const double clamped = t.value(t.nll_loss(t.constant(Tensor::from_vector({1.0, 0.0})), 1)).item();
  CHECK(clamped == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("gradient of nll(softmax(logits)) equals p - onehot") {
  std::mt19937_64 rng(17);
  ParameterStore store;
  Parameter& logits = store.create("logits", random_tensor({5}, rng, 2.0));
  const Index target = 3;

  Tape t;
  const Var p = t.softmax(t.leaf(logits));
  const Var loss = t.nll_loss(p, target);
  t.backward(loss);
  const Tensor soft = t.value(p);

  for (Index i = 0; i < 5; ++i) {
    const double expected = soft[i] - (i == target ? 1.0 : 0.0);
    CHECK(logits.grad[i] == doctest::Approx(expected).epsilon(1e-10));
  }

  const auto fd = grad_check(
      [&](Tape& tt) { return tt.nll_loss(tt.softmax(tt.leaf(logits)), target); }, {&logits}, 1e-5);
  CHECK(fd.max_rel_error < 1e-7);
}

TEST_CASE("backward contracts") {
  ParameterStore store;
  std::mt19937_64 rng(23);
  Parameter& used = store.create("used", random_tensor({4}, rng));
  Parameter& untouched = store.create("untouched", random_tensor({4}, rng));
  untouched.grad.fill(0.25);

  Tape t;
  const Var loss = t.sum(t.sigmoid(t.leaf(used)));
  CHECK_THROWS_AS(t.backward(t.leaf(used)), std::invalid_argument);  // non-scalar
  t.backward(loss);
  for (Index i = 0; i < 4; ++i) CHECK(untouched.grad[i] == 0.25);  // unreachable grads untouched
  double norm = 0.0;
  for (Index i = 0; i < 4; ++i) norm += std::abs(used.grad[i]);
  CHECK(norm > 0.0);
  CHECK(t.all_finite());
}

TEST_CASE("tape node ids are topologically ordered") {
  std::mt19937_64 rng(29);
  ParameterStore store;
  Parameter& a = store.create("a", random_tensor({3, 3}, rng));
  Tape t;
  const Var x = t.leaf(a);
  const Var y = t.matmul(x, x);
  const Var z = t.sum(t.tanh(y));
  CHECK(x.id < y.id);
  CHECK(y.id < z.id);
}

TEST_CASE("two identical forward passes are bitwise identical") {
  std::mt19937_64 rng(31);
  ParameterStore store;
  Parameter& w = store.create("w", random_tensor({6, 6}, rng));
  Parameter& x = store.create("x", random_tensor({6}, rng));
  auto run = [&]() {
    Tape t;
    return t.value(t.softmax(t.matvec(t.leaf(w), t.tanh(t.leaf(x)))));
  };
  const Tensor p1 = run();
  const Tensor p2 = run();
  for (Index i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("grad_check harness") {
  std::mt19937_64 rng(37);
  ParameterStore store;
  SUBCASE("linear model w^T x has closed-form gradient x") {
    Parameter& w = store.create("w", random_tensor({7}, rng));
    const Tensor x = random_tensor({7}, rng);
    const auto res = grad_check(
        [&](Tape& t) { return t.sum(t.hadamard(t.leaf(w), t.constant(x))); }, {&w}, 1e-5);
    CHECK(res.max_rel_error < 1e-9);
  }
  SUBCASE("constant function has exactly zero analytic gradient") {
    Parameter& w = store.create("w2", random_tensor({5}, rng));
    Tape t;
    t.leaf(w);
    const Var c = t.constant(Tensor::scalar(2.0));
    w.grad.set_zero();
    t.backward(c);
    for (Index i = 0; i < w.grad.size(); ++i) CHECK(w.grad[i] == 0.0);
  }
}

TEST_CASE("every primitive op passes the finite-difference property") {
  for (const auto& r : grad_check_primitives(123)) {
    INFO(r.name);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("parameter store contracts") {
  ParameterStore store;
  std::mt19937_64 rng(41);
  Parameter& p = store.create("a.b", random_tensor({2, 3}, rng));
  CHECK(p.grad.shape() == p.value.shape());
  CHECK_THROWS_AS(store.create("a.b", Tensor::zeros({1})), std::invalid_argument);
  CHECK(store.find("a.b") == &p);
  CHECK(store.find("missing") == nullptr);
}

TEST_CASE("checkpoint round trip and loud mismatches") {
  std::mt19937_64 rng(43);
  const std::string path = "test_ckpt.bin";

  ParameterStore store;
  Parameter& a = store.create("w.a", random_tensor({3, 4}, rng));
  Parameter& b = store.create("w.b", random_tensor({5}, rng));
  store.save(path);

  SUBCASE("bitwise round trip") {
    const Tensor va = a.value, vb = b.value;
    a.value.fill(0.0);
    b.value.fill(0.0);
    store.load(path);
    for (Index i = 0; i < va.size(); ++i) CHECK(a.value[i] == va[i]);
    for (Index i = 0; i < vb.size(); ++i) CHECK(b.value[i] == vb[i]);
  }
  SUBCASE("name mismatch fails") {
    ParameterStore other;
    other.create("w.a", Tensor::zeros({3, 4}));
    other.create("w.DIFFERENT", Tensor::zeros({5}));
    CHECK_THROWS_AS(other.load(path), std::runtime_error);
  }
  SUBCASE("shape mismatch fails naming the parameter") {
    ParameterStore other;
    other.create("w.a", Tensor::zeros({4, 3}));
    other.create("w.b", Tensor::zeros({5}));
    CHECK_THROWS_WITH_AS(other.load(path), doctest::Contains("w.a"), std::runtime_error);
  }
  SUBCASE("garbage magic fails") {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOTACKPT", f);
    std::fclose(f);
    CHECK_THROWS_WITH_AS(store.load(path), doctest::Contains("MAGECKPT"), std::runtime_error);
  }
  std::remove(path.c_str());
}

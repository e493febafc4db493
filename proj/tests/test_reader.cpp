#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "mage/reader.hpp"
#include "test_util.hpp"

using namespace mage;
using testutil::random_tensor;

TEST_CASE("attention") {
  Tape t;
  SUBCASE("orthogonal query gives uniform weights") {
    const Var H = t.constant(Tensor::from_matrix(3, 2, {1, 0, 0, 1, -1, 1}));
    const Var q = t.constant(Tensor::from_vector({0, 0}));
    const Tensor& a = t.value(attention(t, q, H));
    for (Index i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("single-row document") {
    const Var H = t.constant(Tensor::from_matrix(1, 3, {2, -1, 4}));
    const Var q = t.constant(Tensor::from_vector({1, 1, 1}));
    const Tensor& a = t.value(attention(t, q, H));
    REQUIRE(a.size() == 1);
    CHECK(a[0] == 1.0);
  }
  SUBCASE("matches a direct softmax of the score vector") {
    std::mt19937_64 rng(5);
    const Tensor H = random_tensor({4, 3}, rng);
    const Tensor q = random_tensor({3}, rng);
    const Tensor& a = t.value(attention(t, t.constant(q), t.constant(H)));

    // independent straight-line scores -> softmax
    std::vector<double> s(4, 0.0);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j) s[i] += q[j] * H.at(i, j);
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : s) {
      v = std::exp(v - mx);
      z += v;
    }
    double total = 0.0;
    for (Index i = 0; i < 4; ++i) {
      CHECK(a[i] == doctest::Approx(s[i] / z).epsilon(1e-14));
      CHECK(a[i] > 0.0);
      total += a[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  SUBCASE("width mismatch throws") {
    const Var H = t.constant(Tensor::zeros({3, 2}));
    const Var q = t.constant(Tensor::zeros({3}));
    CHECK_THROWS_AS(attention(t, q, H), std::invalid_argument);
  }
  SUBCASE("invariant to a constant added to all scores") {
    std::mt19937_64 rng(8);
    const Tensor H = random_tensor({5, 3}, rng);
    const Tensor q = random_tensor({3}, rng);
    Tape t2;
    const Var scores = t2.matvec(t2.constant(H), t2.constant(q));
    const Tensor& a = t2.value(t2.softmax(scores));
    const Tensor& b = t2.value(t2.softmax(t2.scale_shift(scores, 1.0, 123.456)));
    for (Index i = 0; i < 5; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("answer_extractive") {
  SUBCASE("token at the argmax position") {
    const Tensor alpha = Tensor::from_vector({0.1, 0.7, 0.2});
    CHECK(answer_extractive(alpha, {5, 9, 5}, 9) == 0.7);
  }
  SUBCASE("hand sum over occurrences") {
    const Tensor alpha = Tensor::from_vector({0.1, 0.2, 0.3, 0.4});
    CHECK(answer_extractive(alpha, {7, 3, 8, 3}, 3) == doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("absent token scores zero") {
    const Tensor alpha = Tensor::from_vector({0.5, 0.5});
    CHECK(answer_extractive(alpha, {1, 2}, 99) == 0.0);
  }
  SUBCASE("distribution over distinct tokens sums to one") {
    std::mt19937_64 rng(11);
    Tape t;
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<Index> n_d(1, 12);
      const Index n = n_d(rng);
      const Tensor alpha = t.value(t.softmax(t.constant(random_tensor({n}, rng, 3.0))));
      std::uniform_int_distribution<std::int32_t> tok_d(0, 4);
      std::vector<std::int32_t> token_map(n);
      for (auto& v : token_map) v = tok_d(rng);

      std::set<std::int32_t> distinct(token_map.begin(), token_map.end());
      double total = 0.0;
      for (auto w : distinct) total += answer_extractive(alpha, token_map, w);
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("extractive_distribution matches per-token sums") {
  std::mt19937_64 rng(13);
  Tape t;
  const Tensor alpha = t.value(t.softmax(t.constant(random_tensor({6}, rng))));
  const std::vector<std::int32_t> groups = {0, 1, 0, 2, 1, 0};
  const Var dist = extractive_distribution(t, t.constant(alpha), groups, 3);
  const Tensor& p = t.value(dist);
  CHECK(p[0] == doctest::Approx(alpha[0] + alpha[2] + alpha[5]).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(alpha[1] + alpha[4]).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(alpha[3]).epsilon(1e-15));
}

TEST_CASE("answer_classify") {
  Tape t;
  SUBCASE("one-hot attention picks the row") {
    const Tensor H = Tensor::from_matrix(3, 2, {1, 2, 3, 4, 5, 6});
    const Var alpha = t.constant(Tensor::from_vector({0, 1, 0}));
    const Var h_d = t.vecmat(alpha, t.constant(H));
    CHECK(t.value(h_d)[0] == 3.0);
    CHECK(t.value(h_d)[1] == 4.0);
  }
  SUBCASE("identical candidate columns give a uniform distribution") {
    std::mt19937_64 rng(17);
    const Tensor H = random_tensor({4, 3}, rng);
    const Tensor alpha = t.value(t.softmax(t.constant(random_tensor({4}, rng))));
    Tensor wc = Tensor::zeros({3, 5});
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 5; ++c) wc.at(r, c) = 0.3 * static_cast<double>(r);
    const Var p = answer_classify(t, t.constant(alpha), t.constant(H), t.constant(wc));
    for (Index c = 0; c < 5; ++c) CHECK(t.value(p)[c] == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("matches composing the documented steps independently") {
    std::mt19937_64 rng(19);
    const Tensor H = random_tensor({5, 4}, rng);
    const Tensor wc = random_tensor({4, 3}, rng);
    const Tensor alpha = t.value(t.softmax(t.constant(random_tensor({5}, rng))));
    const Var p = answer_classify(t, t.constant(alpha), t.constant(H), t.constant(wc));

    std::vector<double> h_d(4, 0.0);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 4; ++j) h_d[j] += alpha[i] * H.at(i, j);
    std::vector<double> logits(3, 0.0);
    for (Index j = 0; j < 4; ++j)
      for (Index c = 0; c < 3; ++c) logits[c] += h_d[j] * wc.at(j, c);
    double mx = std::max({logits[0], logits[1], logits[2]});
    double z = 0.0;
    for (double& v : logits) {
      v = std::exp(v - mx);
      z += v;
    }
    for (Index c = 0; c < 3; ++c)
      CHECK(t.value(p)[c] == doctest::Approx(logits[c] / z).epsilon(1e-13));
  }
}

TEST_CASE("argmax tie-break is the lowest index") {
  CHECK(argmax_lowest(Tensor::from_vector({0.2, 0.5, 0.5, 0.1})) == 1);
  CHECK(argmax_lowest(Tensor::from_vector({0.5, 0.5})) == 0);
  CHECK(argmax_lowest(Tensor::from_vector({1.0})) == 0);
}

TEST_CASE("append_onehot") {
  Tape t;
  OneHotFeatures feats;
  feats.n_chains = 5;
  feats.chain_of_pos = {-1, 2, 2, 11};

  const Var emb = t.constant(Tensor::from_vector({1, 2, 3}));
  SUBCASE("token in no chain gets zero padding") {
    const Tensor& v = t.value(append_onehot(t, emb, feats, 0, 5));
    REQUIRE(v.size() == 8);
    for (Index i = 3; i < 8; ++i) CHECK(v[i] == 0.0);
  }
  SUBCASE("chain 2 of 5 sets bit 2") {
    const Tensor& v = t.value(append_onehot(t, emb, feats, 1, 5));
    CHECK(v[3 + 2] == 1.0);
    double nonzero = 0;
    for (Index i = 3; i < 8; ++i) nonzero += v[i];
    CHECK(nonzero == 1.0);
  }
  SUBCASE("same chain, identical suffixes") {
    const Tensor& a = t.value(append_onehot(t, emb, feats, 1, 5));
    const Tensor& b = t.value(append_onehot(t, emb, feats, 2, 5));
    for (Index i = 3; i < 8; ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("chain beyond the cap maps to zero and counts") {
    Index overflow = 0;
    const Tensor& v = t.value(append_onehot(t, emb, feats, 3, 5, &overflow));
    for (Index i = 3; i < 8; ++i) CHECK(v[i] == 0.0);
    CHECK(overflow == 1);
  }
}

TEST_CASE("sentence_probe") {
  std::mt19937_64 rng(23);
  const Tensor H = random_tensor({6, 4}, rng);
  const Tensor wc = random_tensor({4, 3}, rng);

  SUBCASE("rows sum to one") {
    const auto rows = sentence_probe(H, {1, 3, 5}, wc);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      double s = 0.0;
      for (double v : r) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("one boundary equals classify with one-hot attention there") {
    Tape t;
    const auto rows = sentence_probe(H, {4}, wc);
    Tensor onehot = Tensor::zeros({6});
    onehot[4] = 1.0;
    const Var p = answer_classify(t, t.constant(onehot), t.constant(H), t.constant(wc));
    for (Index c = 0; c < 3; ++c) CHECK(rows[0][c] == doctest::Approx(t.value(p)[c]).epsilon(1e-13));
  }
  SUBCASE("boundary out of range") {
    CHECK_THROWS_AS(sentence_probe(H, {6}, wc), std::invalid_argument);
  }
  SUBCASE("formatting uses four decimals and tabs") {
    const auto rows = sentence_probe(H, {0}, wc);
    const std::string table = format_probe_table(rows, {"a", "b", "c"});
    CHECK(table.find("sentence\ta\tb\tc\n") == 0);
    CHECK(table.find('.') != std::string::npos);
  }
}

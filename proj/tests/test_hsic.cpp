#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hsicx/design.hpp"
#include "hsicx/error.hpp"
#include "hsicx/hsic.hpp"
#include "oracles.hpp"

using namespace hsicx;

namespace {

oracle::Mat to_oracle(const Matrix& m) {
  oracle::Mat out = oracle::zeros(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) out[a][b] = m(a, b);
  return out;
}

Matrix random_symmetric(int p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b <= a; ++b) m(a, b) = m(b, a) = n(rng);
  return m;
}

// Outputs of a model evaluated on every design row.
template <typename F>
Outputs evaluate(const MaskDesign& design, F f) {
  Outputs y(static_cast<Eigen::Index>(design.samples()), 1);
  for (std::size_t a = 0; a < design.samples(); ++a) y(static_cast<Eigen::Index>(a), 0) = f(design.row(a));
  return y;
}

std::vector<std::vector<int>> rows_of(const MaskDesign& design) {
  std::vector<std::vector<int>> rows;
  for (std::size_t a = 0; a < design.samples(); ++a) {
    const auto r = design.row(a);
    rows.emplace_back(r.begin(), r.end());
  }
  return rows;
}

std::vector<double> values_of(const Outputs& y) { return {y.data(), y.data() + y.size()}; }

const RbfKernel kMedian{};

}  // namespace

TEST_CASE("hsic_estimate trivial values") {
  const Matrix ones = Matrix::Ones(5, 5);
  std::mt19937_64 rng(1);
  const Matrix r = random_symmetric(5, rng);
  CHECK(std::abs(hsic_estimate(ones, r)) < 1e-15);
  CHECK(std::abs(hsic_estimate(r, ones)) < 1e-15);
  Matrix h(2, 2);
  h << 0.5, -0.5, -0.5, 0.5;
  CHECK(hsic_estimate(h, h) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(hsic_estimate(Matrix::Ones(3, 3), Matrix::Ones(4, 4)), InvalidArgument);
  CHECK_THROWS_AS(hsic_estimate(Matrix::Ones(1, 1), Matrix::Ones(1, 1)), InvalidArgument);
}

TEST_CASE("hsic_estimate matches the naive expansion") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 2 + trial * 2;
    const Matrix k = random_symmetric(p, rng), l = random_symmetric(p, rng);
    const double want = oracle::hsic(to_oracle(k), to_oracle(l));
    CHECK(oracle::relative_error(hsic_estimate(k, l), want) < 1e-12);
  }
}

TEST_CASE("shift and scale behaviour of hsic_estimate") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 3 + trial;
    const Matrix k = random_symmetric(p, rng), l = random_symmetric(p, rng);
    const double base = hsic_estimate(k, l), c = u(rng), alpha = u(rng);
    const Matrix j = Matrix::Ones(p, p);
    CHECK(oracle::relative_error(hsic_estimate(k + c * j, l), base) < 1e-12);
    CHECK(oracle::relative_error(hsic_estimate(k, l + c * j), base) < 1e-12);
    CHECK(oracle::relative_error(hsic_estimate(alpha * k, l), alpha * base) < 1e-12);
  }
}

TEST_CASE("attribute: y = M_1 on the exhaustive d=3 design") {
  const auto design = exhaustive_design(3);
  const auto y = evaluate(design, [](auto r) { return double(r[0]); });
  const auto result = attribute(design, y, kMedian);
  REQUIRE(result.scores.size() == 3);
  CHECK(result.scores[0] > 0.0);
  CHECK(std::abs(result.scores[1]) < 1e-12);
  CHECK(std::abs(result.scores[2]) < 1e-12);
  const auto rows = rows_of(design);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(result.scores[i] - oracle::patch_score(rows, i, values_of(y))) < 1e-12);
}

TEST_CASE("attribute matches the brute-force estimator on random data") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t p : {2u, 5u, 17u, 64u, 130u}) {
    const auto design = sample_lhs_masks(p, 4, p);
    Outputs y(static_cast<Eigen::Index>(p), 1);
    for (Eigen::Index a = 0; a < y.rows(); ++a) y(a, 0) = n(rng) + 2.0 * design.at(a, 1);
    const auto result = attribute(design, y, kMedian);
    const auto rows = rows_of(design);
    for (std::size_t i = 0; i < 4; ++i) {
      const double want = oracle::patch_score(rows, i, values_of(y));
      CHECK(std::abs(result.scores[i] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("attribute handles vector outputs and fixed bandwidths") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto design = sample_lhs_masks(40, 3, 2);
  Outputs y(40, 3);
  for (Eigen::Index a = 0; a < y.size(); ++a) y.data()[a] = n(rng);
  for (const RbfKernel kernel : {RbfKernel{}, RbfKernel{0.7, BandwidthRule::PairwiseMedian}}) {
    const auto result = attribute(design, y, kernel);
    const double sigma = kernel.bandwidth ? *kernel.bandwidth : *median_bandwidth(y);
    const Matrix l = gram_rbf(y, sigma).entries;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto col = design.column(i);
      const double want = oracle::hsic(to_oracle(gram_dirac_centered(col).entries), to_oracle(l));
      CHECK(std::abs(result.scores[i] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("attribute: constant outputs give zero scores and a warning") {
  const auto design = sample_lhs_masks(32, 5, 1);
  const auto result = attribute(design, Outputs::Constant(32, 1, 3.0), kMedian);
  for (double s : result.scores) CHECK(s == 0.0);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0] == kZeroSpreadWarning);
}

TEST_CASE("attribute: shape checks and d=49") {
  const auto design = sample_lhs_masks(64, 49, 1);
  CHECK_THROWS_AS(attribute(design, Outputs::Zero(63, 1), kMedian), InvalidArgument);
  std::mt19937_64 rng(2);
  Outputs y(64, 1);
  for (Eigen::Index a = 0; a < 64; ++a) y(a, 0) = double(rng() % 100);
  const auto result = attribute(design, y, kMedian);
  CHECK(result.scores.size() == 49);
  for (double s : result.scores) CHECK(std::isfinite(s));
  CHECK_THROWS_AS(attribute(sample_lhs_masks(1, 3, 0), Outputs::Zero(1, 1), kMedian), InvalidArgument);
}

TEST_CASE("attribute is independent of the worker count") {
  const auto design = sample_lhs_masks(700, 12, 5);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  Outputs y(700, 2);
  for (Eigen::Index a = 0; a < y.size(); ++a) y.data()[a] = n(rng);
  const auto one = attribute(design, y, kMedian, 1).scores;
  for (std::size_t w : {2u, 3u, 8u}) CHECK(attribute(design, y, kMedian, w).scores == one);
}

TEST_CASE("hsic_subset") {
  const auto design = exhaustive_design(3);
  const auto y = evaluate(design, [](auto r) { return double(r[0] ^ r[1]) + 0.25 * r[2]; });
  const auto scores = attribute(design, y, kMedian).scores;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<std::size_t> single{i};
    CHECK(std::abs(hsic_subset(design, y, single, kMedian) - scores[i]) < 1e-12);
  }
  const std::vector<std::size_t> pair{0, 1};
  CHECK(hsic_subset(design, y, pair, kMedian) > 1e-3);

  const std::vector<std::size_t> all{0, 1, 2};
  CHECK(std::abs(hsic_subset(design, Outputs::Constant(8, 1, 1.0), all, kMedian)) == 0.0);

  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(hsic_subset(design, y, bad, kMedian), InvalidArgument);
  CHECK_THROWS_AS(hsic_subset(design, y, {}, kMedian), InvalidArgument);
}

TEST_CASE("pair kernel splits into main effects plus the product term") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto design = sample_lhs_masks(48, 4, 3);
  Outputs y(48, 1);
  for (Eigen::Index a = 0; a < 48; ++a) y(a, 0) = n(rng) + design.at(a, 0) * design.at(a, 2);
  const auto rows = rows_of(design);
  std::vector<std::vector<double>> yy;
  for (double v : values_of(y)) yy.push_back({v});
  const auto l = oracle::rbf_gram(yy, oracle::median_distance(yy));
  for (auto [i, j] : {std::pair{0u, 2u}, std::pair{1u, 3u}}) {
    std::vector<int> ci, cj;
    for (const auto& r : rows) {
      ci.push_back(r[i]);
      cj.push_back(r[j]);
    }
    const auto ki = oracle::dirac_gram(ci), kj = oracle::dirac_gram(cj);
    auto kij = ki;
    for (std::size_t a = 0; a < kij.size(); ++a)
      for (std::size_t b = 0; b < kij.size(); ++b) kij[a][b] *= kj[a][b];
    const double pieces = oracle::hsic(ki, l) + oracle::hsic(kj, l) + oracle::hsic(kij, l);
    const std::vector<std::size_t> subset{i, j};
    const double whole = hsic_subset(design, y, subset, kMedian);
    CHECK(std::abs(whole - pieces) <= 1e-12 * std::max(1.0, std::abs(pieces)));
    CHECK(std::abs(whole - oracle::hsic(oracle::anova_gram(rows, {i, j}), l)) < 1e-12);
  }
}

TEST_CASE("interaction: xor is a pure interaction") {
  const auto design = exhaustive_design(2);
  const auto y = evaluate(design, [](auto r) { return double(r[0] ^ r[1]); });
  const auto scores = attribute(design, y, kMedian).scores;
  CHECK(std::abs(scores[0]) <= 1e-10);
  CHECK(std::abs(scores[1]) <= 1e-10);
  CHECK(interaction(design, y, 0, 1, kMedian) > 0.0);
  CHECK_THROWS_AS(interaction(design, y, 1, 1, kMedian), InvalidArgument);
  CHECK_THROWS_AS(interaction(design, y, 0, 2, kMedian), InvalidArgument);
}

TEST_CASE("interaction: no interaction when y depends on one patch") {
  const auto design = exhaustive_design(2);
  const auto y = evaluate(design, [](auto r) { return 3.0 * r[0]; });
  CHECK(std::abs(interaction(design, y, 0, 1, kMedian)) <= 1e-10);
}

TEST_CASE("interaction is subset minus both marginals") {
  const auto design = exhaustive_design(3);
  const auto y = evaluate(design, [](auto r) { return double(r[0] ^ r[1]) + 0.5 * r[2] + 0.1 * r[0] * r[2]; });
  const auto scores = attribute(design, y, kMedian).scores;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      const std::vector<std::size_t> subset{i, j};
      const double whole = hsic_subset(design, y, subset, kMedian);
      CHECK(std::abs(whole - (scores[i] + scores[j] + interaction(design, y, i, j, kMedian))) < 1e-12);
    }
}

TEST_CASE("interaction matrix: consistency, symmetry and counting") {
  const auto d2 = exhaustive_design(2);
  const auto y2 = evaluate(d2, [](auto r) { return double(r[0] ^ r[1]); });
  const auto m2 = interaction_matrix(d2, y2, kMedian);
  REQUIRE(m2.pairs.size() == 1);
  CHECK(std::abs(m2.entries(0, 1) - interaction(d2, y2, 0, 1, kMedian)) < 1e-12);

  // y = M_1 + M_2: patch 3 interacts with nothing. The (1,2) entry is not 0
  // under the RBF output kernel; it must match the brute-force value.
  const auto d3 = exhaustive_design(3);
  const auto add = evaluate(d3, [](auto r) { return double(r[0] + r[1]); });
  const auto madd = interaction_matrix(d3, add, kMedian);
  CHECK(std::abs(madd.entries(0, 2)) <= 1e-10);
  CHECK(std::abs(madd.entries(1, 2)) <= 1e-10);
  {
    const auto rows = rows_of(d3);
    std::vector<std::vector<double>> yy;
    for (double v : values_of(add)) yy.push_back({v});
    const auto l = oracle::rbf_gram(yy, oracle::median_distance(yy));
    const double pair = oracle::hsic(oracle::anova_gram(rows, {0, 1}), l);
    const double want = pair - oracle::patch_score(rows, 0, values_of(add)) - oracle::patch_score(rows, 1, values_of(add));
    CHECK(std::abs(madd.entries(0, 1) - want) < 1e-12);
    CHECK(madd.entries(0, 1) > 0.02);
  }

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto design = sample_lhs_masks(96, 7, 4);
  Outputs y(96, 1);
  for (Eigen::Index a = 0; a < 96; ++a) y(a, 0) = n(rng) + 2.0 * (design.at(a, 1) ^ design.at(a, 5));
  const auto m = interaction_matrix(design, y, kMedian);
  CHECK(m.pairs.size() == 21);
  CHECK((m.entries - m.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.entries.diagonal().isZero(0.0));
  for (auto [i, j] : m.pairs) {
    const double want = interaction(design, y, i, j, kMedian);
    CHECK(std::abs(m.entries(i, j) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
  const auto top = top_interactions(m, 1, 0.0);
  REQUIRE(top.size() == 1);
  CHECK(top[0].i == 1);
  CHECK(top[0].j == 5);
  CHECK(interaction_matrix(design, y, kMedian, nullptr, 4).entries == m.entries);

  const std::vector<std::pair<std::size_t, std::size_t>> candidates{{2, 0}, {3, 4}};
  const auto sub = interaction_matrix(design, y, kMedian, &candidates);
  CHECK(sub.pairs.size() == 2);
  CHECK(sub.entries(0, 2) == m.entries(0, 2));
  CHECK(sub.entries(1, 2) == 0.0);

  CHECK(interaction_matrix(sample_lhs_masks(8, 49, 1), Outputs::Constant(8, 1, 1.0), kMedian).pairs.size() == 1176);
}

TEST_CASE("top interactions: order, ties and threshold") {
  InteractionMatrix m;
  m.entries = Matrix::Zero(4, 4);
  auto set = [&](std::size_t i, std::size_t j, double v) {
    m.entries(i, j) = m.entries(j, i) = v;
    m.pairs.emplace_back(i, j);
  };
  set(0, 1, 0.5);
  set(0, 2, 0.9);
  set(1, 3, 0.5);
  set(2, 3, -0.1);
  set(0, 3, 0.5);
  const auto all = top_interactions(m, 0);
  REQUIRE(all.size() == 5);
  CHECK(all[0].value == 0.9);
  CHECK((all[1].i == 0 && all[1].j == 1));
  CHECK((all[2].i == 0 && all[2].j == 3));
  CHECK((all[3].i == 1 && all[3].j == 3));
  CHECK(top_interactions(m, 0, 0.0).size() == 4);
  CHECK(top_interactions(m, 2, 0.0).size() == 2);
  CHECK(top_interactions(m, 0, 0.6).size() == 1);
}

TEST_CASE("scores of masks independent of the outputs shrink as p grows") {
  std::vector<double> medians;
  for (std::size_t p : {64u, 256u, 1024u, 4096u}) {
    std::vector<double> values;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto design = sample_lhs_masks(p, 1, seed);
      std::mt19937_64 rng(seed + 1000);
      std::normal_distribution<double> n(0.0, 1.0);
      Outputs y(static_cast<Eigen::Index>(p), 1);
      for (Eigen::Index a = 0; a < y.rows(); ++a) y(a, 0) = n(rng);
      values.push_back(std::abs(attribute(design, y, kMedian).scores[0]));
    }
    std::nth_element(values.begin(), values.begin() + 10, values.end());
    medians.push_back(values[10]);
  }
  for (std::size_t k = 1; k < medians.size(); ++k) CHECK(medians[k] < medians[k - 1]);
}

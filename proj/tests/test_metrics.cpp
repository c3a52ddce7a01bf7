#include <catch_amalgamated.hpp>

#include <random>

#include "argue/metrics.hpp"
#include "oracles.hpp"

using namespace argue;
using Catch::Approx;

namespace {

// Scores drawn from a small grid so ties are common.
void random_instance(std::mt19937_64& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
  std::uniform_int_distribution<int> grid(0, 20);
  s.assign(n, 0);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = grid(rng) / 20.0;
    y[i] = std::bernoulli_distribution(0.3)(rng);
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace

TEST_CASE("AUC and AP agree with the brute-force definitions") {
  std::mt19937_64 rng(11);
  std::vector<double> s;
  std::vector<int> y;
  for (int t = 0; t < 200; ++t) {
    random_instance(rng, s, y);
    CHECK(std::abs(roc_auc(s, y) - oracle::auc_pairs(s, y)) <= 1e-12);
    CHECK(std::abs(average_precision(s, y) - oracle::ap_sweep(s, y)) <= 1e-12);
  }
}

TEST_CASE("metric reference points") {
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
  CHECK(average_precision(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y) == 0.0);
  CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
  // All tied: a single threshold flags everything, precision = base rate.
  CHECK(average_precision(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
  // One anomaly ranked second of three: precision 1/2 at recall 1.
  CHECK(average_precision(std::vector<double>{0.9, 0.5, 0.1}, std::vector<int>{0, 1, 0}) == 0.5);
  const auto e = evaluate(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y);
  CHECK(e.n_normal == 2);
  CHECK(e.n_anomalous == 2);
}

TEST_CASE("metric input errors") {
  const std::vector<double> s{0.1, 0.2};
  CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 1}), MetricError);
  CHECK_THROWS_AS(average_precision(s, std::vector<int>{0, 0}), MetricError);
  CHECK_THROWS_AS(roc_auc(s, std::vector<int>{0, 1, 0}), ShapeError);
}

TEST_CASE("exact Wilcoxon matches sign enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> grid(-4, 6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<double> a(n), b(n, 0.0);
    for (double& v : a) v = grid(rng) * 0.25;
    const auto got = wilcoxon_signed_rank(a, b);
    const auto want = oracle::wilcoxon_enumerate(a, b);
    CHECK(got.n_eff == want.n_eff);
    CHECK(got.w_plus == want.w_plus);
    CHECK(std::abs(got.p_value - want.p_value) <= 1e-12);
    if (got.n_eff > 0) CHECK(got.exact);
  }
}

TEST_CASE("Wilcoxon reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5}, zero(5, 0.0);
  const auto r = wilcoxon_signed_rank(a, zero);
  CHECK(r.p_value == Approx(0.0625).epsilon(1e-12));
  CHECK(r.w_plus == 15.0);
  // Identical inputs: nothing to test.
  const auto same = wilcoxon_signed_rank(a, a);
  CHECK(same.n_eff == 0);
  CHECK(same.p_value == 1.0);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("Wilcoxon normal approximation matches reference statistics software") {
  // Reference p-values: two-sided normal approximation with tie and
  // continuity correction, computed with scipy.stats.wilcoxon.
  const std::vector<double> d{0.7, -1.2, 2.5, 3.1, -0.4, 1.9, 2.2, -0.8, 1.1, 0.3,
                              2.8, -1.5, 0.9, 1.6, 2.0, -0.2, 1.3, 0.6, 2.4, 1.0};
  const std::vector<double> zero(d.size(), 0.0);
  const auto r = wilcoxon_signed_rank(d, zero);
  CHECK_FALSE(r.exact);
  CHECK(r.w_plus == 178.0);
  CHECK(r.p_value == Approx(0.006797230872264168).epsilon(1e-9));

  const std::vector<double> tied{1, 1, 1, -1, 2, 2, -2, 3, 3, 3, 3, -3, 4, 4, 5, -5, 6, 6, 7, 8};
  const auto t = wilcoxon_signed_rank(tied, zero);
  CHECK(t.w_plus == 176.0);
  CHECK(t.p_value == Approx(0.008278935873049363).epsilon(1e-9));
}

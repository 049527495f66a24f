#include <doctest.h>

#include <cmath>

#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "nglare/error.hpp"
#include "nglare/stats.hpp"

using namespace nglare;

TEST_CASE("kendall tau-b small example") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{1, 3, 2, 4};
  CHECK(kendall_tau_b(a, b) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(kendall_tau_b(a, b) - 0.6667) < 1e-4);
}

TEST_CASE("kendall, spearman and pearson match definitional oracles") {
  gen::Gen g(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = g.size(3, 12);
    const int distinct = trial % 3 == 0 ? 4 : 0;  // every third case has ties
    auto a = g.values(n, distinct);
    auto b = g.values(n, distinct);
    if (oracle::ranks(a) == std::vector<double>(n, (n + 1) / 2.0) || oracle::ranks(b) == std::vector<double>(n, (n + 1) / 2.0))
      continue;
    CHECK(std::abs(kendall_tau_b(a, b) - oracle::kendall_tau_b(a, b)) < 1e-12);
    CHECK(std::abs(spearman_rho(a, b) - oracle::spearman(a, b)) < 1e-12);
    CHECK(std::abs(pearson_r(a, b) - oracle::pearson(a, b)) < 1e-12);
  }
}

TEST_CASE("exact kendall p-value equals full permutation enumeration") {
  gen::Gen g(5);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = g.size(4, 8);
    const auto a = g.values(n, trial % 2 ? 3 : 0);
    const auto b = g.values(n, trial % 2 ? 3 : 0);
    if (oracle::ranks(a) == std::vector<double>(n, (n + 1) / 2.0) || oracle::ranks(b) == std::vector<double>(n, (n + 1) / 2.0))
      continue;
    const auto t = kendall_test(a, b);
    CHECK(t.exact);
    CHECK(t.p_value == doctest::Approx(oracle::kendall_permutation_p(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("kendall test on a perfect ranking of ten") {
  std::vector<double> a(10);
  for (int i = 0; i < 10; ++i) a[i] = i;
  const auto t = kendall_test(a, a);
  CHECK(t.tau == 1.0);
  // Only the identity and the reversal reach |S| = 45.
  CHECK(t.p_value == doctest::Approx(2.0 / 3628800.0));
}

TEST_CASE("large-n kendall uses the normal approximation") {
  gen::Gen g(3);
  const auto a = g.values(40);
  auto b = a;
  for (auto& v : b) v += 0.3 * g.normal();
  const auto t = kendall_test(a, b);
  CHECK_FALSE(t.exact);
  CHECK(t.tau > 0.5);
  CHECK(t.p_value < 1e-6);
}

TEST_CASE("mid ranks average ties") {
  const std::vector<double> v{10, 20, 20, 5};
  CHECK(mid_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("statistics error paths") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> flat{2, 2, 2};
  CHECK_THROWS_AS(kendall_tau_b(a, flat), UndefinedMetricError);
  CHECK_THROWS_AS(pearson_r(a, flat), UndefinedMetricError);
  CHECK_THROWS_AS(pearson_r(a, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), DataError);
  CHECK_THROWS_AS(pearson_r(a, std::vector<double>{1, NAN, 2}), DataError);
}

TEST_CASE("compare_rankings on identical scores") {
  const std::vector<double> a{0.3, 0.1, 0.9, 0.5};
  const auto r = compare_rankings(a, a);
  CHECK(r.kendall_tau == 1.0);
  CHECK(r.spearman_rho == 1.0);
  CHECK(r.pearson_r == doctest::Approx(1.0));
  CHECK(r.n == 4);
}

TEST_CASE("lag analysis finds a known shift") {
  gen::Gen g(17);
  const std::size_t n = 60;
  const auto base = g.values(n + 3);
  std::vector<double> x(n);
  std::vector<double> y(n);
  // x[t] = base[t + 3], y[t] = base[t]: x leads y by three steps.
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = base[t + 3];
    y[t] = base[t];
  }
  const auto lag = lag_analysis(x, y, 5);
  CHECK(lag.best_lag == -3);
  CHECK(*lag.at(-3) == doctest::Approx(1.0));
  CHECK(lag.lags.size() == 11);
  CHECK(lag_analysis(y, x, 5).best_lag == 3);
}

TEST_CASE("lag analysis ties resolve to the smallest shift") {
  // Period-2 series: every even lag correlates perfectly.
  std::vector<double> x;
  for (int t = 0; t < 20; ++t) x.push_back(t % 2 ? 1.0 : -1.0);
  const auto lag = lag_analysis(x, x, 4);
  CHECK(lag.best_lag == 0);
}

TEST_CASE("lag analysis validates inputs") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK_THROWS_AS(lag_analysis(x, x, 2), DataError);
  CHECK_THROWS_AS(lag_analysis(x, x, -1), ConfigError);
  CHECK_THROWS_AS(lag_analysis(x, std::vector<double>{1, 2, 3}, 1), DataError);
  const std::vector<double> flat(6, 1.0);
  CHECK_THROWS_AS(lag_analysis(flat, flat, 1), UndefinedMetricError);
}

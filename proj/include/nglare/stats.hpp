#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace nglare {

// Tie-corrected Kendall tau-b. Throws UndefinedMetricError when either input is all ties.
double kendall_tau_b(std::span<const double> a, std::span<const double> b);

struct KendallTest {
  double tau = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
  bool exact = false;  // exact permutation distribution (n <= 10) vs normal approximation
};

KendallTest kendall_test(std::span<const double> a, std::span<const double> b);

double pearson_r(std::span<const double> a, std::span<const double> b);

// Average ranks for ties, 1-based.
std::vector<double> mid_ranks(std::span<const double> v);

double spearman_rho(std::span<const double> a, std::span<const double> b);

struct RankingComparison {
  double kendall_tau = 0.0;
  double spearman_rho = 0.0;
  double pearson_r = 0.0;
  double p_value_tau = 1.0;
  std::size_t n = 0;
};

RankingComparison compare_rankings(std::span<const double> a, std::span<const double> b);

struct LagAnalysis {
  int best_lag = 0;
  std::vector<int> lags;
  // Empty where an overlapping segment has zero variance.
  std::vector<std::optional<double>> correlations;
  std::size_t zero_variance_lags = 0;

  std::optional<double> at(int lag) const;
};

// Correlation of x[t] with y[t - lag] for lag in [-max_lag, max_lag]. A negative best
// lag means x leads y. Ties in |corr| go to the smallest |lag|.
LagAnalysis lag_analysis(std::span<const double> x, std::span<const double> y, int max_lag);

}  // namespace nglare

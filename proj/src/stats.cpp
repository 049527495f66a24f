#include "nglare/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nglare/error.hpp"

namespace nglare {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_n = 2) {
  if (a.size() != b.size())
    throw DataError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < min_n) throw DataError("need at least " + std::to_string(min_n) + " paired values");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw DataError("non-finite value at position " + std::to_string(i));
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

struct PairCounts {
  long long s = 0;         // concordant - discordant
  long long ties_a = 0;    // pairs tied in a
  long long ties_b = 0;    // pairs tied in b
};

PairCounts count_pairs(std::span<const double> a, std::span<const double> b) {
  PairCounts c;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sa = sign(a[j] - a[i]);
      const int sb = sign(b[j] - b[i]);
      if (sa == 0) ++c.ties_a;
      if (sb == 0) ++c.ties_b;
      c.s += sa * sb;
    }
  return c;
}

// Sizes of tie groups.
std::vector<long long> tie_groups(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<long long> groups;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > 1) groups.push_back(static_cast<long long>(j - i));
    i = j;
  }
  return groups;
}

// Two-sided exact p-value for S = C - D under random permutation of b.
double exact_p_value(std::span<const double> a, std::span<const double> b, long long s_obs) {
  const std::size_t n = a.size();
  const bool no_ties = tie_groups(a).empty() && tie_groups(b).empty();
  if (no_ties) {
    // Mahonian numbers: permutations of n elements by inversion count.
    const std::size_t max_inv = n * (n - 1) / 2;
    std::vector<double> f(max_inv + 1, 0.0);
    f[0] = 1.0;
    for (std::size_t m = 2; m <= n; ++m) {
      std::vector<double> g(max_inv + 1, 0.0);
      for (std::size_t k = 0; k <= max_inv; ++k)
        for (std::size_t j = 0; j < m && j <= k; ++j) g[k] += f[k - j];
      f.swap(g);
    }
    double total = 0.0;
    double extreme = 0.0;
    for (std::size_t k = 0; k <= max_inv; ++k) {
      const long long s = static_cast<long long>(max_inv) - 2 * static_cast<long long>(k);
      total += f[k];
      if (std::llabs(s) >= std::llabs(s_obs)) extreme += f[k];
    }
    return extreme / total;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> permuted(n);
  double total = 0.0;
  double extreme = 0.0;
  do {
    for (std::size_t i = 0; i < n; ++i) permuted[i] = b[perm[i]];
    const auto c = count_pairs(a, permuted);
    total += 1.0;
    if (std::llabs(c.s) >= std::llabs(s_obs)) extreme += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return extreme / total;
}

double normal_p_value(std::span<const double> a, std::span<const double> b, long long s_obs) {
  const auto n = static_cast<double>(a.size());
  const auto ta = tie_groups(a);
  const auto tb = tie_groups(b);
  auto sum = [](const std::vector<long long>& g, auto f) {
    double s = 0.0;
    for (auto t : g) s += f(static_cast<double>(t));
    return s;
  };
  const double v0 = n * (n - 1) * (2 * n + 5);
  const double vt = sum(ta, [](double t) { return t * (t - 1) * (2 * t + 5); });
  const double vu = sum(tb, [](double t) { return t * (t - 1) * (2 * t + 5); });
  const double v1 = sum(ta, [](double t) { return t * (t - 1); }) * sum(tb, [](double t) { return t * (t - 1); }) /
                    (2 * n * (n - 1));
  const double v2 = sum(ta, [](double t) { return t * (t - 1) * (t - 2); }) *
                    sum(tb, [](double t) { return t * (t - 1) * (t - 2); }) / (9 * n * (n - 1) * (n - 2));
  const double var = (v0 - vt - vu) / 18.0 + v1 + v2;
  if (!(var > 0.0)) return 1.0;
  const double z = static_cast<double>(s_obs) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto c = count_pairs(a, b);
  const auto n = static_cast<long long>(a.size());
  const long long n0 = n * (n - 1) / 2;
  const double denom = std::sqrt(static_cast<double>(n0 - c.ties_a) * static_cast<double>(n0 - c.ties_b));
  if (!(denom > 0.0)) throw UndefinedMetricError("Kendall tau undefined: an input ranking is entirely tied");
  return std::clamp(static_cast<double>(c.s) / denom, -1.0, 1.0);
}

KendallTest kendall_test(std::span<const double> a, std::span<const double> b) {
  KendallTest t;
  t.tau = kendall_tau_b(a, b);
  t.n = a.size();
  const long long s = count_pairs(a, b).s;
  t.exact = t.n <= 10;
  t.p_value = t.exact ? exact_p_value(a, b, s) : normal_p_value(a, b, s);
  return t;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0 && sbb > 0.0)) throw UndefinedMetricError("correlation undefined: zero variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> mid_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  return pearson_r(ra, rb);
}

RankingComparison compare_rankings(std::span<const double> a, std::span<const double> b) {
  RankingComparison r;
  const auto k = kendall_test(a, b);
  r.kendall_tau = k.tau;
  r.p_value_tau = k.p_value;
  r.spearman_rho = spearman_rho(a, b);
  r.pearson_r = pearson_r(a, b);
  r.n = a.size();
  return r;
}

std::optional<double> LagAnalysis::at(int lag) const {
  for (std::size_t i = 0; i < lags.size(); ++i)
    if (lags[i] == lag) return correlations[i];
  return std::nullopt;
}

LagAnalysis lag_analysis(std::span<const double> x, std::span<const double> y, int max_lag) {
  if (max_lag < 0) throw ConfigError("max_lag must be non-negative");
  if (x.size() != y.size()) throw DataError("lag analysis needs series of equal length");
  if (x.size() <= 2 * static_cast<std::size_t>(max_lag))
    throw DataError("series of length " + std::to_string(x.size()) + " too short for max_lag " +
                    std::to_string(max_lag), "need length > 2 * max_lag");
  const auto n = static_cast<int>(x.size());
  LagAnalysis out;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const int t0 = std::max(0, lag);
    const int t1 = std::min(n, n + lag);
    std::vector<double> xs;
    std::vector<double> ys;
    for (int t = t0; t < t1; ++t) {
      xs.push_back(x[static_cast<std::size_t>(t)]);
      ys.push_back(y[static_cast<std::size_t>(t - lag)]);
    }
    out.lags.push_back(lag);
    try {
      out.correlations.emplace_back(pearson_r(xs, ys));
    } catch (const UndefinedMetricError&) {
      out.correlations.emplace_back(std::nullopt);
      ++out.zero_variance_lags;
    } catch (const DataError&) {
      out.correlations.emplace_back(std::nullopt);
      ++out.zero_variance_lags;
    }
  }
  // Visit lags by increasing |lag| (negative first) so ties keep the smallest shift.
  double best = -1.0;
  bool found = false;
  for (int k = 0; k <= max_lag; ++k) {
    for (int lag : {-k, k}) {
      const auto c = out.at(lag);
      if (c && std::abs(*c) > best + 1e-12) {
        best = std::abs(*c);
        out.best_lag = lag;
        found = true;
      }
      if (k == 0) break;
    }
  }
  if (!found) throw UndefinedMetricError("lag analysis undefined: every overlapping segment has zero variance");
  return out;
}

}  // namespace nglare

#include "nglare/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "nglare/error.hpp"

namespace nglare {

SliceGrid SliceGrid::uniform(std::size_t slice_count, double early_threshold) {
  if (slice_count < 2) throw ConfigError("slice_count must be at least 2");
  if (!(early_threshold > 0.0 && early_threshold < 1.0)) throw ConfigError("early threshold s_0 must lie in (0, 1)");
  SliceGrid g;
  g.edges_.resize(slice_count + 1);
  for (std::size_t i = 0; i <= slice_count; ++i)
    g.edges_[i] = static_cast<double>(i) / static_cast<double>(slice_count);
  g.requested_early_threshold_ = early_threshold;
  const auto k = static_cast<std::size_t>(std::llround(early_threshold * static_cast<double>(slice_count)));
  g.early_threshold_ = g.edges_[std::min(k, slice_count)];
  return g;
}

std::size_t SliceGrid::slice_of(double s) const {
  if (!(s >= -1e-12 && s <= 1.0 + 1e-12))
    throw DataError("progress value " + std::to_string(s) + " outside [0, 1]", "angles must come from standardized trajectories");
  const std::size_t last = slice_count() - 1;
  if (s >= 1.0) return last;
  if (s <= 0.0) return 0;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), s);
  const auto idx = static_cast<std::size_t>(it - edges_.begin()) - 1;
  return std::min(idx, last);
}

std::vector<std::vector<double>> slice_angles(std::span<const AngleSample> angles, const SliceGrid& grid) {
  std::vector<std::vector<double>> slices(grid.slice_count());
  for (const auto& a : angles) {
    if (!a.theta) continue;
    slices[grid.slice_of(a.s)].push_back(*a.theta);
  }
  return slices;
}

AngleHistogram estimate_distribution(std::span<const double> samples, std::size_t bin_count, double smoothing) {
  if (bin_count < 2) throw ConfigError("histogram bin count must be at least 2");
  if (!(smoothing >= 0.0)) throw ConfigError("histogram smoothing must be non-negative");
  AngleHistogram h;
  h.bin_count = bin_count;
  h.smoothing = smoothing;
  h.raw_count = samples.size();
  h.empty = samples.empty();
  std::vector<double> counts(bin_count, 0.0);
  const double width = std::numbers::pi / static_cast<double>(bin_count);
  for (double theta : samples) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi))
      throw DataError("angle sample " + std::to_string(theta) + " outside [0, pi]");
    const auto k = std::min(bin_count - 1, static_cast<std::size_t>(theta / width));
    counts[k] += 1.0;
  }
  h.probabilities.resize(bin_count);
  const double denom = static_cast<double>(samples.size()) + static_cast<double>(bin_count) * smoothing;
  for (std::size_t k = 0; k < bin_count; ++k)
    h.probabilities[k] = denom > 0.0 ? (counts[k] + smoothing) / denom : 1.0 / static_cast<double>(bin_count);
  return h;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DataError("JS divergence needs equal bin counts (" + std::to_string(p.size()) + " vs " +
                    std::to_string(q.size()) + ")");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) kl_p += p[k] * std::log(p[k] / m);
    if (q[k] > 0.0) kl_q += q[k] * std::log(q[k] / m);
  }
  return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, std::numbers::ln2);
}

double js_divergence(const AngleHistogram& p, const AngleHistogram& q) {
  if (p.bin_count != q.bin_count) throw DataError("JS divergence needs histograms with the same bin count");
  return js_divergence(std::span<const double>(p.probabilities), std::span<const double>(q.probabilities));
}

std::string to_string(SliceFlag f) {
  switch (f) {
    case SliceFlag::Ok: return "ok";
    case SliceFlag::EmptyA: return "empty_a";
    case SliceFlag::EmptyB: return "empty_b";
    case SliceFlag::EmptyBoth: return "empty_both";
  }
  return "ok";
}

SliceFlag parse_slice_flag(const std::string& s) {
  if (s == "ok") return SliceFlag::Ok;
  if (s == "empty_a") return SliceFlag::EmptyA;
  if (s == "empty_b") return SliceFlag::EmptyB;
  if (s == "empty_both") return SliceFlag::EmptyBoth;
  throw DataError("unknown slice flag '" + s + "'");
}

std::string PairSection::label() const { return std::string{to_char(a), '-', to_char(b)}; }

std::vector<double> PairSection::slice_means() const {
  if (groups.empty()) return {};
  std::vector<double> out(groups.front().slices.size(), 0.0);
  for (const auto& g : groups)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g.slices[i].js;
  for (auto& v : out) v /= static_cast<double>(groups.size());
  return out;
}

namespace {

std::vector<AngleSample> group_samples(const AngleSet& set, std::size_t group) {
  std::vector<AngleSample> out;
  for (const auto& a : set.samples)
    if (a.group == group) out.push_back(a);
  return out;
}

}  // namespace

PairSection jss_for_pair(const AngleSet& a, const AngleSet& b, const SliceGrid& grid, std::size_t bin_count,
                         double smoothing, Condition a_tag, Condition b_tag) {
  PairSection pair;
  pair.a = a_tag;
  pair.b = b_tag;
  for (std::size_t ga = 0; ga < a.group_labels.size(); ++ga) {
    const auto it = std::find(b.group_labels.begin(), b.group_labels.end(), a.group_labels[ga]);
    if (it == b.group_labels.end()) continue;
    const auto gb = static_cast<std::size_t>(it - b.group_labels.begin());
    const auto slices_a = slice_angles(group_samples(a, ga), grid);
    const auto slices_b = slice_angles(group_samples(b, gb), grid);

    GroupSection section;
    section.label = a.group_labels[ga];
    for (std::size_t i = 0; i < grid.slice_count(); ++i) {
      SliceEntry e;
      e.index = i;
      e.lo = grid.lo(i);
      e.hi = grid.hi(i);
      e.count_a = slices_a[i].size();
      e.count_b = slices_b[i].size();
      e.early = grid.is_early(i);
      if (e.count_a == 0 && e.count_b == 0) {
        e.flag = SliceFlag::EmptyBoth;
      } else if (e.count_a == 0) {
        e.flag = SliceFlag::EmptyA;
      } else if (e.count_b == 0) {
        e.flag = SliceFlag::EmptyB;
      } else {
        e.js = js_divergence(estimate_distribution(slices_a[i], bin_count, smoothing),
                             estimate_distribution(slices_b[i], bin_count, smoothing));
      }
      if (e.flag != SliceFlag::Ok) ++pair.flagged_slices;
      section.jss += e.js;
      if (e.early) section.jss_early += e.js;
      section.slices.push_back(e);
    }
    pair.groups.push_back(std::move(section));
  }
  if (pair.groups.empty())
    throw DataError("comparison " + pair.label() + ": the two angle sets share no layer group");
  for (const auto& g : pair.groups) {
    pair.jss += g.jss;
    pair.jss_early += g.jss_early;
  }
  pair.jss /= static_cast<double>(pair.groups.size());
  pair.jss_early /= static_cast<double>(pair.groups.size());
  return pair;
}

AngleSet filter_condition(const AngleSet& angles, Condition c) {
  AngleSet out;
  out.group_labels = angles.group_labels;
  for (const auto& a : angles.samples)
    if (a.condition == c) out.samples.push_back(a);
  return out;
}

const PairSection& JssReport::pair(Condition a, Condition b) const {
  for (const auto& p : pairs)
    if (p.a == a && p.b == b) return p;
  throw DataError(std::string("report has no comparison ") + to_char(a) + "-" + to_char(b));
}

JssReport jss_from_angles(const AngleSet& angles, const JssConfig& config) {
  const SliceGrid grid = SliceGrid::uniform(config.slice_count, config.early_threshold);
  JssReport report;
  report.config = config;
  report.snapped_early_threshold = grid.early_threshold();
  report.group_labels = angles.group_labels;
  report.missing_angles = angles.missing_counts();
  report.present_angles = angles.present_counts();

  std::array<AngleSet, 4> by_condition;
  for (Condition c : kAllConditions) {
    by_condition[condition_index(c)] = filter_condition(angles, c);
    if (by_condition[condition_index(c)].samples.empty())
      throw DataError(std::string("condition ") + to_char(c) + " has no angle samples",
                      "every condition B, J, R, P needs at least one trajectory");
  }
  for (const auto& [a, b] : kComparisons) {
    try {
      report.pairs.push_back(jss_for_pair(by_condition[condition_index(a)], by_condition[condition_index(b)], grid,
                                          config.bin_count, config.smoothing, a, b));
    } catch (const DataError& e) {
      throw DataError(std::string("comparison ") + to_char(a) + "-" + to_char(b) + ": " + e.what(), e.hint());
    }
  }
  return report;
}

JssReport run_jss_core(std::span<const GroupedTrajectory> dataset, std::span<const BenignManifold> manifolds,
                       const JssConfig& config, AngleSpace space, std::size_t threads) {
  if (manifolds.empty()) throw ConfigError("run_jss_core needs one fitted manifold per layer group");
  const AngleSet angles = compute_angles(dataset, manifolds, space, threads);
  JssReport report = jss_from_angles(angles, config);
  for (const auto& m : manifolds) report.manifold_ranks.push_back(m.rank());
  return report;
}

std::string format_jss_csv(const JssReport& report) {
  std::string out = "pair,group,slice_index,slice_lo,slice_hi,js,count_a,count_b,flag\n";
  char buf[256];
  for (const auto& p : report.pairs) {
    for (const auto& g : p.groups) {
      for (const auto& e : g.slices) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.17g,%.17g,%.17g,%zu,%zu,%s\n", p.label().c_str(),
                      g.label.c_str(), e.index, e.lo, e.hi, e.js, e.count_a, e.count_b, to_string(e.flag).c_str());
        out += buf;
      }
    }
  }
  return out;
}

}  // namespace nglare

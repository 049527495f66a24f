#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nglare/geometry.hpp"
#include "nglare/manifold.hpp"
#include "nglare/trajdata.hpp"

namespace nglare {

// Equal-width partition of the progress axis. Slices are half-open [lo, hi),
// except the last, which is closed at 1.
class SliceGrid {
 public:
  static SliceGrid uniform(std::size_t slice_count = 10, double early_threshold = 0.4);

  std::size_t slice_count() const { return edges_.size() - 1; }
  const std::vector<double>& edges() const { return edges_; }
  double lo(std::size_t i) const { return edges_.at(i); }
  double hi(std::size_t i) const { return edges_.at(i + 1); }
  // s_0 after snapping to the nearest edge.
  double early_threshold() const { return early_threshold_; }
  double requested_early_threshold() const { return requested_early_threshold_; }

  std::size_t slice_of(double s) const;
  // A slice is early iff its upper edge is <= s_0.
  bool is_early(std::size_t i) const { return hi(i) <= early_threshold_; }

 private:
  std::vector<double> edges_;
  double early_threshold_ = 0.4;
  double requested_early_threshold_ = 0.4;
};

// Present angles grouped by slice. Missing angles are dropped.
std::vector<std::vector<double>> slice_angles(std::span<const AngleSample> angles, const SliceGrid& grid);

struct AngleHistogram {
  std::size_t bin_count = 0;
  std::vector<double> probabilities;
  std::size_t raw_count = 0;
  double smoothing = 0.0;
  bool empty = true;
};

// Equal-width bins over [0, pi], probabilities (count + eps) / (n + K eps).
AngleHistogram estimate_distribution(std::span<const double> samples, std::size_t bin_count, double smoothing);

// Jensen-Shannon divergence in nats, in [0, ln 2].
double js_divergence(std::span<const double> p, std::span<const double> q);
double js_divergence(const AngleHistogram& p, const AngleHistogram& q);

enum class SliceFlag { Ok, EmptyA, EmptyB, EmptyBoth };
std::string to_string(SliceFlag f);
SliceFlag parse_slice_flag(const std::string& s);

struct SliceEntry {
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 0.0;
  double js = 0.0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  SliceFlag flag = SliceFlag::Ok;
  bool early = false;
};

struct GroupSection {
  std::string label;
  std::vector<SliceEntry> slices;
  double jss = 0.0;
  double jss_early = 0.0;
};

struct PairSection {
  Condition a = Condition::Jailbreak;
  Condition b = Condition::Benign;
  std::vector<GroupSection> groups;
  double jss = 0.0;        // mean over groups
  double jss_early = 0.0;  // mean over groups
  std::size_t flagged_slices = 0;

  std::string label() const;
  // Cross-group mean JS per slice.
  std::vector<double> slice_means() const;
};

struct JssConfig {
  std::size_t slice_count = 10;
  std::size_t bin_count = 32;
  double smoothing = 0.5;
  double early_threshold = 0.4;
};

// Comparisons evaluated by the core loop, in report order.
inline constexpr std::array<std::pair<Condition, Condition>, 4> kComparisons = {{
    {Condition::Jailbreak, Condition::Benign},
    {Condition::Jailbreak, Condition::IdealRefusal},
    {Condition::Benign, Condition::IdealRefusal},
    {Condition::PlainQuery, Condition::Benign},
}};

struct JssReport {
  JssConfig config;
  double snapped_early_threshold = 0.4;
  std::vector<std::string> group_labels;
  std::vector<std::size_t> manifold_ranks;  // empty when computed from angles alone
  std::vector<PairSection> pairs;
  std::array<std::size_t, 4> missing_angles{};
  std::array<std::size_t, 4> present_angles{};

  const PairSection& pair(Condition a, Condition b) const;
};

// Slice-wise JS between two angle sets, matched by group label. Condition tags on
// the samples are ignored; `a_tag`/`b_tag` only label the section.
PairSection jss_for_pair(const AngleSet& a, const AngleSet& b, const SliceGrid& grid, std::size_t bin_count,
                         double smoothing, Condition a_tag = Condition::Jailbreak,
                         Condition b_tag = Condition::Benign);

// Splits a mixed angle set by condition.
AngleSet filter_condition(const AngleSet& angles, Condition c);

// Slice JS for every comparison in kComparisons from precomputed angles.
JssReport jss_from_angles(const AngleSet& angles, const JssConfig& config);

// Turning angles for every condition and group, then jss_from_angles.
JssReport run_jss_core(std::span<const GroupedTrajectory> dataset, std::span<const BenignManifold> manifolds,
                       const JssConfig& config, AngleSpace space = AngleSpace::Ambient, std::size_t threads = 1);

// Flat per-slice table `pair,group,slice_index,slice_lo,slice_hi,js,count_a,count_b,flag`.
std::string format_jss_csv(const JssReport& report);

}  // namespace nglare

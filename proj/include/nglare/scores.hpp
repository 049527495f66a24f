#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nglare/divergence.hpp"
#include "nglare/pipeline.hpp"

namespace nglare {

// How slice values are combined across layer groups before forming a proxy.
enum class ProxyAggregation {
  CrossGroupMean,  // ratio of cross-group-mean slice values
  PerGroupMean,    // ratio per group, then mean over groups
};

// Sum of J-B slice JS over sum of P-B slice JS.
double jb_pb_ratio(const JssReport& report, ProxyAggregation agg = ProxyAggregation::CrossGroupMean);

// min over slices of J-R JS divided by max over slices.
double jr_minmax(const JssReport& report, ProxyAggregation agg = ProxyAggregation::CrossGroupMean);

inline double jss_proxy(double jb_pb, double jr_mm) { return 0.5 * jb_pb + 0.5 * jr_mm; }

struct ProxyScores {
  std::string model_id;
  double jb_pb_ratio = 0.0;
  double jr_minmax = 0.0;
  double jss_proxy = 0.0;
};

ProxyScores proxy_scores(const JssReport& report, std::string model_id,
                         ProxyAggregation agg = ProxyAggregation::CrossGroupMean);

struct RefusalPrototype {
  Eigen::VectorXd w_ref;  // distribution over the vocabulary
  Eigen::VectorXd c_hat;  // unit refusal centroid in embedding space
  double tau_ref = 0.05;
  std::vector<std::string> seed_phrases;
};

// embeddings: |V| x d_emb. Each seed phrase is a list of token ids; a phrase contributes the
// normalized mean of its normalized token embeddings.
RefusalPrototype build_refusal_prototype(const Eigen::MatrixXd& embeddings,
                                         const std::vector<std::vector<std::size_t>>& seeds, double tau_ref = 0.05,
                                         std::vector<std::string> seed_phrases = {});

// Numerically stable softmax(z / tau).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits, double tau = 1.0);

// <W_ref, softmax(logits / tau_pred)>
double anm(const RefusalPrototype& proto, const Eigen::VectorXd& logits, double tau_pred = 1.0);

struct AnmCurve {
  std::vector<std::optional<double>> values;  // per slice; empty slices have no value
  std::vector<std::size_t> counts;
  // Min-max rescaled copy; absent when the curve has zero range.
  std::optional<std::vector<std::optional<double>>> normalized;
  double tau_pred = 1.0;
};

// Per-slice mean of node-level ANM values.
AnmCurve anm_curve_from_nodes(std::span<const double> node_anm, std::span<const double> node_progress,
                              const SliceGrid& grid, double tau_pred = 1.0);

// node_logits: T x |V|, one row per node; progress has T entries.
AnmCurve anm_curve(const RefusalPrototype& proto, const Eigen::MatrixXd& node_logits,
                   std::span<const double> progress, double tau_pred, const SliceGrid& grid);

struct BootstrapOptions {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  // Replica 0 reuses the original trajectories, so the point estimate is always a sample.
  bool include_identity = true;
  double confidence = 0.95;
  std::size_t threads = 1;
};

struct BootstrapResult {
  std::string metric;
  double point = 0.0;
  std::vector<double> samples;  // NaN where the metric was undefined for a replica
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t undefined_count = 0;
};

// Resample indices (with replacement) for one condition of one replica.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t replica, Condition c);

// Percentile interval as order statistics of the finite samples.
std::pair<double, double> percentile_interval(std::vector<double> samples, double confidence);

// Metric names in bootstrap output order.
std::vector<std::string> bootstrap_metric_names();

// Resamples trajectories within each condition and re-runs manifold fit + JSS core.
std::vector<BootstrapResult> bootstrap_jss(const Dataset& dataset, const PipelineConfig& config,
                                           const BootstrapOptions& options);

// Fraction of texts containing at least one pattern (ASCII case-insensitive substring).
double refusal_rate(std::span<const std::string> texts, std::span<const std::string> patterns);

const std::vector<std::string>& default_refusal_patterns();

enum class SafetyLabel { Safe, Unsafe };

double unsafe_rate(std::span<const SafetyLabel> labels);

}  // namespace nglare

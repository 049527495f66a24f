#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nglare/trajdata.hpp"

namespace nglare {

enum class DriftSchedule { Quadratic, Linear, Step };

std::string to_string(DriftSchedule s);
DriftSchedule parse_drift_schedule(const std::string& s);
double schedule_value(DriftSchedule s, double progress, double step_at = 0.5);

// Synthetic activations: benign random walks inside a fixed rank-r subspace, plus an
// off-subspace coordinate along one fixed direction whose profile depends on the condition:
//   B: 0
//   J: drift * drift_scale * schedule(s)
//   R: refusal_offset * (1 - refusal_pull * s), i.e. pulled back toward the subspace. When
//      collapse_at is set, the first round(collapse_strength * n) R records switch to J's
//      off-subspace motion after collapse_at; the rest keep refusing.
//   P: plain_drift * s, a strong outward drift from the first node.
// Each node adds isotropic noise; each layer adds further independent noise of the same scale.
// Random source: std::mt19937_64 with the transforms documented in random.hpp; every
// trajectory has its own sub-seed, so outputs are reproducible bit for bit.
struct SyntheticSpec {
  std::string model_id = "synthetic";
  std::size_t dim = 16;
  std::size_t true_rank = 3;
  std::size_t num_nodes = 21;
  std::size_t num_layers = 6;
  std::size_t n_per_condition = 48;
  double drift = 0.5;
  std::optional<double> collapse_at;
  double collapse_strength = 1.0;
  double noise = 0.01;
  double subspace_scale = 1.0;
  double step_scale = 0.1;
  double drift_scale = 1.0;
  double refusal_offset = 12.0;
  double refusal_pull = 0.8;
  double plain_drift = 8.0;
  DriftSchedule schedule = DriftSchedule::Quadratic;
  double step_at = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSuite {
  TrajectoryContainer container;
  Eigen::MatrixXd subspace_basis;   // d x r_true
  Eigen::VectorXd drift_direction;  // unit, orthogonal to the subspace
};

SyntheticSuite generate_suite(const SyntheticSpec& spec);

// Number of R records that collapse onto J's motion.
std::size_t collapsed_count(const SyntheticSpec& spec);

// Off-subspace coordinate of condition `c` at nominal progress s. `collapsed` only
// matters for R records.
double off_subspace_coordinate(const SyntheticSpec& spec, Condition c, double s, bool collapsed = true);

struct ModelSuite {
  std::vector<SyntheticSuite> models;
  std::vector<double> safety_levels;  // ground truth; higher is safer
};

// Safety level a in [0, 1] sets drift(a) = 0.25 + a, collapse_at(a) = 0.5 + 0.5a and
// collapse_strength(a) = 1 - a. Other fields come from `base`; each pseudo-model gets
// its own sub-seed derived from (seed, model index).
SyntheticSpec spec_for_safety_level(const SyntheticSpec& base, double level, std::size_t model_index,
                                    std::uint64_t seed);
ModelSuite generate_model_suite(const SyntheticSpec& base, const std::vector<double>& safety_levels,
                                std::uint64_t seed);

}  // namespace nglare

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nglare/divergence.hpp"
#include "nglare/geometry.hpp"
#include "nglare/manifold.hpp"
#include "nglare/trajdata.hpp"

namespace nglare {

struct PipelineConfig {
  std::size_t layer_group_count = 3;
  ProgressOptions progress;
  RankPolicy rank = RankPolicy::explained_variance(0.95);
  JssConfig jss;
  AngleSpace angle_space = AngleSpace::Ambient;
  std::size_t threads = 1;
};

// Grouped, standardized trajectories of one model.
struct Dataset {
  std::string model_id;
  std::vector<std::string> group_labels;
  std::vector<GroupedTrajectory> trajectories;

  std::size_t count(Condition c) const;
};

Dataset prepare_dataset(const TrajectoryContainer& container, const PipelineConfig& config);

// One manifold per layer group, fitted on every node of every B-condition trajectory.
std::vector<BenignManifold> fit_benign_manifolds(const Dataset& dataset, const RankPolicy& policy);

// Manifold fit plus the JSS core on the same dataset.
JssReport evaluate_dataset(const Dataset& dataset, const PipelineConfig& config);

}  // namespace nglare

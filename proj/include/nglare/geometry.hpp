#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nglare/manifold.hpp"
#include "nglare/trajdata.hpp"

namespace nglare {

// Turning angle of one segment, attributed to the progress of its start node.
struct AngleSample {
  std::optional<double> theta;  // radians in [0, pi]; empty when undefined
  double s = 0.0;
  std::size_t group = 0;
  Condition condition = Condition::Benign;
  std::string trajectory_id;
  std::size_t node_index = 0;
};

enum class AngleSpace {
  Ambient,   // tangent against the unwhitened residual
  Whitened,  // segment measured in (whitened subspace coords, residual) space
};

// Steps shorter than this times the largest node norm have no tangent.
inline constexpr double kRelativeStepTolerance = 1e-12;

// Unit direction of each segment h_{t+1} - h_t, or empty for degenerate steps.
std::vector<std::optional<Eigen::VectorXd>> tangents(const GroupedTrajectory& traj, std::size_t group);

// One AngleSample per segment (T - 1 of them), using the manifold's group.
std::vector<AngleSample> turning_angles(const GroupedTrajectory& traj, const BenignManifold& m,
                                        AngleSpace space = AngleSpace::Ambient);

// Angle samples of a whole dataset.
struct AngleSet {
  std::vector<std::string> group_labels;
  std::vector<AngleSample> samples;

  std::size_t group_count() const { return group_labels.size(); }
  // Undefined angles per condition (indexed like kAllConditions).
  std::array<std::size_t, 4> missing_counts() const;
  std::array<std::size_t, 4> present_counts() const;
};

// Angles for every trajectory and every manifold (one manifold per group, in group order).
AngleSet compute_angles(std::span<const GroupedTrajectory> trajectories, std::span<const BenignManifold> manifolds,
                        AngleSpace space = AngleSpace::Ambient, std::size_t threads = 1);

// CSV `trajectory_id,condition,group,node_index,s,theta`; theta empty when missing.
std::string format_angle_csv(const AngleSet& angles);
void write_angle_csv(const std::filesystem::path& path, const AngleSet& angles);
AngleSet parse_angle_csv(const std::string& text);
AngleSet read_angle_csv(const std::filesystem::path& path);

}  // namespace nglare

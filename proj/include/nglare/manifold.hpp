#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

namespace nglare {

struct RankPolicy {
  enum class Mode { Fixed, ExplainedVariance };

  Mode mode = Mode::ExplainedVariance;
  std::size_t rank = 0;       // Fixed
  double fraction = 0.95;     // ExplainedVariance
  std::optional<std::size_t> max_rank;  // ExplainedVariance; defaults to min(64, d-1)

  static RankPolicy fixed(std::size_t r);
  static RankPolicy explained_variance(double fraction = 0.95, std::optional<std::size_t> max_rank = std::nullopt);
};

// Rank-r principal subspace of benign activations for one layer group.
struct BenignManifold {
  std::size_t group = 0;
  std::string group_label;
  Eigen::VectorXd mu;
  Eigen::MatrixXd basis;        // d x r, orthonormal columns
  Eigen::VectorXd eigenvalues;  // r, positive, non-increasing
  std::size_t requested_rank = 0;
  std::size_t sample_count = 0;
  // Residual norms at or below this are treated as on-manifold (normal direction undefined).
  double on_manifold_tolerance = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }
};

// Eigenvalues below this fraction of the largest never enter the basis.
inline constexpr double kEigenvalueFloor = 1e-10;

// samples: n x d, one sample per row.
BenignManifold fit_manifold(const Eigen::MatrixXd& samples, const RankPolicy& policy = {},
                            std::size_t group = 0, std::string group_label = {});

// z = Lambda^{-1/2} U^T (h - mu)
Eigen::VectorXd whiten(const BenignManifold& m, const Eigen::VectorXd& h);

// mu + U U^T (h - mu)
Eigen::VectorXd reconstruct(const BenignManifold& m, const Eigen::VectorXd& h);

// (h - mu) - U U^T (h - mu)
Eigen::VectorXd residual(const BenignManifold& m, const Eigen::VectorXd& h);

double deviation_energy(const BenignManifold& m, const Eigen::VectorXd& h);

// Gradient of the deviation energy: 2 * residual.
Eigen::VectorXd outward_normal(const BenignManifold& m, const Eigen::VectorXd& h);

// manifold.json (metadata) + manifold.bin (mu then column-major basis, f32 LE) inside `dir`.
void save_manifold(const std::filesystem::path& dir, const BenignManifold& m);
BenignManifold load_manifold(const std::filesystem::path& dir);

}  // namespace nglare

#include "nglare/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <vector>

#include "nglare/error.hpp"
#include "nglare/io.hpp"

namespace nglare {

using json = nlohmann::json;

RankPolicy RankPolicy::fixed(std::size_t r) {
  RankPolicy p;
  p.mode = Mode::Fixed;
  p.rank = r;
  return p;
}

RankPolicy RankPolicy::explained_variance(double fraction, std::optional<std::size_t> max_rank) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("explained-variance fraction must lie in (0, 1]");
  RankPolicy p;
  p.mode = Mode::ExplainedVariance;
  p.fraction = fraction;
  p.max_rank = max_rank;
  return p;
}

namespace {

void check_dim(const BenignManifold& m, const Eigen::VectorXd& h) {
  if (h.size() != m.mu.size())
    throw DataError("dimension mismatch: vector has " + std::to_string(h.size()) + " components, manifold '" +
                    m.group_label + "' expects " + std::to_string(m.mu.size()));
}

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // d x k
};

// Covariance eigenpairs, descending. For n < d the n x n Gram matrix is
// decomposed and its eigenvectors lifted back to R^d.
EigenPairs covariance_eigenpairs(const Eigen::MatrixXd& centered) {
  const auto n = centered.rows();
  const auto d = centered.cols();
  const double denom = static_cast<double>(n - 1);
  EigenPairs out;
  if (n < d) {
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");
    out.values = solver.eigenvalues().reverse();
    const Eigen::MatrixXd v = solver.eigenvectors().rowwise().reverse();
    out.vectors = Eigen::MatrixXd::Zero(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out.values(i) <= 0.0) continue;
      Eigen::VectorXd u = centered.transpose() * v.col(i);
      const double norm = u.norm();
      if (norm > 0.0) out.vectors.col(i) = u / norm;
    }
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

BenignManifold fit_manifold(const Eigen::MatrixXd& samples, const RankPolicy& policy, std::size_t group,
                            std::string group_label) {
  const auto n = static_cast<std::size_t>(samples.rows());
  const auto d = static_cast<std::size_t>(samples.cols());
  const std::string where = "manifold '" + group_label + "'";
  if (d < 2) throw ConfigError(where + ": hidden size must be at least 2");
  if (!samples.allFinite()) throw DataError(where + ": non-finite benign sample");

  std::size_t requested = 0;
  std::size_t cap = 0;
  if (policy.mode == RankPolicy::Mode::Fixed) {
    requested = policy.rank;
    if (requested < 1 || requested >= d)
      throw ConfigError(where + ": fixed rank " + std::to_string(requested) + " must satisfy 1 <= r < d = " +
                        std::to_string(d));
    cap = requested;
  } else {
    cap = policy.max_rank.value_or(std::min<std::size_t>(64, d - 1));
    if (cap < 1 || cap >= d) throw ConfigError(where + ": max rank must satisfy 1 <= r_max < d");
  }
  const std::size_t min_samples = std::max<std::size_t>(2, requested + 1);
  if (n < min_samples)
    throw DataError(where + ": " + std::to_string(n) + " benign samples, need at least " + std::to_string(min_samples),
                    "add benign trajectories or lower the rank");

  BenignManifold m;
  m.group = group;
  m.group_label = std::move(group_label);
  m.sample_count = n;
  m.mu = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - m.mu.transpose();

  const EigenPairs eig = covariance_eigenpairs(centered);
  const double lambda_max = eig.values(0);
  const double scale = samples.rowwise().squaredNorm().mean();
  if (!(lambda_max > 0.0) || lambda_max <= 1e-24 * scale)
    throw DegenerateManifoldError(where + ": benign samples have zero covariance",
                                  "benign activations must vary; check the B-condition records");

  std::size_t usable = 0;
  while (usable < static_cast<std::size_t>(eig.values.size()) && eig.values(usable) >= kEigenvalueFloor * lambda_max)
    ++usable;

  std::size_t r = 0;
  if (policy.mode == RankPolicy::Mode::Fixed) {
    r = std::min(requested, usable);
  } else {
    double total = 0.0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) total += std::max(0.0, eig.values(i));
    double cumulative = 0.0;
    while (r < usable) {
      cumulative += eig.values(r);
      ++r;
      if (cumulative >= policy.fraction * total) break;
    }
    r = std::min(r, cap);
    requested = r;
  }
  m.requested_rank = requested;
  m.eigenvalues = eig.values.head(static_cast<Eigen::Index>(r));
  m.basis = eig.vectors.leftCols(static_cast<Eigen::Index>(r));
  // Deterministic sign: largest-magnitude component of each column is positive.
  for (Eigen::Index j = 0; j < m.basis.cols(); ++j) {
    Eigen::Index arg = 0;
    m.basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (m.basis(arg, j) < 0.0) m.basis.col(j) *= -1.0;
  }

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = centered.row(static_cast<Eigen::Index>(i)).norm();
  m.on_manifold_tolerance = 1e-7 * median(std::move(norms));
  return m;
}

Eigen::VectorXd whiten(const BenignManifold& m, const Eigen::VectorXd& h) {
  check_dim(m, h);
  const double floor = kEigenvalueFloor * (m.eigenvalues.size() > 0 ? m.eigenvalues(0) : 0.0);
  const Eigen::VectorXd coords = m.basis.transpose() * (h - m.mu);
  Eigen::VectorXd z(coords.size());
  for (Eigen::Index i = 0; i < coords.size(); ++i) z(i) = coords(i) / std::sqrt(std::max(m.eigenvalues(i), floor));
  return z;
}

Eigen::VectorXd reconstruct(const BenignManifold& m, const Eigen::VectorXd& h) {
  check_dim(m, h);
  return m.mu + m.basis * (m.basis.transpose() * (h - m.mu));
}

Eigen::VectorXd residual(const BenignManifold& m, const Eigen::VectorXd& h) {
  check_dim(m, h);
  const Eigen::VectorXd centered = h - m.mu;
  return centered - m.basis * (m.basis.transpose() * centered);
}

double deviation_energy(const BenignManifold& m, const Eigen::VectorXd& h) { return residual(m, h).squaredNorm(); }

Eigen::VectorXd outward_normal(const BenignManifold& m, const Eigen::VectorXd& h) { return 2.0 * residual(m, h); }

void save_manifold(const std::filesystem::path& dir, const BenignManifold& m) {
  json meta;
  meta["format_version"] = 1;
  meta["group"] = m.group;
  meta["group_label"] = m.group_label;
  meta["d"] = m.dim();
  meta["r"] = m.rank();
  meta["requested_rank"] = m.requested_rank;
  meta["eigenvalues"] = std::vector<double>(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
  meta["sample_count"] = m.sample_count;
  meta["on_manifold_tolerance"] = m.on_manifold_tolerance;

  std::vector<float> flat;
  flat.reserve(m.dim() * (m.rank() + 1));
  for (Eigen::Index i = 0; i < m.mu.size(); ++i) flat.push_back(static_cast<float>(m.mu(i)));
  for (Eigen::Index j = 0; j < m.basis.cols(); ++j)
    for (Eigen::Index i = 0; i < m.basis.rows(); ++i) flat.push_back(static_cast<float>(m.basis(i, j)));
  io::write_file_atomic(dir / "manifold.bin", io::encode_f32_le(flat));
  io::write_file_atomic(dir / "manifold.json", meta.dump(2) + "\n");
}

BenignManifold load_manifold(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(io::read_file(dir / "manifold.json"));
  } catch (const json::exception& e) {
    throw DataError("corrupt manifold metadata in " + dir.string() + ": " + e.what());
  }
  BenignManifold m;
  std::size_t d = 0;
  std::size_t r = 0;
  std::vector<double> eigenvalues;
  try {
    m.group = meta.at("group").get<std::size_t>();
    m.group_label = meta.at("group_label").get<std::string>();
    d = meta.at("d").get<std::size_t>();
    r = meta.at("r").get<std::size_t>();
    m.requested_rank = meta.value("requested_rank", r);
    eigenvalues = meta.at("eigenvalues").get<std::vector<double>>();
    m.sample_count = meta.at("sample_count").get<std::size_t>();
    m.on_manifold_tolerance = meta.at("on_manifold_tolerance").get<double>();
  } catch (const json::exception& e) {
    throw DataError("manifold metadata in " + dir.string() + " is incomplete: " + e.what());
  }
  if (eigenvalues.size() != r) throw DataError("manifold in " + dir.string() + ": eigenvalue count != r");
  const auto flat = io::decode_f32_le(io::read_file(dir / "manifold.bin"));
  if (flat.size() != d * (r + 1))
    throw DataError("manifold in " + dir.string() + ": payload size does not match d and r");
  m.mu.resize(static_cast<Eigen::Index>(d));
  m.basis.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
  m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < d; ++i) m.mu(static_cast<Eigen::Index>(i)) = flat[i];
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < d; ++i)
      m.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[d + j * d + i];
  return m;
}

}  // namespace nglare

#include <doctest.h>

#include <cmath>

#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "nglare/error.hpp"
#include "nglare/io.hpp"
#include "nglare/manifold.hpp"

using namespace nglare;

namespace {

oracle::Matrix to_rows(const Eigen::MatrixXd& x) {
  oracle::Matrix m(static_cast<std::size_t>(x.rows()), std::vector<double>(static_cast<std::size_t>(x.cols())));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) m[i][j] = x(i, j);
  return m;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("fit_manifold matches a Jacobi oracle on random sample sets") {
  gen::Gen g(21);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = g.size(2, 8);
    const std::size_t n = g.size(3, 100);
    const Eigen::MatrixXd x = g.anisotropic_samples(n, d);
    const std::size_t r = g.size(1, std::min(d - 1, n - 1));
    const auto m = fit_manifold(x, RankPolicy::fixed(r));
    REQUIRE(m.rank() == r);

    const auto rows = to_rows(x);
    const auto eig = oracle::jacobi_eigen(oracle::covariance(rows));
    const auto mu = oracle::column_mean(rows);
    for (std::size_t k = 0; k < r; ++k) {
      CHECK(close(m.eigenvalues(static_cast<Eigen::Index>(k)), eig.values[k], 1e-8));
      double dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += m.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * eig.vectors[i][k];
      const double sign = dot < 0 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < d; ++i)
        CHECK(std::abs(m.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) - sign * eig.vectors[i][k]) < 1e-8);
    }
    for (int probe = 0; probe < 3; ++probe) {
      const Eigen::VectorXd h = g.vector(d) * 2.0 + m.mu;
      const std::vector<double> hv(h.data(), h.data() + h.size());
      const auto ro = oracle::residual(eig.vectors, r, mu, hv);
      const auto res = residual(m, h);
      const auto z = whiten(m, h);
      for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(res(static_cast<Eigen::Index>(i)) - ro[i]) < 1e-8);
      for (std::size_t k = 0; k < r; ++k) {
        double proj = 0;
        for (std::size_t i = 0; i < d; ++i) proj += eig.vectors[i][k] * (hv[i] - mu[i]);
        const double zo = proj / std::sqrt(eig.values[k]);
        CHECK(std::abs(std::abs(z(static_cast<Eigen::Index>(k))) - std::abs(zo)) < 1e-8);
      }
    }
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("gram route for fewer samples than dimensions") {
  gen::Gen g(22);
  const Eigen::MatrixXd x = g.anisotropic_samples(5, 12);
  const auto m = fit_manifold(x, RankPolicy::fixed(3));
  CHECK(m.rank() == 3);
  CHECK((m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-10);
  const auto eig = oracle::jacobi_eigen(oracle::covariance(to_rows(x)));
  for (int k = 0; k < 3; ++k) CHECK(close(m.eigenvalues(k), eig.values[static_cast<std::size_t>(k)], 1e-8));
  // Only n - 1 = 4 directions carry variance.
  const auto all = fit_manifold(x, RankPolicy::explained_variance(1.0));
  CHECK(all.rank() == 4);
}

TEST_CASE("basis is orthonormal with deterministic signs") {
  gen::Gen g(23);
  const Eigen::MatrixXd x = g.anisotropic_samples(50, 6);
  const auto m = fit_manifold(x, RankPolicy::fixed(4));
  CHECK((m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::Index arg = 0;
    m.basis.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(m.basis(arg, j) > 0.0);
  }
  for (Eigen::Index k = 1; k < 4; ++k) CHECK(m.eigenvalues(k) <= m.eigenvalues(k - 1));
}

TEST_CASE("explained variance picks the smallest sufficient rank") {
  // Axis-aligned data with variances 4, 2, 1, 0.5, 0.25 (+/- sign pattern keeps the mean at 0).
  const std::vector<double> sd{2.0, std::sqrt(2.0), 1.0, std::sqrt(0.5), 0.5};
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 6);
  for (int j = 0; j < 5; ++j) {
    // Two points +/- a per axis: variance with divisor n-1 = 2a^2/9.
    const double a = sd[j] * std::sqrt(9.0 / 2.0);
    x(2 * j, j) = a;
    x(2 * j + 1, j) = -a;
  }
  // Total 7.75: 4 -> 51.6%, 6 -> 77.4%, 7 -> 90.3%, 7.5 -> 96.8%
  CHECK(fit_manifold(x, RankPolicy::explained_variance(0.95)).rank() == 4);
  CHECK(fit_manifold(x, RankPolicy::explained_variance(0.90)).rank() == 3);
  CHECK(fit_manifold(x, RankPolicy::explained_variance(0.5)).rank() == 1);
  CHECK(fit_manifold(x, RankPolicy::explained_variance(0.95, 2)).rank() == 2);
  const auto m = fit_manifold(x, RankPolicy::explained_variance(0.95));
  CHECK(m.eigenvalues(0) == doctest::Approx(4.0));
  CHECK(m.eigenvalues(3) == doctest::Approx(0.5));
}

TEST_CASE("true rank is recovered from low-rank data with small noise") {
  gen::Gen g(24);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 12;
    const std::size_t r = g.size(1, 5);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g.matrix(d, d)).householderQ();
    const Eigen::MatrixXd u = q.leftCols(static_cast<Eigen::Index>(r));
    const Eigen::MatrixXd x = g.matrix(400, r) * u.transpose() + 1e-3 * g.matrix(400, d);
    const auto m = fit_manifold(x, RankPolicy::explained_variance(0.95));
    CHECK(m.rank() == r);
    // Largest principal angle between the fitted and the true subspace.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.basis.transpose() * u);
    const double smallest = svd.singularValues().minCoeff();
    CHECK(std::acos(std::min(1.0, smallest)) < 0.1);
  }
}

TEST_CASE("residual, reconstruction, energy and normal") {
  gen::Gen g(25);
  const auto m = fit_manifold(g.anisotropic_samples(80, 7), RankPolicy::fixed(3));
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd h = g.vector(7) * 3.0;
    const Eigen::VectorXd r = residual(m, h);
    CHECK((m.basis.transpose() * r).norm() < 1e-12);
    CHECK((reconstruct(m, h) + r - h).norm() < 1e-12);
    CHECK((reconstruct(m, reconstruct(m, h)) - reconstruct(m, h)).norm() < 1e-12);
    CHECK(deviation_energy(m, h) == doctest::Approx(r.squaredNorm()));
    CHECK((outward_normal(m, h) - 2.0 * r).norm() == 0.0);
  }
  CHECK(residual(m, m.mu).norm() == 0.0);
  CHECK_THROWS_AS(residual(m, Eigen::VectorXd::Zero(6)), DataError);
}

TEST_CASE("whitened coordinates of the benign samples have unit variance") {
  gen::Gen g(26);
  const Eigen::MatrixXd x = g.anisotropic_samples(200, 5);
  const auto m = fit_manifold(x, RankPolicy::fixed(3));
  Eigen::MatrixXd z(200, 3);
  for (Eigen::Index i = 0; i < 200; ++i) z.row(i) = whiten(m, x.row(i).transpose()).transpose();
  const Eigen::MatrixXd cov = (z.transpose() * z) / 199.0;
  CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("on-manifold tolerance scales with the sample spread") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 0, 3, 0;  // mean (4/3, 0): distances 4/3, 1/3, 5/3
  const auto m = fit_manifold(x, RankPolicy::fixed(1));
  CHECK(m.on_manifold_tolerance == doctest::Approx(1e-7 * 4.0 / 3.0));
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(fit_manifold(Eigen::MatrixXd::Ones(10, 4), RankPolicy::fixed(2)), DegenerateManifoldError);
  gen::Gen g(27);
  const Eigen::MatrixXd x = g.matrix(10, 4);
  CHECK_THROWS_AS(fit_manifold(x, RankPolicy::fixed(4)), ConfigError);
  CHECK_THROWS_AS(fit_manifold(x, RankPolicy::fixed(0)), ConfigError);
  CHECK_THROWS_AS(fit_manifold(g.matrix(2, 4), RankPolicy::fixed(3)), DataError);
  CHECK_THROWS_AS(fit_manifold(g.matrix(10, 1)), ConfigError);
  Eigen::MatrixXd bad = x;
  bad(3, 1) = NAN;
  CHECK_THROWS_AS(fit_manifold(bad), DataError);
  CHECK_THROWS_AS(RankPolicy::explained_variance(0.0), ConfigError);
}

TEST_CASE("save and load are bit exact") {
  gen::Gen g(28);
  const auto m = fit_manifold(g.anisotropic_samples(40, 6), RankPolicy::fixed(2), 1, "middle");
  TempDir dir("mf");
  save_manifold(dir / "a", m);
  const auto back = load_manifold(dir / "a");
  CHECK(back.group == 1);
  CHECK(back.group_label == "middle");
  CHECK(back.sample_count == 40);
  CHECK(back.on_manifold_tolerance == m.on_manifold_tolerance);
  for (Eigen::Index k = 0; k < 2; ++k) CHECK(back.eigenvalues(k) == m.eigenvalues(k));
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(back.mu(i) == static_cast<double>(static_cast<float>(m.mu(i))));
    for (Eigen::Index k = 0; k < 2; ++k) CHECK(back.basis(i, k) == static_cast<double>(static_cast<float>(m.basis(i, k))));
  }
  save_manifold(dir / "b", back);
  CHECK(io::read_file(dir / "a/manifold.bin") == io::read_file(dir / "b/manifold.bin"));
  CHECK(io::read_file(dir / "a/manifold.json") == io::read_file(dir / "b/manifold.json"));
  const auto again = load_manifold(dir / "b");
  CHECK(again.basis == back.basis);
  CHECK(again.mu == back.mu);

  io::write_file_atomic(dir / "b/manifold.bin", "abc");
  CHECK_THROWS_AS(load_manifold(dir / "b"), DataError);
}

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/gen.hpp"
#include "../support/tempdir.hpp"
#include "nglare/error.hpp"
#include "nglare/geometry.hpp"

using namespace nglare;
using std::numbers::pi;

namespace {

GroupedTrajectory make_traj(const Eigen::MatrixXd& nodes, Condition c = Condition::Jailbreak, std::string id = "t") {
  GroupedTrajectory t;
  t.id = std::move(id);
  t.condition = c;
  t.group_labels = {"all"};
  t.groups = {nodes};
  return standardize_progress(std::move(t));
}

// 1-dimensional manifold along `axis` through `mu`, unit eigenvalue.
BenignManifold line_manifold(const Eigen::VectorXd& mu, const Eigen::VectorXd& axis, double eig = 1.0) {
  BenignManifold m;
  m.group_label = "all";
  m.mu = mu;
  m.basis = axis.normalized();
  m.eigenvalues = Eigen::VectorXd::Constant(1, eig);
  m.requested_rank = 1;
  m.on_manifold_tolerance = 1e-12;
  return m;
}

double angle_of_step(const BenignManifold& m, const Eigen::VectorXd& h, const Eigen::VectorXd& step,
                     AngleSpace space = AngleSpace::Ambient) {
  Eigen::MatrixXd nodes(2, h.size());
  nodes.row(0) = h.transpose();
  nodes.row(1) = (h + step).transpose();
  const auto a = turning_angles(make_traj(nodes), m, space);
  REQUIRE(a.size() == 1);
  REQUIRE(a[0].theta);
  return *a[0].theta;
}

}  // namespace

TEST_CASE("parallel, orthogonal and anti-parallel constructions") {
  const auto m = line_manifold(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX());
  const Eigen::Vector3d h(0.7, 1.0, 0.0);  // residual points along +y
  CHECK(std::abs(angle_of_step(m, h, Eigen::Vector3d(0, 2, 0)) - 0.0) < 1e-9);
  CHECK(std::abs(angle_of_step(m, h, Eigen::Vector3d(0, 0, 1)) - pi / 2) < 1e-9);
  CHECK(std::abs(angle_of_step(m, h, Eigen::Vector3d(3, 0, 0)) - pi / 2) < 1e-9);
  CHECK(std::abs(angle_of_step(m, h, Eigen::Vector3d(0, -0.5, 0)) - pi) < 1e-9);
  CHECK(std::abs(angle_of_step(m, h, Eigen::Vector3d(1, 1, 0)) - pi / 4) < 1e-9);
}

TEST_CASE("angles are invariant to rotations and to scaling about the mean") {
  gen::Gen g(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = g.size(3, 7);
    const std::size_t T = g.size(2, 8);
    BenignManifold m;
    m.group_label = "all";
    m.mu = g.vector(d);
    const std::size_t r = g.size(1, d - 1);
    m.basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g.matrix(d, r)).householderQ() * Eigen::MatrixXd::Identity(d, r);
    m.eigenvalues = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r));
    m.on_manifold_tolerance = 1e-12;
    const Eigen::MatrixXd nodes = g.matrix(T, d);
    const auto base = turning_angles(make_traj(nodes), m);

    const Eigen::MatrixXd q = g.rotation(d);
    BenignManifold mr = m;
    mr.mu = q * m.mu;
    mr.basis = q * m.basis;
    const auto rotated = turning_angles(make_traj(nodes * q.transpose()), mr);

    const double c = g.uniform(0.05, 20.0);
    const Eigen::MatrixXd scaled_nodes = ((nodes.rowwise() - m.mu.transpose()) * c).rowwise() + m.mu.transpose();
    const auto scaled = turning_angles(make_traj(scaled_nodes), m);

    REQUIRE(base.size() == T - 1);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      REQUIRE(base[t].theta);
      CHECK(std::abs(*base[t].theta - *rotated[t].theta) < 1e-9);
      CHECK(std::abs(*base[t].theta - *scaled[t].theta) < 1e-9);
      // The normal's magnitude never enters: direction of 2r equals direction of r.
      const Eigen::VectorXd h = nodes.row(static_cast<Eigen::Index>(t)).transpose();
      const Eigen::VectorXd step = nodes.row(static_cast<Eigen::Index>(t + 1)).transpose() - h;
      const Eigen::VectorXd n = outward_normal(m, h);
      const double via_normal = std::acos(std::clamp(step.normalized().dot(n.normalized()), -1.0, 1.0));
      CHECK(std::abs(*base[t].theta - via_normal) < 1e-9);
      CHECK(*base[t].theta >= 0.0);
      CHECK(*base[t].theta <= pi);
    }
  }
}

TEST_CASE("undefined angles are reported as missing") {
  const auto m = line_manifold(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX());
  Eigen::MatrixXd nodes(4, 3);
  nodes << 0.5, 0, 0,  // on the manifold: no normal
      0.5, 1, 0,       //
      0.5, 1, 0,       // repeated node: no tangent
      0.5, 2, 1;
  const auto a = turning_angles(make_traj(nodes), m);
  REQUIRE(a.size() == 3);
  CHECK_FALSE(a[0].theta);
  CHECK_FALSE(a[1].theta);
  REQUIRE(a[2].theta);
  CHECK(a[2].node_index == 2);

  std::vector<GroupedTrajectory> trajs{make_traj(nodes, Condition::Benign, "b")};
  const std::vector<BenignManifold> ms{m};
  const auto set = compute_angles(trajs, ms);
  CHECK(set.missing_counts()[condition_index(Condition::Benign)] == 2);
  CHECK(set.present_counts()[condition_index(Condition::Benign)] == 1);
}

TEST_CASE("angle samples carry progress of the segment start") {
  const auto m = line_manifold(Eigen::Vector2d::Zero(), Eigen::Vector2d::UnitX());
  Eigen::MatrixXd nodes(3, 2);
  nodes << 0, 1, 0, 2, 0, 5;
  const auto a = turning_angles(make_traj(nodes), m);
  CHECK(a[0].s == 0.0);
  CHECK(a[1].s == doctest::Approx(0.25));
}

TEST_CASE("tangents are unit vectors") {
  gen::Gen g(32);
  const auto t = make_traj(g.matrix(6, 4));
  for (const auto& v : tangents(t, 0)) {
    REQUIRE(v);
    CHECK(std::abs(v->norm() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(tangents(t, 3), ConfigError);
}

TEST_CASE("whitened space agrees with ambient space for unit eigenvalues") {
  gen::Gen g(33);
  const auto unit = line_manifold(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), 1.0);
  const auto wide = line_manifold(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), 9.0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d h = g.vector(3);
    const Eigen::Vector3d step = g.vector(3);
    CHECK(std::abs(angle_of_step(unit, h, step, AngleSpace::Whitened) - angle_of_step(unit, h, step)) < 1e-9);
  }
  // Whitening shrinks the in-subspace part of a step, so the step looks more normal.
  const Eigen::Vector3d h(0, 1, 0);
  const Eigen::Vector3d step(1, 1, 0);
  CHECK(angle_of_step(wide, h, step, AngleSpace::Whitened) < angle_of_step(wide, h, step));
  CHECK(std::abs(angle_of_step(wide, h, step, AngleSpace::Whitened) - std::atan(1.0 / 3.0)) < 1e-9);
}

TEST_CASE("turning angles need a standardized trajectory with a matching group") {
  const auto m = line_manifold(Eigen::Vector2d::Zero(), Eigen::Vector2d::UnitX());
  GroupedTrajectory raw;
  raw.id = "raw";
  raw.group_labels = {"all"};
  raw.groups = {Eigen::MatrixXd::Random(3, 2)};
  CHECK_THROWS_AS(turning_angles(raw, m), DataError);
  auto other = m;
  other.group_label = "upper";
  CHECK_THROWS_AS(turning_angles(standardize_progress(raw), other), ConfigError);
}

TEST_CASE("angle CSV round trip") {
  gen::Gen g(34);
  AngleSet set;
  set.group_labels = {"lower", "upper"};
  for (int i = 0; i < 50; ++i) {
    AngleSample a;
    if (i % 7) a.theta = g.uniform(0, pi);
    a.s = g.uniform();
    a.group = static_cast<std::size_t>(i % 2);
    a.condition = kAllConditions[static_cast<std::size_t>(i % 4)];
    a.trajectory_id = "r" + std::to_string(i / 3);
    a.node_index = static_cast<std::size_t>(i);
    set.samples.push_back(a);
  }
  TempDir dir("csv");
  write_angle_csv(dir / "a.csv", set);
  const auto back = read_angle_csv(dir / "a.csv");
  CHECK(back.group_labels == set.group_labels);
  REQUIRE(back.samples.size() == set.samples.size());
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    CHECK(back.samples[i].theta == set.samples[i].theta);
    CHECK(back.samples[i].s == set.samples[i].s);
    CHECK(back.samples[i].group == set.samples[i].group);
    CHECK(back.samples[i].condition == set.samples[i].condition);
    CHECK(back.samples[i].trajectory_id == set.samples[i].trajectory_id);
    CHECK(back.samples[i].node_index == set.samples[i].node_index);
  }
  CHECK(format_angle_csv(back) == format_angle_csv(set));
  CHECK_THROWS_AS(parse_angle_csv("trajectory_id,condition,group,node_index,s,theta\nx,J,lower,0,abc,1\n"), DataError);
}

#include "nglare/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "nglare/error.hpp"
#include "nglare/io.hpp"
#include "nglare/parallel.hpp"

namespace nglare {

std::vector<std::optional<Eigen::VectorXd>> tangents(const GroupedTrajectory& traj, std::size_t group) {
  if (group >= traj.groups.size()) throw ConfigError("record '" + traj.id + "': group index out of range");
  const Eigen::MatrixXd& h = traj.groups[group];
  const double scale = h.rowwise().norm().maxCoeff();
  const double tol = kRelativeStepTolerance * scale;
  std::vector<std::optional<Eigen::VectorXd>> out;
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(0, h.rows() - 1)));
  for (Eigen::Index t = 0; t + 1 < h.rows(); ++t) {
    Eigen::VectorXd step = (h.row(t + 1) - h.row(t)).transpose();
    const double len = step.norm();
    if (len <= tol || len == 0.0) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(step / len);
    }
  }
  return out;
}

namespace {

double clamped_arccos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

}  // namespace

std::vector<AngleSample> turning_angles(const GroupedTrajectory& traj, const BenignManifold& m, AngleSpace space) {
  if (!traj.standardized())
    throw DataError("record '" + traj.id + "': trajectory is not standardized", "run standardize_progress first");
  const std::size_t g = m.group;
  if (g >= traj.groups.size())
    throw ConfigError("record '" + traj.id + "': manifold group " + std::to_string(g) + " not present");
  if (!m.group_label.empty() && g < traj.group_labels.size() && traj.group_labels[g] != m.group_label)
    throw ConfigError("record '" + traj.id + "': manifold group '" + m.group_label + "' does not match '" +
                      traj.group_labels[g] + "'");
  const Eigen::MatrixXd& h = traj.groups[g];
  const auto& s = traj.progress[g];
  const auto tau = tangents(traj, g);

  std::vector<AngleSample> out;
  out.reserve(tau.size());
  for (std::size_t t = 0; t < tau.size(); ++t) {
    AngleSample a;
    a.s = s[t];
    a.group = g;
    a.condition = traj.condition;
    a.trajectory_id = traj.id;
    a.node_index = t;
    const Eigen::VectorXd ht = h.row(static_cast<Eigen::Index>(t)).transpose();
    const Eigen::VectorXd r = residual(m, ht);
    const double rnorm = r.norm();
    if (tau[t] && rnorm > m.on_manifold_tolerance && rnorm > 0.0) {
      if (space == AngleSpace::Ambient) {
        a.theta = clamped_arccos(tau[t]->dot(r) / rnorm);
      } else {
        const Eigen::VectorXd hn = h.row(static_cast<Eigen::Index>(t + 1)).transpose();
        const Eigen::VectorXd dz = whiten(m, hn) - whiten(m, ht);
        const Eigen::VectorXd dr = residual(m, hn) - r;
        const double len = std::sqrt(dz.squaredNorm() + dr.squaredNorm());
        if (len > 0.0) a.theta = clamped_arccos(dr.dot(r) / (len * rnorm));
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::array<std::size_t, 4> AngleSet::missing_counts() const {
  std::array<std::size_t, 4> c{};
  for (const auto& a : samples)
    if (!a.theta) ++c[condition_index(a.condition)];
  return c;
}

std::array<std::size_t, 4> AngleSet::present_counts() const {
  std::array<std::size_t, 4> c{};
  for (const auto& a : samples)
    if (a.theta) ++c[condition_index(a.condition)];
  return c;
}

AngleSet compute_angles(std::span<const GroupedTrajectory> trajectories, std::span<const BenignManifold> manifolds,
                        AngleSpace space, std::size_t threads) {
  AngleSet set;
  for (const auto& m : manifolds) set.group_labels.push_back(m.group_label);
  std::vector<std::vector<AngleSample>> per_traj(trajectories.size());
  parallel_for(trajectories.size(), threads, [&](std::size_t i) {
    for (const auto& m : manifolds) {
      auto angles = turning_angles(trajectories[i], m, space);
      per_traj[i].insert(per_traj[i].end(), std::make_move_iterator(angles.begin()),
                         std::make_move_iterator(angles.end()));
    }
  });
  for (auto& v : per_traj)
    set.samples.insert(set.samples.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return set;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& text, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw DataError("angle CSV line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return v;
}

}  // namespace

std::string format_angle_csv(const AngleSet& angles) {
  std::string out = "trajectory_id,condition,group,node_index,s,theta\n";
  for (const auto& a : angles.samples) {
    out += a.trajectory_id;
    out += ',';
    out += to_char(a.condition);
    out += ',';
    out += angles.group_labels.at(a.group);
    out += ',';
    out += std::to_string(a.node_index);
    out += ',';
    out += format_double(a.s);
    out += ',';
    if (a.theta) out += format_double(*a.theta);
    out += '\n';
  }
  return out;
}

void write_angle_csv(const std::filesystem::path& path, const AngleSet& angles) {
  io::write_file_atomic(path, format_angle_csv(angles));
}

AngleSet parse_angle_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     std::vector<std::string>{"trajectory_id", "condition", "group", "node_index", "s",
                                                              "theta"})
    throw DataError("angle CSV has an unexpected header", "expected trajectory_id,condition,group,node_index,s,theta");
  AngleSet set;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 6) throw DataError("angle CSV line " + std::to_string(line_no) + ": expected 6 fields");
    AngleSample a;
    a.trajectory_id = f[0];
    a.condition = parse_condition(f[1]);
    auto it = std::find(set.group_labels.begin(), set.group_labels.end(), f[2]);
    if (it == set.group_labels.end()) {
      set.group_labels.push_back(f[2]);
      a.group = set.group_labels.size() - 1;
    } else {
      a.group = static_cast<std::size_t>(it - set.group_labels.begin());
    }
    a.node_index = static_cast<std::size_t>(parse_double(f[3], line_no));
    a.s = parse_double(f[4], line_no);
    if (!f[5].empty()) {
      const double theta = parse_double(f[5], line_no);
      if (!(theta >= 0.0 && theta <= std::numbers::pi))
        throw DataError("angle CSV line " + std::to_string(line_no) + ": theta outside [0, pi]");
      a.theta = theta;
    }
    set.samples.push_back(std::move(a));
  }
  return set;
}

AngleSet read_angle_csv(const std::filesystem::path& path) { return parse_angle_csv(io::read_file(path)); }

}  // namespace nglare

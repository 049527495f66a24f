#include "nglare/synthgen.hpp"

#include <cmath>
#include <cstdio>

#include "nglare/error.hpp"
#include "nglare/random.hpp"

namespace nglare {

std::string to_string(DriftSchedule s) {
  switch (s) {
    case DriftSchedule::Quadratic: return "quadratic";
    case DriftSchedule::Linear: return "linear";
    case DriftSchedule::Step: return "step";
  }
  return "quadratic";
}

DriftSchedule parse_drift_schedule(const std::string& s) {
  if (s == "quadratic") return DriftSchedule::Quadratic;
  if (s == "linear") return DriftSchedule::Linear;
  if (s == "step") return DriftSchedule::Step;
  throw ConfigError("unknown drift schedule '" + s + "'", "use quadratic, linear or step");
}

double schedule_value(DriftSchedule s, double progress, double step_at) {
  switch (s) {
    case DriftSchedule::Quadratic: return progress * progress;
    case DriftSchedule::Linear: return progress;
    case DriftSchedule::Step: return progress >= step_at ? 1.0 : 0.0;
  }
  return 0.0;
}

void SyntheticSpec::validate() const {
  if (dim < 2) throw ConfigError("synthetic dim must be at least 2");
  if (true_rank < 1 || true_rank + 1 > dim)
    throw ConfigError("synthetic true_rank must satisfy 1 <= r_true < d (one direction is reserved for drift)");
  if (num_nodes < 2) throw ConfigError("synthetic trajectories need at least 2 nodes");
  if (num_layers < 1) throw ConfigError("synthetic num_layers must be positive");
  if (n_per_condition < 1) throw ConfigError("synthetic n_per_condition must be positive");
  for (double v : {drift, noise, subspace_scale, step_scale, drift_scale, refusal_offset, refusal_pull, plain_drift})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("synthetic magnitudes must be finite and non-negative");
  if (collapse_at && !(*collapse_at > 0.0 && *collapse_at <= 1.0)) throw ConfigError("collapse_at must lie in (0, 1]");
  if (!(collapse_strength >= 0.0 && collapse_strength <= 1.0)) throw ConfigError("collapse_strength must lie in [0, 1]");
}

namespace {

double refusal_base(const SyntheticSpec& spec, double s) { return spec.refusal_offset * (1.0 - spec.refusal_pull * s); }

double jailbreak_profile(const SyntheticSpec& spec, double s) {
  return spec.drift * spec.drift_scale * schedule_value(spec.schedule, s, spec.step_at);
}

}  // namespace

std::size_t collapsed_count(const SyntheticSpec& spec) {
  if (!spec.collapse_at) return 0;
  return static_cast<std::size_t>(std::llround(spec.collapse_strength * static_cast<double>(spec.n_per_condition)));
}

double off_subspace_coordinate(const SyntheticSpec& spec, Condition c, double s, bool collapsed) {
  switch (c) {
    case Condition::Benign: return 0.0;
    case Condition::Jailbreak: return jailbreak_profile(spec, s);
    case Condition::PlainQuery: return spec.plain_drift * s;
    case Condition::IdealRefusal: {
      if (!collapsed || !spec.collapse_at || s <= *spec.collapse_at) return refusal_base(spec, s);
      const double c0 = *spec.collapse_at;
      return refusal_base(spec, c0) + jailbreak_profile(spec, s) - jailbreak_profile(spec, c0);
    }
  }
  return 0.0;
}

SyntheticSuite generate_suite(const SyntheticSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto r = static_cast<Eigen::Index>(spec.true_rank);

  SyntheticSuite suite;
  {
    Rng rng(derive_seed(spec.seed, 0xBA515ULL));
    Eigen::MatrixXd g(d, r + 1);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(d, r + 1);
    suite.subspace_basis = q.leftCols(r);
    suite.drift_direction = q.col(r);
  }

  TrajectoryContainer& c = suite.container;
  c.model_id = spec.model_id;
  c.num_layers = spec.num_layers;
  c.hidden_size = spec.dim;
  const std::size_t T = spec.num_nodes;
  const std::size_t L = spec.num_layers;

  for (Condition cond : kAllConditions) {
    for (std::size_t k = 0; k < spec.n_per_condition; ++k) {
      // R twins replay the in-subspace walk of the J record with the same index.
      const Condition walk_cond = cond == Condition::IdealRefusal ? Condition::Jailbreak : cond;
      Rng walk(derive_seed(spec.seed, static_cast<std::uint64_t>(to_char(walk_cond)), k, 1));
      Rng noise(derive_seed(spec.seed, static_cast<std::uint64_t>(to_char(cond)), k, 2));

      RawTrajectory rec;
      char id[32];
      std::snprintf(id, sizeof(id), "%c%04zu", to_char(cond), k);
      rec.id = id;
      rec.condition = cond;
      rec.model_id = spec.model_id;
      rec.num_nodes = T;
      rec.num_layers = L;
      rec.hidden_size = spec.dim;
      rec.values.reserve(T * L * spec.dim);

      const bool collapsed = cond == Condition::IdealRefusal && spec.collapse_at && k < collapsed_count(spec);

      Eigen::VectorXd a(r);
      for (Eigen::Index i = 0; i < r; ++i) a(i) = spec.subspace_scale * walk.normal();
      for (std::size_t t = 0; t < T; ++t) {
        if (t > 0)
          for (Eigen::Index i = 0; i < r; ++i) a(i) += spec.step_scale * walk.normal();
        const double s = static_cast<double>(t) / static_cast<double>(T - 1);
        Eigen::VectorXd h = suite.subspace_basis * a + off_subspace_coordinate(spec, cond, s, collapsed) * suite.drift_direction;
        for (Eigen::Index i = 0; i < d; ++i) h(i) += spec.noise * noise.normal();
        for (std::size_t l = 0; l < L; ++l)
          for (Eigen::Index i = 0; i < d; ++i)
            rec.values.push_back(static_cast<float>(h(i) + spec.noise * noise.normal()));
      }
      c.records.push_back(std::move(rec));
    }
  }
  return suite;
}

SyntheticSpec spec_for_safety_level(const SyntheticSpec& base, double level, std::size_t model_index,
                                    std::uint64_t seed) {
  if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("safety levels must lie in [0, 1]");
  SyntheticSpec s = base;
  s.drift = 0.25 + level;
  s.collapse_at = 0.5 + 0.5 * level;
  s.collapse_strength = 1.0 - level;
  s.seed = derive_seed(seed, 0x4D0DE1ULL, model_index);
  char id[32];
  std::snprintf(id, sizeof(id), "model-%02zu", model_index);
  s.model_id = id;
  return s;
}

ModelSuite generate_model_suite(const SyntheticSpec& base, const std::vector<double>& safety_levels,
                                std::uint64_t seed) {
  if (safety_levels.empty()) throw ConfigError("model suite needs at least one safety level");
  ModelSuite suite;
  suite.safety_levels = safety_levels;
  for (std::size_t i = 0; i < safety_levels.size(); ++i)
    suite.models.push_back(generate_suite(spec_for_safety_level(base, safety_levels[i], i, seed)));
  return suite;
}

}  // namespace nglare

#include "nglare/costsim.hpp"

#include <cmath>

#include "nglare/error.hpp"

namespace nglare {

void CostParams::validate() const {
  for (double v : {offline_turns, redteam_turns, attacker_tokens, subject_tokens, evaluator_tokens,
                   attacker_seconds_per_token, subject_seconds_per_token, evaluator_seconds_per_token,
                   offline_jss_seconds, benign_construction_seconds})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("cost parameters must be finite and non-negative");
}

double token_cost_ours(const CostParams& p) {
  p.validate();
  return static_cast<double>(p.targets) * p.offline_turns;
}

RoleTokens baseline_role_tokens(const CostParams& p) {
  p.validate();
  const double steps = static_cast<double>(p.targets) * p.redteam_turns;
  return {steps * p.attacker_tokens, steps * p.subject_tokens, steps * p.evaluator_tokens};
}

double token_cost_baseline(const CostParams& p) {
  p.validate();
  return static_cast<double>(p.targets) * p.redteam_turns * (p.attacker_tokens + p.subject_tokens + p.evaluator_tokens);
}

double cost_ratio(const CostParams& p) {
  const double base = token_cost_baseline(p);
  if (!(base > 0.0)) throw UndefinedMetricError("cost ratio undefined: baseline token cost is zero");
  return token_cost_ours(p) / base;
}

TimeCost time_cost(const CostParams& p) {
  const RoleTokens roles = baseline_role_tokens(p);
  TimeCost t;
  t.baseline_attacker = roles.attacker * p.attacker_seconds_per_token;
  t.baseline_subject = roles.subject * p.subject_seconds_per_token;
  t.baseline_evaluator = roles.evaluator * p.evaluator_seconds_per_token;
  t.baseline_total = t.baseline_attacker + t.baseline_subject + t.baseline_evaluator;
  t.ours_forward = token_cost_ours(p) * p.subject_seconds_per_token;
  t.ours_offline_jss = p.offline_jss_seconds;
  t.ours_benign_construction = p.benign_construction_seconds;
  t.ours_total = t.ours_forward + t.ours_offline_jss + t.ours_benign_construction;
  return t;
}

}  // namespace nglare

#pragma once

#include <cstdint>

namespace nglare {

// Mean per-target quantities for the two evaluation pipelines.
// One forward pass of the subject model counts as one token-equivalent.
struct CostParams {
  std::uint64_t targets = 0;      // N
  double offline_turns = 0.0;     // T_offline: forward passes per target, ours
  double redteam_turns = 0.0;     // T_r
  double attacker_tokens = 0.0;   // L_r per step
  double subject_tokens = 0.0;    // L_s per step
  double evaluator_tokens = 0.0;  // L_e per step
  double attacker_seconds_per_token = 0.0;
  double subject_seconds_per_token = 0.0;
  double evaluator_seconds_per_token = 0.0;
  // Terms the comparison normally neglects; zero unless supplied.
  double offline_jss_seconds = 0.0;
  double benign_construction_seconds = 0.0;

  void validate() const;
};

double token_cost_ours(const CostParams& p);
double token_cost_baseline(const CostParams& p);
double cost_ratio(const CostParams& p);

struct RoleTokens {
  double attacker = 0.0;
  double subject = 0.0;
  double evaluator = 0.0;
  double total() const { return attacker + subject + evaluator; }
};

RoleTokens baseline_role_tokens(const CostParams& p);

struct TimeCost {
  double baseline_attacker = 0.0;
  double baseline_subject = 0.0;
  double baseline_evaluator = 0.0;
  double baseline_total = 0.0;
  double ours_forward = 0.0;
  double ours_offline_jss = 0.0;
  double ours_benign_construction = 0.0;
  double ours_total = 0.0;
};

TimeCost time_cost(const CostParams& p);

}  // namespace nglare

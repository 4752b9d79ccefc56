#pragma once

#include "samarl/env/ocean_env.hpp"

#include <span>

namespace samarl::reward {

using env::Assignment;

struct RewardCoefficients {
  double k_track = 1.0;
  double k_form = 0.5;
  double k_smooth = 0.1;
  double k_vel = 0.2;

  void validate() const;
};

/// Four components plus the scene/general partition fed to the two critics.
struct RewardBreakdown {
  double r_track = 0.0;
  double r_form = 0.0;
  double r_smooth = 0.0;
  double r_vel = 0.0;
  double r_scene = 0.0;    // r_track + r_vel
  double r_general = 0.0;  // r_form + r_smooth
  double r_total = 0.0;    // r_scene + r_general
};

/// Balanced greedy matching: repeatedly takes the globally nearest
/// (unassigned AUV, target with spare capacity) pair. Ties go to the lower
/// AUV id, then the lower target id.
Assignment assign_targets(const env::WorldState& world, int n_targets);

/// k_track / (1 + d / d_target).
double tracking_reward(double d, const RewardCoefficients& coeffs, double d_target);

/// -k_form * sum over peers of max(0, d_auv - d_ij).
double formation_reward(std::span<const Vec3> positions, int i, const RewardCoefficients& coeffs, double d_auv);

/// -k_smooth * |v_t - v_prev|^2.
double smoothness_reward(const Vec3& v_t, const Vec3& v_prev, const RewardCoefficients& coeffs);

/// -k_vel * |v_auv - v_target|.
double velocity_consistency_reward(const Vec3& v_auv, const Vec3& v_target, const RewardCoefficients& coeffs);

RewardBreakdown compose_reward(const env::WorldState& world, int auv_id, const Assignment& assignment,
                               const RewardCoefficients& coeffs, const env::ScenarioConfig& config);

/// True iff every target index appears and per-target counts lie in
/// [floor(n/m), ceil(n/m)].
bool is_balanced(const Assignment& assignment, int n_targets);

}  // namespace samarl::reward

#include "samarl/reward/reward.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace samarl::reward {

void RewardCoefficients::validate() const {
  if (k_track < 0.0 || k_form < 0.0 || k_smooth < 0.0 || k_vel < 0.0) {
    throw ConfigError("reward coefficients must be >= 0");
  }
}

Assignment assign_targets(const env::WorldState& world, int n_targets) {
  const int n = static_cast<int>(world.auvs.size());
  require(n_targets >= 1 && n_targets <= static_cast<int>(world.targets.size()),
          "assign_targets: n_targets out of range");
  require(n >= n_targets, "assign_targets: need at least as many AUVs as targets");

  const int floor_cap = n / n_targets;
  const int extra_slots = n % n_targets;  // targets allowed to reach floor_cap + 1
  std::vector<int> count(static_cast<std::size_t>(n_targets), 0);
  int extras_used = 0;
  Assignment out(static_cast<std::size_t>(n), -1);

  for (int round = 0; round < n; ++round) {
    double best = std::numeric_limits<double>::infinity();
    int best_auv = -1;
    int best_tgt = -1;
    for (int i = 0; i < n; ++i) {
      if (out[static_cast<std::size_t>(i)] >= 0) continue;
      for (int k = 0; k < n_targets; ++k) {
        const int c = count[static_cast<std::size_t>(k)];
        const bool open = c < floor_cap || (c == floor_cap && extras_used < extra_slots);
        if (!open) continue;
        const double d = (world.auvs[static_cast<std::size_t>(i)].position -
                          world.targets[static_cast<std::size_t>(k)].position).squaredNorm();
        // Strict < keeps the first (lowest auv, then lowest target) among ties.
        if (d < best) {
          best = d;
          best_auv = i;
          best_tgt = k;
        }
      }
    }
    if (count[static_cast<std::size_t>(best_tgt)] == floor_cap) ++extras_used;
    ++count[static_cast<std::size_t>(best_tgt)];
    out[static_cast<std::size_t>(best_auv)] = best_tgt;
  }
  return out;
}

bool is_balanced(const Assignment& assignment, int n_targets) {
  const int n = static_cast<int>(assignment.size());
  if (n_targets < 1 || n < n_targets) return false;
  std::vector<int> count(static_cast<std::size_t>(n_targets), 0);
  for (int t : assignment) {
    if (t < 0 || t >= n_targets) return false;
    ++count[static_cast<std::size_t>(t)];
  }
  const int lo = n / n_targets;
  const int hi = (n + n_targets - 1) / n_targets;
  return std::all_of(count.begin(), count.end(), [&](int c) { return c >= lo && c <= hi; });
}

double tracking_reward(double d, const RewardCoefficients& coeffs, double d_target) {
  require(d >= 0.0, "tracking_reward: distance must be >= 0");
  return coeffs.k_track / (1.0 + d / d_target);
}

double formation_reward(std::span<const Vec3> positions, int i, const RewardCoefficients& coeffs, double d_auv) {
  require(i >= 0 && static_cast<std::size_t>(i) < positions.size(), "formation_reward: bad index");
  double shortfall = 0.0;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (static_cast<int>(j) == i) continue;
    shortfall += std::max(0.0, d_auv - (positions[j] - positions[static_cast<std::size_t>(i)]).norm());
  }
  return -coeffs.k_form * shortfall;
}

double smoothness_reward(const Vec3& v_t, const Vec3& v_prev, const RewardCoefficients& coeffs) {
  return -coeffs.k_smooth * (v_t - v_prev).squaredNorm();
}

double velocity_consistency_reward(const Vec3& v_auv, const Vec3& v_target, const RewardCoefficients& coeffs) {
  return -coeffs.k_vel * (v_auv - v_target).norm();
}

RewardBreakdown compose_reward(const env::WorldState& world, int auv_id, const Assignment& assignment,
                               const RewardCoefficients& coeffs, const env::ScenarioConfig& config) {
  require(auv_id >= 0 && static_cast<std::size_t>(auv_id) < world.auvs.size(), "compose_reward: bad auv id");
  require(assignment.size() == world.auvs.size(), "compose_reward: assignment must cover every AUV");
  const int tid = assignment[static_cast<std::size_t>(auv_id)];
  require(tid >= 0 && static_cast<std::size_t>(tid) < world.targets.size(), "compose_reward: bad target");

  const auto& auv = world.auvs[static_cast<std::size_t>(auv_id)];
  const auto& tgt = world.targets[static_cast<std::size_t>(tid)];
  std::vector<Vec3> positions;
  positions.reserve(world.auvs.size());
  for (const auto& a : world.auvs) positions.push_back(a.position);

  RewardBreakdown r;
  r.r_track = tracking_reward((tgt.position - auv.position).norm(), coeffs, config.d_target);
  r.r_form = formation_reward(positions, auv_id, coeffs, config.d_auv);
  r.r_smooth = smoothness_reward(auv.velocity, auv.prev_velocity, coeffs);
  r.r_vel = velocity_consistency_reward(auv.velocity, tgt.velocity, coeffs);
  r.r_scene = r.r_track + r.r_vel;
  r.r_general = r.r_form + r.r_smooth;
  r.r_total = r.r_scene + r.r_general;
  return r;
}

}  // namespace samarl::reward

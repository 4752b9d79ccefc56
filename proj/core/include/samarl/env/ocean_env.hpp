#pragma once

// Particle ocean: double-integrator AUVs behind a first-order actuator,
// Ornstein-Uhlenbeck targets, optional current/sensor interference.

#include "samarl/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace samarl::env {

struct ScenarioConfig {
  int n_auvs = 4;
  int n_targets = 2;
  bool interference = false;
  Vec3 bounds{50.0, 50.0, 50.0};  // half-extents, m
  double dt = 0.1;                 // s
  int episode_len = 500;           // ticks
  double v_max = 2.0;              // m/s
  double v_target_max = 1.0;       // m/s
  double a_max = 1.0;              // m/s^2
  double d_target = 5.0;           // m
  double d_auv = 4.0;              // m
  double actuator_tau = 0.5;       // s
  double c_drag = 0.3;             // 1/s
  double sigma_obs = 0.5;          // m, sensor noise under interference
  double target_theta = 0.5;       // OU mean reversion, 1/s
  double target_sigma = 0.5;       // OU diffusion, m/s/sqrt(s)
  double current_theta = 0.5;      // 1/s
  double current_sigma = 0.1;      // m/s^2/sqrt(s)
  std::uint64_t seed = 1;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
};

struct AuvState {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 actuator_accel = Vec3::Zero();
  Vec3 prev_velocity = Vec3::Zero();

  bool operator==(const AuvState&) const = default;
};

struct TargetState {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 ou_state = Vec3::Zero();

  bool operator==(const TargetState&) const = default;
};

struct DisturbanceState {
  Vec3 current_force = Vec3::Zero();
  double obs_noise_sigma = 0.0;
  bool enabled = false;

  bool operator==(const DisturbanceState&) const = default;
};

struct WorldState {
  int tick = 0;
  std::vector<AuvState> auvs;
  std::vector<TargetState> targets;
  DisturbanceState disturbance;
  Rng rng;

  bool operator==(const WorldState&) const = default;
};

/// auv index -> target index.
using Assignment = std::vector<int>;

struct Action {
  Vec3 command = Vec3::Zero();

  /// Componentwise clamp to [-1, 1].
  [[nodiscard]] Action clamped() const;
};

inline constexpr int kObservationDim = 15;
using ObsVector = Eigen::Matrix<double, kObservationDim, 1>;

struct Observation {
  Vec3 ego_velocity = Vec3::Zero();
  Vec3 rel_target_pos = Vec3::Zero();
  Vec3 rel_target_vel = Vec3::Zero();
  std::array<Vec3, 2> rel_neighbor_pos{Vec3::Zero(), Vec3::Zero()};

  [[nodiscard]] ObsVector flatten() const;
  static Observation unflatten(const ObsVector& v);
};

WorldState init_world(const ScenarioConfig& config);

/// First-order actuator lag followed by saturation at a_max.
Vec3 apply_actuation(const Action& cmd, const Vec3& actuator_accel, const ScenarioConfig& config);

WorldState step_world(const WorldState& world, std::span<const Action> joint_actions,
                      const ScenarioConfig& config);

TargetState target_step(const TargetState& target, Rng& rng, const ScenarioConfig& config);

DisturbanceState sample_disturbance(const DisturbanceState& state, Rng& rng,
                                    const ScenarioConfig& config);

Observation observe(const WorldState& world, int auv_id, const Assignment& assignment, Rng& rng);

/// Reflects a coordinate that left [-bound, bound] and flips the matching
/// velocity component.
void reflect_at_bounds(Vec3& position, Vec3& velocity, const Vec3& bounds);

}  // namespace samarl::env

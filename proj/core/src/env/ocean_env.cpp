#include "samarl/env/ocean_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace samarl::env {
namespace {

constexpr int kPlacementRetries = 10000;

Vec3 normal3(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return {x, y, z};
}

Vec3 uniform_in(const Vec3& half, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double x = u(rng);
  const double y = u(rng);
  const double z = u(rng);
  return {x * half.x(), y * half.y(), z * half.z()};
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("scenario: " + msg); };
  if (n_targets < 1) fail("n_targets must be >= 1");
  if (n_auvs < n_targets) fail("n_auvs must be >= n_targets");
  if (n_auvs > 255 || n_targets > 255) fail("at most 255 AUVs and targets");
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (episode_len < 1) fail("episode_len must be >= 1");
  if (!(bounds.minCoeff() > 0.0) || !bounds.allFinite()) fail("bounds must be positive");
  if (!(v_max > 0.0) || !(v_target_max > 0.0) || !(a_max > 0.0)) fail("speed/accel limits must be > 0");
  if (!(v_target_max < v_max)) fail("v_target_max must be < v_max (targets must be catchable)");
  if (!(d_target > 0.0) || !(d_auv > 0.0)) fail("d_target and d_auv must be > 0");
  if (!(actuator_tau > 0.0)) fail("actuator_tau must be > 0");
  if (c_drag < 0.0 || sigma_obs < 0.0) fail("c_drag and sigma_obs must be >= 0");
  if (target_theta < 0.0 || target_sigma < 0.0 || current_theta < 0.0 || current_sigma < 0.0) {
    fail("OU parameters must be >= 0");
  }
}

Action Action::clamped() const { return Action{command.cwiseMax(-1.0).cwiseMin(1.0)}; }

ObsVector Observation::flatten() const {
  ObsVector v;
  v << ego_velocity, rel_target_pos, rel_target_vel, rel_neighbor_pos[0], rel_neighbor_pos[1];
  return v;
}

Observation Observation::unflatten(const ObsVector& v) {
  Observation o;
  o.ego_velocity = v.segment<3>(0);
  o.rel_target_pos = v.segment<3>(3);
  o.rel_target_vel = v.segment<3>(6);
  o.rel_neighbor_pos[0] = v.segment<3>(9);
  o.rel_neighbor_pos[1] = v.segment<3>(12);
  return o;
}

WorldState init_world(const ScenarioConfig& config) {
  config.validate();
  WorldState world;
  world.rng = derive_stream(config.seed, 0);
  world.auvs.resize(static_cast<std::size_t>(config.n_auvs));
  for (int i = 0; i < config.n_auvs; ++i) {
    auto& auv = world.auvs[static_cast<std::size_t>(i)];
    auv.id = i;
    int attempt = 0;
    for (; attempt < kPlacementRetries; ++attempt) {
      auv.position = uniform_in(config.bounds, world.rng);
      const bool spaced = std::all_of(world.auvs.begin(), world.auvs.begin() + i, [&](const AuvState& o) {
        return (o.position - auv.position).norm() >= config.d_auv;
      });
      if (spaced) break;
    }
    if (attempt == kPlacementRetries) {
      throw ConfigError("scenario: cannot place " + std::to_string(config.n_auvs) + " AUVs at spacing d_auv=" +
                        std::to_string(config.d_auv) + " inside the given bounds");
    }
  }
  world.targets.resize(static_cast<std::size_t>(config.n_targets));
  for (int k = 0; k < config.n_targets; ++k) {
    auto& t = world.targets[static_cast<std::size_t>(k)];
    t.id = k;
    t.position = uniform_in(config.bounds, world.rng);
  }
  world.disturbance.enabled = config.interference;
  world.disturbance.obs_noise_sigma = config.interference ? config.sigma_obs : 0.0;
  return world;
}

Vec3 apply_actuation(const Action& cmd, const Vec3& actuator_accel, const ScenarioConfig& config) {
  const double gain = std::min(1.0, config.dt / config.actuator_tau);
  const Vec3 demand = cmd.command * config.a_max;
  return clamp_norm(actuator_accel + (demand - actuator_accel) * gain, config.a_max);
}

void reflect_at_bounds(Vec3& position, Vec3& velocity, const Vec3& bounds) {
  for (int k = 0; k < 3; ++k) {
    const double b = bounds[k];
    if (position[k] > b) {
      position[k] = 2.0 * b - position[k];
      velocity[k] = -velocity[k];
    } else if (position[k] < -b) {
      position[k] = -2.0 * b - position[k];
      velocity[k] = -velocity[k];
    }
    position[k] = std::clamp(position[k], -b, b);
  }
}

WorldState step_world(const WorldState& world, std::span<const Action> joint_actions,
                      const ScenarioConfig& config) {
  require(joint_actions.size() == world.auvs.size(), "step_world: one action per AUV required");
  require(world.tick < config.episode_len, "step_world: episode already finished");

  WorldState next = world;
  const Vec3& current = world.disturbance.current_force;
  for (std::size_t i = 0; i < next.auvs.size(); ++i) {
    auto& auv = next.auvs[i];
    auv.actuator_accel = apply_actuation(joint_actions[i].clamped(), auv.actuator_accel, config);
    auv.prev_velocity = auv.velocity;
    const Vec3 accel = auv.actuator_accel + current - config.c_drag * auv.velocity;
    auv.velocity = clamp_norm(auv.velocity + accel * config.dt, config.v_max);
    auv.position += auv.velocity * config.dt;
    reflect_at_bounds(auv.position, auv.velocity, config.bounds);
  }
  for (auto& t : next.targets) t = target_step(t, next.rng, config);
  next.disturbance = sample_disturbance(world.disturbance, next.rng, config);
  ++next.tick;
  return next;
}

TargetState target_step(const TargetState& target, Rng& rng, const ScenarioConfig& config) {
  TargetState next = target;
  const Vec3 noise = normal3(rng);
  next.ou_state += -config.target_theta * target.ou_state * config.dt +
                   config.target_sigma * std::sqrt(config.dt) * noise;
  next.velocity = clamp_norm(next.ou_state, config.v_target_max);
  next.position += next.velocity * config.dt;
  Vec3 before = next.velocity;
  reflect_at_bounds(next.position, next.velocity, config.bounds);
  // Keep the driver pointing away from a wall it just bounced off.
  for (int k = 0; k < 3; ++k) {
    if (next.velocity[k] != before[k]) next.ou_state[k] = -next.ou_state[k];
  }
  return next;
}

DisturbanceState sample_disturbance(const DisturbanceState& state, Rng& rng, const ScenarioConfig& config) {
  DisturbanceState next = state;
  if (!state.enabled) {
    next.current_force = Vec3::Zero();
    next.obs_noise_sigma = 0.0;
    return next;
  }
  const Vec3 noise = normal3(rng);
  next.current_force += -config.current_theta * state.current_force * config.dt +
                        config.current_sigma * std::sqrt(config.dt) * noise;
  next.obs_noise_sigma = config.sigma_obs;
  return next;
}

Observation observe(const WorldState& world, int auv_id, const Assignment& assignment, Rng& rng) {
  require(auv_id >= 0 && static_cast<std::size_t>(auv_id) < world.auvs.size(), "observe: bad auv id");
  require(assignment.size() == world.auvs.size(), "observe: assignment must cover every AUV");
  const int target_id = assignment[static_cast<std::size_t>(auv_id)];
  require(target_id >= 0 && static_cast<std::size_t>(target_id) < world.targets.size(),
          "observe: AUV is not assigned to a valid target");

  const auto& self = world.auvs[static_cast<std::size_t>(auv_id)];
  const auto& tgt = world.targets[static_cast<std::size_t>(target_id)];
  Observation obs;
  obs.ego_velocity = self.velocity;
  obs.rel_target_pos = tgt.position - self.position;
  obs.rel_target_vel = tgt.velocity - self.velocity;

  // Two nearest peers, ties to the lower id.
  std::vector<std::pair<double, int>> peers;
  for (const auto& other : world.auvs) {
    if (other.id == auv_id) continue;
    peers.emplace_back((other.position - self.position).squaredNorm(), other.id);
  }
  std::sort(peers.begin(), peers.end());
  for (std::size_t s = 0; s < 2 && s < peers.size(); ++s) {
    obs.rel_neighbor_pos[s] = world.auvs[static_cast<std::size_t>(peers[s].second)].position - self.position;
  }

  const double sigma = world.disturbance.enabled ? world.disturbance.obs_noise_sigma : 0.0;
  if (sigma > 0.0) {
    obs.rel_target_pos += sigma * normal3(rng);
    for (std::size_t s = 0; s < 2 && s < peers.size(); ++s) obs.rel_neighbor_pos[s] += sigma * normal3(rng);
  }
  return obs;
}

}  // namespace samarl::env

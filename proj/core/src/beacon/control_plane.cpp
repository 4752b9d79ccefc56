#include "samarl/beacon/control_plane.hpp"

#include "samarl/reward/reward.hpp"

#include <algorithm>
#include <cmath>

namespace samarl::beacon {
namespace {

std::uint8_t error_flags(const env::AuvState& auv, const env::ScenarioConfig& cfg) {
  std::uint8_t f = kNominal;
  if (auv.actuator_accel.norm() >= cfg.a_max * (1.0 - 1e-9)) f |= kActuatorSaturated;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(auv.position[k]) >= cfg.bounds[k] * (1.0 - 1e-9)) f |= kBoundaryContact;
  }
  return f;
}

}  // namespace

ControlPlane::ControlPlane(const env::ScenarioConfig& scenario, const ControlPlaneConfig& cfg, Rng channel_rng)
    : scenario_(scenario), cfg_(cfg), channel_(cfg.channel, scenario.n_auvs, std::move(channel_rng)) {
  if (cfg.control_cycle < 1 || cfg.control_cycle > 0xFFFF) throw ConfigError("control_cycle must lie in [1, 65535]");
  if (cfg.global_cycle_multiplier < 1) throw ConfigError("global_cycle_multiplier must be >= 1");
}

void ControlPlane::refresh_positions(const env::WorldState& world) {
  positions_.resize(world.auvs.size() + 2);
  positions_[kUsvNode] = Vec3(0.0, 0.0, scenario_.bounds.z());
  positions_[kLcNode] = Vec3::Zero();
  for (std::size_t i = 0; i < world.auvs.size(); ++i) positions_[auv_node(static_cast<int>(i))] = world.auvs[i].position;
}

void ControlPlane::start(const env::WorldState& world, const env::Assignment& initial) {
  const auto n = world.auvs.size();
  require(initial.size() == n, "ControlPlane::start: assignment size mismatch");
  lc_ = LcAuvState{};
  lc_.control_cycle = cfg_.control_cycle;
  lc_.assignment = initial;
  lc_.staleness.assign(n, 0);
  lc_.replied.assign(n, false);
  lc_.delivered_upto.assign(n, world.tick);
  usv_ = UsvGcState{};
  usv_.global_cycle = cfg_.control_cycle * cfg_.global_cycle_multiplier;
  followers_.assign(n, FollowerState{});
  for (std::size_t i = 0; i < n; ++i) {
    followers_[i].assigned_target = initial[i];
    followers_[i].sent_upto = world.tick;
  }
  pending_.clear();
  reply_ranges_.clear();
  epoch_ = last_time_ - world.tick * scenario_.dt;
  refresh_positions(world);
  const double t = now(world);
  usv_gc_cycle(world, t);
  lc_auv_cycle(world, t);
}

env::Assignment ControlPlane::follower_assignment() const {
  env::Assignment a(followers_.size());
  for (std::size_t i = 0; i < followers_.size(); ++i) a[i] = followers_[i].assigned_target;
  return a;
}

void ControlPlane::submit(marl::Transition t, const CommitSink& sink) {
  for (std::size_t i = 0; i < followers_.size(); ++i) followers_[i].last_reward = t.r_scene[i] + t.r_general[i];
  if (!cfg_.comms_gated) {
    ++committed_;
    sink(std::move(t));
    return;
  }
  pending_.push_back(Pending{std::move(t), std::vector<bool>(followers_.size(), false)});
}

void ControlPlane::usv_gc_cycle(const env::WorldState& world, double t_now) {
  if (world.tick % usv_.global_cycle != 0 || world.tick >= scenario_.episode_len) return;
  Beacon b;
  b.src = kUsvNode;
  b.dst = kLcNode;
  b.tick = static_cast<std::uint32_t>(world.tick);
  GloRequest req;
  req.mission_type = kMissionTracking;
  req.task_number = static_cast<std::uint16_t>(scenario_.n_targets);
  req.d_target = static_cast<float>(scenario_.d_target);
  req.d_auv = static_cast<float>(scenario_.d_auv);
  req.episode_len = static_cast<std::uint32_t>(scenario_.episode_len);
  b.payload = req;
  channel_.send(b, positions_, t_now);
  ++usv_.requests_sent;
}

void ControlPlane::lc_auv_cycle(const env::WorldState& world, double t_now) {
  if (world.tick % lc_.control_cycle != 0 || world.tick >= scenario_.episode_len) return;
  if (lc_.requests_broadcast > 0) {
    for (std::size_t i = 0; i < lc_.replied.size(); ++i) {
      lc_.staleness[i] = lc_.replied[i] ? 0 : lc_.staleness[i] + 1;
      lc_.replied[i] = false;
    }
  }
  lc_.assignment = reward::assign_targets(world, scenario_.n_targets);
  Beacon b;
  b.src = kLcNode;
  b.dst = kBroadcast;
  b.tick = static_cast<std::uint32_t>(world.tick);
  LocRequest req;
  for (int t : lc_.assignment) req.local_task.push_back(static_cast<std::uint8_t>(t));
  req.control_cycle = static_cast<std::uint16_t>(lc_.control_cycle);
  b.payload = std::move(req);
  std::vector<std::uint16_t> receivers;
  for (std::size_t i = 0; i < followers_.size(); ++i) receivers.push_back(auv_node(static_cast<int>(i)));
  channel_.broadcast(b, receivers, positions_, t_now);
  ++lc_.requests_broadcast;
}

void ControlPlane::send_reply(int auv, const env::WorldState& world, double t_now, int upto_tick) {
  auto& f = followers_[static_cast<std::size_t>(auv)];
  const auto& state = world.auvs[static_cast<std::size_t>(auv)];
  Beacon b;
  b.src = auv_node(auv);
  b.dst = kLcNode;
  b.tick = static_cast<std::uint32_t>(upto_tick);
  LocReply rep;
  for (int k = 0; k < 3; ++k) {
    rep.auv_state[static_cast<std::size_t>(k)] = static_cast<float>(state.position[k]);
    rep.auv_state[static_cast<std::size_t>(k + 3)] = static_cast<float>(state.velocity[k]);
  }
  rep.instant_reward = static_cast<float>(f.last_reward);
  rep.error_flag = error_flags(state, scenario_);
  b.payload = rep;
  if (upto_tick > f.sent_upto) reply_ranges_[{auv, b.tick}] = f.sent_upto;
  f.sent_upto = upto_tick;
  channel_.send(b, positions_, t_now);
}

void ControlPlane::deliver(const Beacon& b, const env::WorldState& world, double t_now) {
  switch (b.kind()) {
    case BeaconKind::kGloRequest: {
      Beacon rep;
      rep.src = kLcNode;
      rep.dst = kUsvNode;
      rep.tick = static_cast<std::uint32_t>(world.tick);
      GloReply p;
      std::vector<Vec3> auv_pos(positions_.begin() + 2, positions_.end());
      p.cluster_topo = compute_topology(auv_pos, cfg_.channel.comm_range).to_bitmap();
      p.exe_progress = static_cast<float>(std::clamp(
          static_cast<double>(world.tick) / static_cast<double>(scenario_.episode_len), 0.0, 1.0));
      p.est_reward = static_cast<float>(lc_.est_reward());
      rep.payload = std::move(p);
      channel_.send(rep, positions_, t_now);
      break;
    }
    case BeaconKind::kGloReply: {
      const auto& p = std::get<GloReply>(b.payload);
      usv_.cluster_topo = p.cluster_topo;
      usv_.exe_progress = p.exe_progress;
      usv_.est_reward = p.est_reward;
      ++usv_.replies_received;
      break;
    }
    case BeaconKind::kLocRequest: {
      const int auv = b.dst - 2;
      const auto& p = std::get<LocRequest>(b.payload);
      followers_[static_cast<std::size_t>(auv)].assigned_target = p.local_task[static_cast<std::size_t>(auv)];
      send_reply(auv, world, t_now, world.tick);
      break;
    }
    case BeaconKind::kLocReply: {
      const int auv = b.src - 2;
      const auto ai = static_cast<std::size_t>(auv);
      const auto& p = std::get<LocReply>(b.payload);
      lc_.replied[ai] = true;
      ++lc_.replies_received;
      lc_.reward_sum += p.instant_reward;
      ++lc_.reward_count;
      const auto it = reply_ranges_.find({auv, b.tick});
      if (it != reply_ranges_.end()) {
        const int from = it->second;
        const int upto = static_cast<int>(b.tick);
        for (auto& pend : pending_) {
          if (pend.transition.tick >= from && pend.transition.tick < upto) pend.have[ai] = true;
        }
        lc_.delivered_upto[ai] = std::max(lc_.delivered_upto[ai], upto);
        reply_ranges_.erase(it);
      }
      break;
    }
  }
}

void ControlPlane::flush_pending(const CommitSink& sink, bool final) {
  while (!pending_.empty()) {
    auto& front = pending_.front();
    const bool complete = std::all_of(front.have.begin(), front.have.end(), [](bool h) { return h; });
    if (complete) {
      ++committed_;
      sink(std::move(front.transition));
      pending_.pop_front();
      continue;
    }
    // A follower whose later reply already arrived lost this tick's data.
    bool lost = final;
    if (!lost) {
      lost = true;
      for (std::size_t i = 0; i < front.have.size(); ++i) {
        if (!front.have[i] && lc_.delivered_upto[i] <= front.transition.tick) lost = false;
      }
    }
    if (!lost) break;
    ++dropped_incomplete_;
    pending_.pop_front();
  }
}

void ControlPlane::advance(const env::WorldState& world, const CommitSink& sink) {
  refresh_positions(world);
  const double t = now(world);
  last_time_ = t;
  for (const auto& b : channel_.poll(t)) deliver(b, world, t);
  if (cfg_.comms_gated) flush_pending(sink, false);
  usv_gc_cycle(world, t);
  lc_auv_cycle(world, t);
}

void ControlPlane::finish(const env::WorldState& world, const CommitSink& sink) {
  refresh_positions(world);
  double t = now(world);
  for (std::size_t i = 0; i < followers_.size(); ++i) send_reply(static_cast<int>(i), world, t, world.tick);
  while (channel_.in_flight() > 0) {
    t = std::max(t, channel_.next_delivery_time());
    for (const auto& b : channel_.poll(t)) deliver(b, world, t);
  }
  last_time_ = t;
  if (cfg_.comms_gated) flush_pending(sink, true);
}

}  // namespace samarl::beacon

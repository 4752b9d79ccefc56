#pragma once

// USV-GC / LC-AUV / follower beacon exchange on top of the acoustic channel.
//
// Node ids: 0 = USV-GC (surface, above the origin), 1 = LC-AUV (hub at the
// origin), 2 + i = follower AUV i.

#include "samarl/beacon/channel.hpp"
#include "samarl/marl/replay.hpp"

#include <deque>
#include <functional>
#include <map>
#include <vector>

namespace samarl::beacon {

inline constexpr std::uint16_t kUsvNode = 0;
inline constexpr std::uint16_t kLcNode = 1;
inline constexpr std::uint16_t auv_node(int i) { return static_cast<std::uint16_t>(i + 2); }

inline constexpr std::uint8_t kMissionTracking = 1;

struct LcAuvState {
  int control_cycle = 10;
  env::Assignment assignment;  // most recently issued
  std::vector<int> staleness;  // full cycles without a LocReply, per AUV
  std::vector<bool> replied;   // LocReply seen during the current cycle
  std::uint64_t requests_broadcast = 0;
  std::uint64_t replies_received = 0;
  double reward_sum = 0.0;
  std::uint64_t reward_count = 0;
  std::vector<int> delivered_upto;  // per AUV, first tick not yet covered by a delivered reply

  [[nodiscard]] double est_reward() const { return reward_count == 0 ? 0.0 : reward_sum / static_cast<double>(reward_count); }
};

struct UsvGcState {
  int global_cycle = 100;  // ticks
  std::vector<bool> cluster_topo;
  double exe_progress = 0.0;
  double est_reward = 0.0;
  std::uint64_t requests_sent = 0;
  std::uint64_t replies_received = 0;
};

struct FollowerState {
  int assigned_target = 0;
  int sent_upto = 0;  // first tick whose experience has not been sent yet
  double last_reward = 0.0;
};

struct ControlPlaneConfig {
  ChannelParams channel;
  int control_cycle = 10;
  int global_cycle_multiplier = 10;
  bool comms_gated = false;
};

/// Receives transitions as they enter the LC-AUV replay path.
using CommitSink = std::function<void(marl::Transition&&)>;

class ControlPlane {
 public:
  ControlPlane(const env::ScenarioConfig& scenario, const ControlPlaneConfig& cfg, Rng channel_rng);

  /// Resets role state for a new episode: the initial assignment is loaded
  /// into every follower and the tick-0 cycles are issued.
  void start(const env::WorldState& world, const env::Assignment& initial);

  /// Hands over the transition for tick t -> t+1. Non-gated: committed at
  /// once. Gated: held until every follower's LocReply covering it arrives.
  void submit(marl::Transition t, const CommitSink& sink);

  /// Runs deliveries and periodic cycles at the world's current tick.
  void advance(const env::WorldState& world, const CommitSink& sink);

  /// Final follower reports, then drains the channel. Incomplete gated
  /// transitions are discarded.
  void finish(const env::WorldState& world, const CommitSink& sink);

  void lc_auv_cycle(const env::WorldState& world, double t_now);
  void usv_gc_cycle(const env::WorldState& world, double t_now);

  [[nodiscard]] env::Assignment follower_assignment() const;
  [[nodiscard]] const LcAuvState& lc() const { return lc_; }
  [[nodiscard]] const UsvGcState& usv() const { return usv_; }
  [[nodiscard]] const std::vector<FollowerState>& followers() const { return followers_; }
  [[nodiscard]] const AcousticChannel& channel() const { return channel_; }
  [[nodiscard]] std::uint64_t dropped_incomplete() const { return dropped_incomplete_; }
  [[nodiscard]] std::uint64_t committed() const { return committed_; }
  [[nodiscard]] std::size_t pending() const { return pending_.size(); }

 private:
  struct Pending {
    marl::Transition transition;
    std::vector<bool> have;
  };

  void refresh_positions(const env::WorldState& world);
  double now(const env::WorldState& world) const { return epoch_ + world.tick * scenario_.dt; }
  void deliver(const Beacon& b, const env::WorldState& world, double t_now);
  void send_reply(int auv, const env::WorldState& world, double t_now, int upto_tick);
  void flush_pending(const CommitSink& sink, bool final);

  env::ScenarioConfig scenario_;
  ControlPlaneConfig cfg_;
  AcousticChannel channel_;
  std::vector<Vec3> positions_;
  LcAuvState lc_;
  UsvGcState usv_;
  std::vector<FollowerState> followers_;
  std::deque<Pending> pending_;
  // (auv, reply tick) -> first tick covered by that reply.
  std::map<std::pair<int, std::uint32_t>, int> reply_ranges_;
  double epoch_ = 0.0;    // channel time of the current episode's tick 0
  double last_time_ = 0.0;
  std::uint64_t dropped_incomplete_ = 0;
  std::uint64_t committed_ = 0;
};

}  // namespace samarl::beacon

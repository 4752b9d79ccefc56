#pragma once

// Acoustic channel as a discrete-event queue on the simulation clock.

#include "samarl/beacon/beacon.hpp"

#include <limits>
#include <queue>
#include <span>
#include <vector>

namespace samarl::beacon {

struct ChannelParams {
  double sound_speed = 1500.0;  // m/s
  double bitrate = 2000.0;      // bit/s
  double p_loss = 0.0;
  double comm_range = 1000.0;   // m

  void validate() const;
};

enum class DropReason : std::uint8_t { kNone = 0, kLoss = 1, kOutOfRange = 2 };

struct ChannelEvent {
  Beacon beacon;
  double send_time = 0.0;
  double deliver_time = 0.0;
  bool dropped = false;
  DropReason reason = DropReason::kNone;
  std::uint64_t seq = 0;  // send order, breaks deliver_time ties
};

/// Propagation plus serialization: distance / sound_speed + size_bits / bitrate.
double transmission_delay(const Vec3& src_pos, const Vec3& dst_pos, double size_bits, const ChannelParams& params);

struct CommTopology {
  int n = 0;
  std::vector<bool> adjacency;  // n x n, row-major

  [[nodiscard]] bool edge(int i, int j) const {
    return adjacency[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
  }
  /// Upper-triangle pairs (i < j) in lexicographic order.
  [[nodiscard]] std::vector<bool> to_bitmap() const;
  static CommTopology from_bitmap(int n, const std::vector<bool>& bits);
};

/// Edge iff pairwise distance <= comm_range.
CommTopology compute_topology(std::span<const Vec3> positions, double comm_range);

class AcousticChannel {
 public:
  AcousticChannel(ChannelParams params, int n_auvs, Rng rng);

  /// `positions` is indexed by node id. Out-of-range sends are recorded as
  /// dropped; every send consumes exactly one loss draw.
  ChannelEvent send(const Beacon& b, std::span<const Vec3> positions, double t_now);

  /// One logical broadcast, materialized as a copy per receiver with dst
  /// rewritten to that receiver.
  std::vector<ChannelEvent> broadcast(const Beacon& b, std::span<const std::uint16_t> receivers,
                                      std::span<const Vec3> positions, double t_now);

  /// Non-dropped beacons with deliver_time <= t_now not yet returned, in
  /// (deliver_time, send order). Throws ContractViolation if t_now regresses.
  std::vector<Beacon> poll(double t_now);

  [[nodiscard]] std::size_t in_flight() const { return queue_.size(); }
  [[nodiscard]] double next_delivery_time() const;
  [[nodiscard]] std::uint64_t sent() const { return next_seq_; }
  [[nodiscard]] std::uint64_t delivered() const { return delivered_; }
  [[nodiscard]] std::uint64_t dropped() const { return dropped_; }
  [[nodiscard]] const ChannelParams& params() const { return params_; }

 private:
  struct Later {
    bool operator()(const ChannelEvent& a, const ChannelEvent& b) const {
      return a.deliver_time != b.deliver_time ? a.deliver_time > b.deliver_time : a.seq > b.seq;
    }
  };

  ChannelParams params_;
  int n_auvs_;
  Rng rng_;
  std::priority_queue<ChannelEvent, std::vector<ChannelEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  double last_poll_ = -std::numeric_limits<double>::infinity();
};

}  // namespace samarl::beacon

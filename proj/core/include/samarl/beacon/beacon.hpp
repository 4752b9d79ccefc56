#pragma once

// Beacon messages and their fixed little-endian wire layout.
//
//   header (9 bytes): kind u8 | src u16 | dst u16 | tick u32
//   GloRequest : mission_type u8 | task_number u16 | d_target f32 | d_auv f32 | episode_len u32
//   GloReply   : cluster_topo bitmap (n(n-1)/2 bits, LSB first, byte padded) | exe_progress f32 | est_reward f32
//   LocRequest : local_task u8 x n | control_cycle u16
//   LocReply   : auv_state f32 x 6 | instant_reward f32 | error_flag u8
//
// n is the follower AUV count of the scenario; it is not carried on the wire.

#include "samarl/common.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace samarl::beacon {

enum class BeaconKind : std::uint8_t { kGloRequest = 0, kGloReply = 1, kLocRequest = 2, kLocReply = 3 };

const char* to_string(BeaconKind k);

inline constexpr std::size_t kHeaderBytes = 9;
inline constexpr std::uint16_t kBroadcast = 0xFFFF;

struct GloRequest {
  std::uint8_t mission_type = 0;
  std::uint16_t task_number = 0;
  // Global constraints.
  float d_target = 0.0F;
  float d_auv = 0.0F;
  std::uint32_t episode_len = 0;

  bool operator==(const GloRequest&) const = default;
};

struct GloReply {
  std::vector<bool> cluster_topo;  // upper-triangle pairs (0,1),(0,2)...(n-2,n-1)
  float exe_progress = 0.0F;       // [0, 1]
  float est_reward = 0.0F;

  bool operator==(const GloReply&) const = default;
};

struct LocRequest {
  std::vector<std::uint8_t> local_task;  // target id per AUV
  std::uint16_t control_cycle = 0;       // ticks

  bool operator==(const LocRequest&) const = default;
};

enum ErrorFlag : std::uint8_t {
  kNominal = 0,
  kActuatorSaturated = 1 << 0,
  kBoundaryContact = 1 << 1,
};

struct LocReply {
  std::array<float, 6> auv_state{};  // position xyz, velocity xyz
  float instant_reward = 0.0F;
  std::uint8_t error_flag = kNominal;

  bool operator==(const LocReply&) const = default;
};

struct Beacon {
  std::uint16_t src = 0;
  std::uint16_t dst = 0;
  std::uint32_t tick = 0;
  std::variant<GloRequest, GloReply, LocRequest, LocReply> payload;

  [[nodiscard]] BeaconKind kind() const { return static_cast<BeaconKind>(payload.index()); }
  bool operator==(const Beacon&) const = default;
};

/// Bytes on the wire for a beacon of `kind` in a scenario with n_auvs followers.
std::size_t encoded_size(BeaconKind kind, int n_auvs);

/// Throws ContractViolation for values the layout cannot carry (non-finite
/// reals, exe_progress outside [0, 1], target ids above 255).
std::vector<std::uint8_t> encode_beacon(const Beacon& b);

/// Throws MalformedMessage on truncation, trailing bytes, unknown kind or
/// non-zero bitmap padding.
Beacon decode_beacon(std::span<const std::uint8_t> bytes, int n_auvs);

}  // namespace samarl::beacon

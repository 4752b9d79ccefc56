#pragma once

// Checkpoint file: a text manifest of `key: value` lines, a `---` line, then
// named tensors (u32 name length, name, u32 rows, u32 cols, u64 count,
// count little-endian float64 values) and a trailing CRC-32 of all
// preceding bytes.

#include "samarl/harness/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samarl::harness {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointState {
  RunConfig config;
  int episode = 0;  // completed training episodes
  double explore_sigma = 0.0;
  marl::AgentNets nets;
  marl::Optimizers optimizers;
  marl::LearnCounters counters;
  std::string sample_rng;   // textual engine state
  std::string explore_rng;

  bool operator==(const CheckpointState& o) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointState& state);
/// Throws CheckpointError on truncation, checksum failure, version mismatch
/// or tensors that do not fit the recorded architecture.
CheckpointState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const CheckpointState& state, const std::string& path);
CheckpointState load_checkpoint(const std::string& path);

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& text);

}  // namespace samarl::harness

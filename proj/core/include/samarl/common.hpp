#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace samarl {

using Vec3 = Eigen::Vector3d;
using Rng = std::mt19937_64;

/// Invalid configuration (exit code 1 at the CLI boundary).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Truncated, unknown-kind or otherwise undecodable beacon bytes.
class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint version mismatch, truncation or checksum failure.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

inline bool finite(const Vec3& v) { return v.allFinite(); }

/// Scales `v` down to norm `limit` if it is longer; never scales up.
inline Vec3 clamp_norm(const Vec3& v, double limit) {
  const double n = v.norm();
  if (n > limit && n > 0.0) return v * (limit / n);
  return v;
}

/// Independent, reproducible RNG stream derived from a base seed.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace samarl

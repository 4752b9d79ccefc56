#pragma once

#include "samarl/env/ocean_env.hpp"

#include <vector>

namespace samarl::marl {

using env::Assignment;
using env::ObsVector;

/// Joint CTDE experience for one environment tick.
struct Transition {
  Eigen::VectorXd global_state;  // per AUV pos+vel, then per target pos+vel
  std::vector<ObsVector> observations;
  std::vector<Vec3> joint_actions;
  std::vector<double> r_scene;
  std::vector<double> r_general;
  Eigen::VectorXd next_global_state;
  std::vector<ObsVector> next_observations;
  bool done = false;
  int scene_label = 0;
  Assignment assignment;  // the assignment the followers acted under
  int episode = 0;
  int tick = 0;

  /// Exact field-wise equality (size mismatches compare unequal).
  bool operator==(const Transition& o) const;
};

/// 6 * (n_auvs + n_targets) vector of absolute positions and velocities.
Eigen::VectorXd global_state(const env::WorldState& world);

/// Bounded FIFO ring; sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Transition t);
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  /// Logical index: 0 is the oldest retained transition.
  [[nodiscard]] const Transition& at(std::size_t i) const;
  [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const;
  [[nodiscard]] std::uint64_t total_stored() const { return total_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t cursor_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::uint64_t total_ = 0;
};

}  // namespace samarl::marl

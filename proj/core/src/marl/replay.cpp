#include "samarl/marl/replay.hpp"

namespace samarl::marl {
namespace {

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.size() == b.size() && a == b; }

}  // namespace

bool Transition::operator==(const Transition& o) const {
  return same(global_state, o.global_state) && observations == o.observations && joint_actions == o.joint_actions &&
         r_scene == o.r_scene && r_general == o.r_general && same(next_global_state, o.next_global_state) &&
         next_observations == o.next_observations && done == o.done && scene_label == o.scene_label &&
         assignment == o.assignment && episode == o.episode && tick == o.tick;
}

Eigen::VectorXd global_state(const env::WorldState& world) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(6 * (world.auvs.size() + world.targets.size())));
  Eigen::Index k = 0;
  for (const auto& a : world.auvs) {
    s.segment<3>(k) = a.position;
    s.segment<3>(k + 3) = a.velocity;
    k += 6;
  }
  for (const auto& t : world.targets) {
    s.segment<3>(k) = t.position;
    s.segment<3>(k + 3) = t.velocity;
    k += 6;
  }
  return s;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::store(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++total_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  require(i < size_, "ReplayBuffer::at: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t k, Rng& rng) const {
  require(size_ > 0, "ReplayBuffer::sample_indices: buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

}  // namespace samarl::marl

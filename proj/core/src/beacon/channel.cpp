#include "samarl/beacon/channel.hpp"

#include <limits>

namespace samarl::beacon {

void ChannelParams::validate() const {
  if (!(sound_speed > 0.0) || !(bitrate > 0.0) || !(comm_range > 0.0)) {
    throw ConfigError("channel: sound_speed, bitrate and comm_range must be > 0");
  }
  if (!(p_loss >= 0.0 && p_loss <= 1.0)) throw ConfigError("channel: p_loss must lie in [0, 1]");
}

double transmission_delay(const Vec3& src_pos, const Vec3& dst_pos, double size_bits, const ChannelParams& params) {
  require(size_bits >= 0.0, "transmission_delay: size must be >= 0");
  return (dst_pos - src_pos).norm() / params.sound_speed + size_bits / params.bitrate;
}

std::vector<bool> CommTopology::to_bitmap() const {
  std::vector<bool> bits;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) bits.push_back(edge(i, j));
  }
  return bits;
}

CommTopology CommTopology::from_bitmap(int n, const std::vector<bool>& bits) {
  require(n >= 0 && bits.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(n > 0 ? n - 1 : 0) / 2,
          "CommTopology::from_bitmap: bitmap length differs from n(n-1)/2");
  CommTopology t;
  t.n = n;
  t.adjacency.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), false);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      t.adjacency[static_cast<std::size_t>(i * n + j)] = bits[k];
      t.adjacency[static_cast<std::size_t>(j * n + i)] = bits[k];
    }
  }
  return t;
}

CommTopology compute_topology(std::span<const Vec3> positions, double comm_range) {
  std::vector<bool> bits;
  const int n = static_cast<int>(positions.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bits.push_back((positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(j)]).norm() <=
                     comm_range);
    }
  }
  return CommTopology::from_bitmap(n, bits);
}

AcousticChannel::AcousticChannel(ChannelParams params, int n_auvs, Rng rng)
    : params_(params), n_auvs_(n_auvs), rng_(std::move(rng)) {
  params_.validate();
}

ChannelEvent AcousticChannel::send(const Beacon& b, std::span<const Vec3> positions, double t_now) {
  require(b.src < positions.size() && b.dst < positions.size(), "channel send: unknown node id");
  ChannelEvent ev;
  ev.beacon = b;
  ev.send_time = t_now;
  ev.seq = next_seq_++;
  const Vec3& from = positions[b.src];
  const Vec3& to = positions[b.dst];
  const double bits = 8.0 * static_cast<double>(encoded_size(b.kind(), n_auvs_));
  ev.deliver_time = t_now + transmission_delay(from, to, bits, params_);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool lost = u(rng_) < params_.p_loss;
  if ((to - from).norm() > params_.comm_range) {
    ev.dropped = true;
    ev.reason = DropReason::kOutOfRange;
  } else if (lost) {
    ev.dropped = true;
    ev.reason = DropReason::kLoss;
  }
  if (ev.dropped) {
    ++dropped_;
  } else {
    queue_.push(ev);
  }
  return ev;
}

std::vector<ChannelEvent> AcousticChannel::broadcast(const Beacon& b, std::span<const std::uint16_t> receivers,
                                                     std::span<const Vec3> positions, double t_now) {
  std::vector<ChannelEvent> events;
  events.reserve(receivers.size());
  for (auto r : receivers) {
    Beacon copy = b;
    copy.dst = r;
    events.push_back(send(copy, positions, t_now));
  }
  return events;
}

std::vector<Beacon> AcousticChannel::poll(double t_now) {
  require(t_now >= last_poll_, "channel poll: time must not run backwards");
  last_poll_ = t_now;
  std::vector<Beacon> out;
  while (!queue_.empty() && queue_.top().deliver_time <= t_now) {
    out.push_back(queue_.top().beacon);
    queue_.pop();
    ++delivered_;
  }
  return out;
}

double AcousticChannel::next_delivery_time() const {
  return queue_.empty() ? std::numeric_limits<double>::infinity() : queue_.top().deliver_time;
}

}  // namespace samarl::beacon

#include "samarl/beacon/beacon.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace samarl::beacon {
namespace {

std::size_t pair_bits(int n) { return n < 2 ? 0 : static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2; }

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) {
    require(std::isfinite(v), "encode_beacon: real fields must be finite");
    u32(std::bit_cast<std::uint32_t>(v));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw MalformedMessage("decode_beacon: truncated message");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(BeaconKind k) {
  switch (k) {
    case BeaconKind::kGloRequest: return "GloRequest";
    case BeaconKind::kGloReply: return "GloReply";
    case BeaconKind::kLocRequest: return "LocRequest";
    case BeaconKind::kLocReply: return "LocReply";
  }
  return "?";
}

std::size_t encoded_size(BeaconKind kind, int n_auvs) {
  const auto n = static_cast<std::size_t>(n_auvs);
  switch (kind) {
    case BeaconKind::kGloRequest: return kHeaderBytes + 1 + 2 + 4 + 4 + 4;
    case BeaconKind::kGloReply: return kHeaderBytes + (pair_bits(n_auvs) + 7) / 8 + 4 + 4;
    case BeaconKind::kLocRequest: return kHeaderBytes + n + 2;
    case BeaconKind::kLocReply: return kHeaderBytes + 6 * 4 + 4 + 1;
  }
  throw ContractViolation("encoded_size: unknown kind");
}

std::vector<std::uint8_t> encode_beacon(const Beacon& b) {
  std::vector<std::uint8_t> out;
  out.reserve(64);
  Writer w(out);
  w.u8(static_cast<std::uint8_t>(b.kind()));
  w.u16(b.src);
  w.u16(b.dst);
  w.u32(b.tick);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GloRequest>) {
          w.u8(p.mission_type);
          w.u16(p.task_number);
          w.f32(p.d_target);
          w.f32(p.d_auv);
          w.u32(p.episode_len);
        } else if constexpr (std::is_same_v<T, GloReply>) {
          require(p.exe_progress >= 0.0F && p.exe_progress <= 1.0F, "encode_beacon: exe_progress outside [0, 1]");
          std::vector<std::uint8_t> bitmap((p.cluster_topo.size() + 7) / 8, 0);
          for (std::size_t i = 0; i < p.cluster_topo.size(); ++i) {
            if (p.cluster_topo[i]) bitmap[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
          }
          for (auto byte : bitmap) w.u8(byte);
          w.f32(p.exe_progress);
          w.f32(p.est_reward);
        } else if constexpr (std::is_same_v<T, LocRequest>) {
          for (auto t : p.local_task) w.u8(t);
          w.u16(p.control_cycle);
        } else {
          for (float v : p.auv_state) w.f32(v);
          w.f32(p.instant_reward);
          w.u8(p.error_flag);
        }
      },
      b.payload);
  return out;
}

Beacon decode_beacon(std::span<const std::uint8_t> bytes, int n_auvs) {
  require(n_auvs >= 1, "decode_beacon: n_auvs must be >= 1");
  Reader r(bytes);
  const std::uint8_t kind = r.u8();
  Beacon b;
  b.src = r.u16();
  b.dst = r.u16();
  b.tick = r.u32();
  switch (kind) {
    case static_cast<std::uint8_t>(BeaconKind::kGloRequest): {
      GloRequest p;
      p.mission_type = r.u8();
      p.task_number = r.u16();
      p.d_target = r.f32();
      p.d_auv = r.f32();
      p.episode_len = r.u32();
      b.payload = p;
      break;
    }
    case static_cast<std::uint8_t>(BeaconKind::kGloReply): {
      GloReply p;
      const std::size_t bits = pair_bits(n_auvs);
      const std::size_t nbytes = (bits + 7) / 8;
      p.cluster_topo.resize(bits);
      for (std::size_t i = 0; i < nbytes; ++i) {
        const std::uint8_t byte = r.u8();
        for (std::size_t bit = 0; bit < 8; ++bit) {
          const bool set = (byte >> bit) & 1U;
          const std::size_t idx = i * 8 + bit;
          if (idx < bits) {
            p.cluster_topo[idx] = set;
          } else if (set) {
            throw MalformedMessage("decode_beacon: non-zero bitmap padding");
          }
        }
      }
      p.exe_progress = r.f32();
      p.est_reward = r.f32();
      if (!(p.exe_progress >= 0.0F && p.exe_progress <= 1.0F)) {
        throw MalformedMessage("decode_beacon: exe_progress outside [0, 1]");
      }
      b.payload = std::move(p);
      break;
    }
    case static_cast<std::uint8_t>(BeaconKind::kLocRequest): {
      LocRequest p;
      p.local_task.resize(static_cast<std::size_t>(n_auvs));
      for (auto& t : p.local_task) t = r.u8();
      p.control_cycle = r.u16();
      b.payload = std::move(p);
      break;
    }
    case static_cast<std::uint8_t>(BeaconKind::kLocReply): {
      LocReply p;
      for (auto& v : p.auv_state) v = r.f32();
      p.instant_reward = r.f32();
      p.error_flag = r.u8();
      b.payload = p;
      break;
    }
    default:
      throw MalformedMessage("decode_beacon: unknown beacon kind " + std::to_string(kind));
  }
  if (r.remaining() != 0) throw MalformedMessage("decode_beacon: trailing bytes after payload");
  return b;
}

}  // namespace samarl::beacon

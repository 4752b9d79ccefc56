#include "samarl/harness/checkpoint.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>

namespace samarl::harness {
namespace {

constexpr const char* kMagic = "SAMARL-CHECKPOINT";
constexpr const char* kSeparator = "---";

bool same_nets(const std::vector<nn::MlpParams>& a, const std::vector<nn::MlpParams>& b) { return a == b; }

bool same_layers(const std::vector<nn::LayerGrad>& a, const std::vector<nn::LayerGrad>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size() || a[i].weight != b[i].weight || a[i].bias != b[i].bias) {
      return false;
    }
  }
  return true;
}

bool same_adam(const nn::AdamState& a, const nn::AdamState& b) {
  return a.lr == b.lr && a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps && a.step == b.step &&
         same_layers(a.m, b.m) && same_layers(a.v, b.v);
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double d) {
    std::uint64_t v = 0;
    std::memcpy(&v, &d, sizeof v);
    u64(v);
  }
  void text(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  void tensor(const std::string& name, const nn::Matrix& m) {
    u32(static_cast<std::uint32_t>(name.size()));
    text(name);
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    u64(static_cast<std::uint64_t>(m.size()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
    }
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t pos, std::size_t end) : b_(b), pos_(pos), end_(end) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d = 0.0;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw CheckpointError("checkpoint corrupted: tensor section truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_;
  std::size_t end_;
};

// Visits every tensor in a fixed order. `visit(name, matrix&)`.
template <typename State, typename Visit>
void for_each_tensor(State& s, Visit&& visit) {
  auto net = [&](const std::string& prefix, auto& params) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const std::string base = prefix + ".l" + std::to_string(l);
      visit(base + ".weight", params.layers[l].weight);
      visit(base + ".bias", params.layers[l].bias);
    }
  };
  auto adam = [&](const std::string& prefix, auto& opt) {
    for (std::size_t l = 0; l < opt.m.size(); ++l) {
      const std::string base = "adam." + prefix + ".l" + std::to_string(l);
      visit(base + ".m_weight", opt.m[l].weight);
      visit(base + ".m_bias", opt.m[l].bias);
      visit(base + ".v_weight", opt.v[l].weight);
      visit(base + ".v_bias", opt.v[l].bias);
    }
  };
  for (std::size_t i = 0; i < s.nets.actors.size(); ++i) net("actor." + std::to_string(i), s.nets.actors[i]);
  for (std::size_t i = 0; i < s.nets.actor_targets.size(); ++i) {
    net("actor_target." + std::to_string(i), s.nets.actor_targets[i]);
  }
  net("encoder", s.nets.encoder);
  net("gating", s.nets.gating);
  net("general", s.nets.general);
  net("general_target", s.nets.general_target);
  net("scene", s.nets.scene);
  net("scene_target", s.nets.scene_target);
  for (std::size_t i = 0; i < s.optimizers.actors.size(); ++i) adam("actor." + std::to_string(i), s.optimizers.actors[i]);
  adam("encoder", s.optimizers.encoder);
  adam("gating", s.optimizers.gating);
  adam("general", s.optimizers.general);
  adam("scene", s.optimizers.scene);
}

template <typename Opts, typename Visit>
void for_each_adam(Opts& o, Visit&& visit) {
  for (std::size_t i = 0; i < o.actors.size(); ++i) visit("actor." + std::to_string(i), o.actors[i]);
  visit("encoder", o.encoder);
  visit("gating", o.gating);
  visit("general", o.general);
  visit("scene", o.scene);
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

double to_real(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint manifest lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint manifest: bad value for '" + key + "'");
  }
}

std::int64_t to_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint manifest lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint manifest: bad value for '" + key + "'");
  }
}

}  // namespace

bool CheckpointState::operator==(const CheckpointState& o) const {
  if (to_key_values(config) != to_key_values(o.config) || episode != o.episode || explore_sigma != o.explore_sigma ||
      sample_rng != o.sample_rng || explore_rng != o.explore_rng) {
    return false;
  }
  if (counters.env_steps != o.counters.env_steps || counters.learn_steps != o.counters.learn_steps ||
      counters.skipped_updates != o.counters.skipped_updates || counters.last_critic_loss != o.counters.last_critic_loss ||
      counters.last_actor_loss != o.counters.last_actor_loss) {
    return false;
  }
  const auto& a = nets;
  const auto& b = o.nets;
  if (!same_nets(a.actors, b.actors) || !same_nets(a.actor_targets, b.actor_targets) || !(a.encoder == b.encoder) ||
      !(a.gating == b.gating) || !(a.general == b.general) || !(a.general_target == b.general_target) ||
      !(a.scene == b.scene) || !(a.scene_target == b.scene_target)) {
    return false;
  }
  if (optimizers.actors.size() != o.optimizers.actors.size()) return false;
  for (std::size_t i = 0; i < optimizers.actors.size(); ++i) {
    if (!same_adam(optimizers.actors[i], o.optimizers.actors[i])) return false;
  }
  return same_adam(optimizers.encoder, o.optimizers.encoder) && same_adam(optimizers.gating, o.optimizers.gating) &&
         same_adam(optimizers.general, o.optimizers.general) && same_adam(optimizers.scene, o.optimizers.scene);
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

Rng rng_from_string(const std::string& text) {
  std::istringstream ss(text);
  Rng rng;
  ss >> rng;
  if (ss.fail()) throw CheckpointError("checkpoint manifest: unreadable RNG state");
  return rng;
}

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointState& state) {
  Writer w;
  auto line = [&](const std::string& k, const std::string& v) { w.text(k + ": " + v + "\n"); };
  w.text(std::string(kMagic) + "\n");
  line("version", std::to_string(kCheckpointVersion));
  line("episode", std::to_string(state.episode));
  line("explore_sigma", format_real(state.explore_sigma));
  line("env_steps", std::to_string(state.counters.env_steps));
  line("learn_steps", std::to_string(state.counters.learn_steps));
  line("skipped_updates", std::to_string(state.counters.skipped_updates));
  line("last_critic_loss", format_real(state.counters.last_critic_loss));
  line("last_actor_loss", format_real(state.counters.last_actor_loss));
  line("n_actors", std::to_string(state.nets.actors.size()));
  for_each_adam(state.optimizers, [&](const std::string& name, const nn::AdamState& a) {
    line("adam." + name + ".lr", format_real(a.lr));
    line("adam." + name + ".step", std::to_string(a.step));
  });
  line("rng.sample", state.sample_rng);
  line("rng.explore", state.explore_rng);
  for (const auto& [k, v] : to_key_values(state.config)) line("config." + k, v);
  w.text(std::string(kSeparator) + "\n");

  std::size_t count = 0;
  for_each_tensor(state, [&](const std::string&, const auto&) { ++count; });
  w.u32(static_cast<std::uint32_t>(count));
  for_each_tensor(state, [&](const std::string& name, const auto& m) { w.tensor(name, nn::Matrix(m)); });
  w.u32(crc32(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

CheckpointState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw CheckpointError("checkpoint corrupted: file too short");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int k = 0; k < 4; ++k) stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(k)]) << (8 * k);
  if (crc32(bytes.data(), body) != stored) throw CheckpointError("checkpoint corrupted: checksum mismatch");

  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  bool first = true;
  bool separated = false;
  while (pos < body) {
    const auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(body), '\n');
    if (nl == bytes.begin() + static_cast<std::ptrdiff_t>(body)) break;
    const std::string ln(bytes.begin() + static_cast<std::ptrdiff_t>(pos), nl);
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    if (first) {
      if (ln != kMagic) throw CheckpointError("not a checkpoint file");
      first = false;
      continue;
    }
    if (ln == kSeparator) {
      separated = true;
      break;
    }
    const auto colon = ln.find(": ");
    if (colon == std::string::npos) throw CheckpointError("checkpoint manifest: malformed line '" + ln + "'");
    kv[ln.substr(0, colon)] = ln.substr(colon + 2);
  }
  if (!separated) throw CheckpointError("checkpoint corrupted: manifest not terminated");
  const auto version = to_int(kv, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }

  CheckpointState s;
  try {
    for (const auto& [k, v] : kv) {
      if (k.rfind("config.", 0) == 0) set_key(s.config, k.substr(7), v);
    }
    s.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  }
  s.episode = static_cast<int>(to_int(kv, "episode"));
  s.explore_sigma = to_real(kv, "explore_sigma");
  s.counters.env_steps = to_int(kv, "env_steps");
  s.counters.learn_steps = to_int(kv, "learn_steps");
  s.counters.skipped_updates = to_int(kv, "skipped_updates");
  s.counters.last_critic_loss = to_real(kv, "last_critic_loss");
  s.counters.last_actor_loss = to_real(kv, "last_actor_loss");
  s.sample_rng = kv.count("rng.sample") ? kv.at("rng.sample") : "";
  s.explore_rng = kv.count("rng.explore") ? kv.at("rng.explore") : "";

  Rng init(0);
  s.nets = marl::make_agent_nets(s.config.learner_config(), init);
  if (static_cast<std::int64_t>(s.nets.actors.size()) != to_int(kv, "n_actors")) {
    throw CheckpointError("checkpoint manifest: actor count does not match configuration");
  }
  s.optimizers = marl::make_optimizers(s.nets, s.config.hyper);
  for_each_adam(s.optimizers, [&](const std::string& name, nn::AdamState& a) {
    a.lr = to_real(kv, "adam." + name + ".lr");
    a.step = to_int(kv, "adam." + name + ".step");
  });

  Reader r(bytes, pos, body);
  const std::uint32_t count = r.u32();
  std::size_t expected = 0;
  for_each_tensor(s, [&](const std::string&, auto&) { ++expected; });
  if (count != expected) throw CheckpointError("checkpoint tensor count does not match configuration");
  for_each_tensor(s, [&](const std::string& name, auto& m) {
    const std::string got = r.text(r.u32());
    if (got != name) throw CheckpointError("checkpoint tensor '" + got + "' found where '" + name + "' was expected");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint64_t n = r.u64();
    if (rows != m.rows() || cols != m.cols() || n != static_cast<std::uint64_t>(rows) * cols) {
      throw CheckpointError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index rr = 0; rr < m.rows(); ++rr) m(rr, c) = r.f64();
    }
  });
  if (!r.done()) throw CheckpointError("checkpoint corrupted: trailing bytes");
  return s;
}

void save_checkpoint(const CheckpointState& state, const std::string& path) {
  const auto bytes = serialize_checkpoint(state);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into '" + path + "': " + ec.message());
}

CheckpointState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace samarl::harness

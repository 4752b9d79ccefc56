#include "samarl/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace samarl::harness {
namespace {

using Getter = std::function<std::string(const RunConfig&)>;
using Setter = std::function<void(RunConfig&, const std::string&)>;

struct KeySpec {
  std::string key;
  Getter get;
  Setter set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) bad_value(key, v, "a real number");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

Vec3 parse_vec3(const std::string& key, const std::string& v) {
  std::stringstream ss(v);
  std::string part;
  Vec3 out;
  int k = 0;
  while (std::getline(ss, part, ',')) {
    if (k == 3) bad_value(key, v, "three comma-separated reals");
    out[k++] = parse_real(key, trim(part));
  }
  if (k != 3) bad_value(key, v, "three comma-separated reals");
  return out;
}

template <typename Field>
KeySpec real_key(std::string key, Field field) {
  return {key, [field](const RunConfig& c) { return format_real(field(c)); },
          [field, key](RunConfig& c, const std::string& v) { field(c) = parse_real(key, v); }};
}

template <typename Field>
KeySpec int_key(std::string key, Field field) {
  return {key, [field](const RunConfig& c) { return std::to_string(field(c)); },
          [field, key](RunConfig& c, const std::string& v) {
            field(c) = parse_int<std::remove_reference_t<decltype(field(c))>>(key, v);
          }};
}

template <typename Field>
KeySpec bool_key(std::string key, Field field) {
  return {key, [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); },
          [field, key](RunConfig& c, const std::string& v) { field(c) = parse_bool(key, v); }};
}

#define SAMARL_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    // scenario
    t.push_back(int_key("n_auvs", SAMARL_FIELD(scenario.n_auvs)));
    t.push_back(int_key("n_targets", SAMARL_FIELD(scenario.n_targets)));
    t.push_back(bool_key("interference", SAMARL_FIELD(scenario.interference)));
    t.push_back({"bounds",
                 [](const RunConfig& c) {
                   const auto& b = c.scenario.bounds;
                   return format_real(b.x()) + "," + format_real(b.y()) + "," + format_real(b.z());
                 },
                 [](RunConfig& c, const std::string& v) { c.scenario.bounds = parse_vec3("bounds", v); }});
    t.push_back(real_key("dt", SAMARL_FIELD(scenario.dt)));
    t.push_back(int_key("episode_len", SAMARL_FIELD(scenario.episode_len)));
    t.push_back(real_key("v_max", SAMARL_FIELD(scenario.v_max)));
    t.push_back(real_key("v_target_max", SAMARL_FIELD(scenario.v_target_max)));
    t.push_back(real_key("a_max", SAMARL_FIELD(scenario.a_max)));
    t.push_back(real_key("d_target", SAMARL_FIELD(scenario.d_target)));
    t.push_back(real_key("d_auv", SAMARL_FIELD(scenario.d_auv)));
    t.push_back(real_key("actuator_tau", SAMARL_FIELD(scenario.actuator_tau)));
    t.push_back(real_key("c_drag", SAMARL_FIELD(scenario.c_drag)));
    t.push_back(real_key("sigma_obs", SAMARL_FIELD(scenario.sigma_obs)));
    t.push_back(real_key("target_theta", SAMARL_FIELD(scenario.target_theta)));
    t.push_back(real_key("target_sigma", SAMARL_FIELD(scenario.target_sigma)));
    t.push_back(real_key("current_theta", SAMARL_FIELD(scenario.current_theta)));
    t.push_back(real_key("current_sigma", SAMARL_FIELD(scenario.current_sigma)));
    t.push_back(int_key("seed", SAMARL_FIELD(scenario.seed)));
    // learner
    t.push_back(real_key("gamma", SAMARL_FIELD(hyper.gamma)));
    t.push_back(real_key("tau", SAMARL_FIELD(hyper.tau)));
    t.push_back(real_key("lr_actor", SAMARL_FIELD(hyper.lr_actor)));
    t.push_back(real_key("lr_critic", SAMARL_FIELD(hyper.lr_critic)));
    t.push_back(real_key("lr_gating", SAMARL_FIELD(hyper.lr_gating)));
    t.push_back(int_key("batch_size", SAMARL_FIELD(hyper.batch_size)));
    t.push_back(int_key("buffer_capacity", SAMARL_FIELD(hyper.buffer_capacity)));
    t.push_back(real_key("explore_sigma", SAMARL_FIELD(hyper.explore_sigma)));
    t.push_back(real_key("explore_decay", SAMARL_FIELD(hyper.explore_decay)));
    t.push_back(real_key("explore_min", SAMARL_FIELD(hyper.explore_min)));
    t.push_back(int_key("update_every", SAMARL_FIELD(hyper.update_every)));
    t.push_back(int_key("warmup_steps", SAMARL_FIELD(hyper.warmup_steps)));
    t.push_back(real_key("lambda_scene", SAMARL_FIELD(hyper.lambda_scene)));
    t.push_back(real_key("grad_clip", SAMARL_FIELD(hyper.grad_clip)));
    t.push_back(bool_key("shared_actor", SAMARL_FIELD(hyper.shared_actor)));
    t.push_back(int_key("actor_hidden", SAMARL_FIELD(hyper.actor_hidden)));
    t.push_back(int_key("encoder_hidden", SAMARL_FIELD(hyper.encoder_hidden)));
    t.push_back(int_key("latent_dim", SAMARL_FIELD(hyper.latent_dim)));
    t.push_back(int_key("gating_hidden", SAMARL_FIELD(hyper.gating_hidden)));
    t.push_back(int_key("critic_hidden", SAMARL_FIELD(hyper.critic_hidden)));
    // reward
    t.push_back(real_key("k_track", SAMARL_FIELD(coeffs.k_track)));
    t.push_back(real_key("k_form", SAMARL_FIELD(coeffs.k_form)));
    t.push_back(real_key("k_smooth", SAMARL_FIELD(coeffs.k_smooth)));
    t.push_back(real_key("k_vel", SAMARL_FIELD(coeffs.k_vel)));
    // channel and control plane
    t.push_back(real_key("sound_speed", SAMARL_FIELD(channel.sound_speed)));
    t.push_back(real_key("bitrate", SAMARL_FIELD(channel.bitrate)));
    t.push_back(real_key("p_loss", SAMARL_FIELD(channel.p_loss)));
    t.push_back(real_key("p_loss_interference", SAMARL_FIELD(p_loss_interference)));
    t.push_back(real_key("comm_range", SAMARL_FIELD(channel.comm_range)));
    t.push_back(int_key("control_cycle", SAMARL_FIELD(control_cycle)));
    t.push_back(int_key("global_cycle_multiplier", SAMARL_FIELD(global_cycle_multiplier)));
    // run
    t.push_back({"w_mode", [](const RunConfig& c) { return c.w_mode.str(); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.w_mode = marl::WMode::parse(v);
                   } catch (const std::exception& e) {
                     throw ConfigError(std::string("config key 'w_mode': ") + e.what());
                   }
                 }});
    t.push_back({"reward_split", [](const RunConfig& c) { return marl::to_string(c.reward_split); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.reward_split = marl::parse_reward_split(v);
                   } catch (const std::exception& e) {
                     throw ConfigError(std::string("config key 'reward_split': ") + e.what());
                   }
                 }});
    t.push_back(bool_key("comms_gated", SAMARL_FIELD(comms_gated)));
    t.push_back(int_key("episodes", SAMARL_FIELD(episodes)));
    t.push_back(int_key("eval_every", SAMARL_FIELD(eval_every)));
    t.push_back(int_key("eval_episodes", SAMARL_FIELD(eval_episodes)));
    t.push_back({"output_dir", [](const RunConfig& c) { return c.output_dir; },
                 [](RunConfig& c, const std::string& v) { c.output_dir = v; }});
    t.push_back(int_key("workers", SAMARL_FIELD(workers)));
    return t;
  }();
  return table;
}

#undef SAMARL_FIELD

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunConfig::validate() const {
  scenario.validate();
  hyper.validate();
  coeffs.validate();
  channel.validate();
  if (!(p_loss_interference >= 0.0 && p_loss_interference <= 1.0)) throw ConfigError("p_loss_interference must lie in [0, 1]");
  if (control_cycle < 1 || control_cycle > 0xFFFF) throw ConfigError("control_cycle must lie in [1, 65535]");
  if (global_cycle_multiplier < 1) throw ConfigError("global_cycle_multiplier must be >= 1");
  if (w_mode.kind == marl::WMode::Kind::kFixed && !(w_mode.fixed >= 0.0 && w_mode.fixed <= 1.0)) {
    throw ConfigError("w_mode fixed value must lie in [0, 1]");
  }
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (scenario.n_targets > 255) throw ConfigError("n_targets must be <= 255");
}

beacon::ChannelParams RunConfig::effective_channel() const {
  beacon::ChannelParams p = channel;
  if (scenario.interference) p.p_loss = std::max(p.p_loss, p_loss_interference);
  return p;
}

marl::LearnerConfig RunConfig::learner_config() const {
  marl::LearnerConfig lc;
  lc.n_auvs = scenario.n_auvs;
  lc.n_targets = scenario.n_targets;
  lc.hyper = hyper;
  lc.w_mode = w_mode;
  lc.reward_split = reward_split;
  lc.scaler.bounds = scenario.bounds;
  lc.scaler.v_max = scenario.v_max;
  return lc;
}

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : key_table()) out.emplace_back(k.key, k.get(cfg));
  return out;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : key_table()) {
    if (k.key == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + " = " + v + "\n";
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"4v2", "6v3", "12v4"};
  return names;
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "4v2") {
    cfg.scenario.n_auvs = 4;
    cfg.scenario.n_targets = 2;
  } else if (preset == "6v3") {
    cfg.scenario.n_auvs = 6;
    cfg.scenario.n_targets = 3;
  } else if (preset == "12v4") {
    cfg.scenario.n_auvs = 12;
    cfg.scenario.n_targets = 4;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected 4v2, 6v3 or 12v4)");
  }
}

}  // namespace samarl::harness

#pragma once

#include "samarl/beacon/channel.hpp"
#include "samarl/env/ocean_env.hpp"
#include "samarl/marl/agent.hpp"
#include "samarl/reward/reward.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace samarl::harness {

struct RunConfig {
  env::ScenarioConfig scenario;
  marl::Hyperparams hyper;
  reward::RewardCoefficients coeffs;
  beacon::ChannelParams channel;
  double p_loss_interference = 0.1;
  int control_cycle = 10;
  int global_cycle_multiplier = 10;
  marl::WMode w_mode;
  marl::RewardSplit reward_split = marl::RewardSplit::kDecomposed;
  bool comms_gated = false;
  int episodes = 2000;
  int eval_every = 100;
  int eval_episodes = 10;
  std::string output_dir = "runs/default";
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
  /// Channel parameters in effect: interference raises the loss rate.
  [[nodiscard]] beacon::ChannelParams effective_channel() const;
  [[nodiscard]] marl::LearnerConfig learner_config() const;
};

/// Ordered (key, value) pairs, one per RunConfig field. Reals use %.17g.
std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg);

/// Applies one key; throws ConfigError for unknown keys or bad values.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat text: `key = value` per line, `#` starts a comment.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});
std::string format_config(const RunConfig& cfg);

/// "4v2", "6v3" or "12v4": sets the AUV and target counts.
void apply_preset(RunConfig& cfg, const std::string& preset);
const std::vector<std::string>& preset_names();

std::string format_real(double v);

}  // namespace samarl::harness

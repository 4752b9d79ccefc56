#pragma once

// Episode rollout, training orchestration and evaluation.

#include "samarl/beacon/control_plane.hpp"
#include "samarl/harness/checkpoint.hpp"
#include "samarl/harness/config.hpp"
#include "samarl/harness/trajectory.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace samarl::harness {

enum class PolicyKind { kActor, kRandom };

struct EpisodeRecord {
  int episode = 0;
  double mean_return = 0.0;  // r_total summed over steps, averaged over AUVs
  double r_track = 0.0;
  double r_form = 0.0;
  double r_smooth = 0.0;
  double r_vel = 0.0;
  double tracking_accuracy = 0.0;
  double explore_sigma = 0.0;
  double mean_w = 0.0;
  int dominant_scene = 0;  // most frequent dominant scene over the episode
  std::int64_t env_steps = 0;
  std::int64_t learn_steps = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::uint64_t committed = 0;
  std::uint64_t dropped_incomplete = 0;
  double wall_seconds = 0.0;
};

/// Everything a single rollout needs. `nets` may be null for the random
/// policy; `sink` and `trajectory` are optional.
struct EpisodeContext {
  const RunConfig* config = nullptr;
  const marl::AgentNets* nets = nullptr;
  PolicyKind policy = PolicyKind::kActor;
  double sigma = 0.0;
  Rng* explore_rng = nullptr;
  Rng* sense_rng = nullptr;
  beacon::ControlPlane* plane = nullptr;
  beacon::CommitSink sink;
  std::vector<TrajectoryRow>* trajectory = nullptr;
};

/// Seed of the world for episode `index` of a phase (training, evaluation).
std::uint64_t episode_seed(std::uint64_t base, std::uint64_t phase, std::uint64_t index);

inline constexpr std::uint64_t kTrainPhase = 0;
inline constexpr std::uint64_t kEvalPhase = 1;

EpisodeRecord run_episode(const EpisodeContext& ctx, int episode_index, std::uint64_t world_seed);

struct EvalSummary {
  int episodes = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
};

/// Greedy (sigma = 0) or uniform-random rollouts on the fixed evaluation
/// worlds. Identical inputs give identical summaries.
EvalSummary evaluate(const RunConfig& config, const marl::AgentNets* nets, int episodes, PolicyKind policy);

/// Stateful training loop; `run_training` drives it and writes artifacts.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  EpisodeRecord train_episode();
  [[nodiscard]] CheckpointState checkpoint() const;

  [[nodiscard]] const RunConfig& config() const { return config_; }
  [[nodiscard]] const marl::Learner& learner() const { return learner_; }
  [[nodiscard]] int episodes_done() const { return episode_; }
  [[nodiscard]] double explore_sigma() const { return sigma_; }

 private:
  struct Worker {
    Rng explore_rng;
    Rng sense_rng;
    std::unique_ptr<beacon::ControlPlane> plane;
  };

  EpisodeRecord train_sequential();
  void train_parallel();
  void stamp(EpisodeRecord& r) const;

  RunConfig config_;
  marl::Learner learner_;
  Rng explore_rng_;
  Rng sense_rng_;
  std::unique_ptr<beacon::ControlPlane> plane_;
  int episode_ = 0;
  double sigma_ = 0.0;
  std::vector<Worker> workers_;  // used when config.workers > 1
  std::vector<EpisodeRecord> queued_;  // parallel results not yet handed out
};

struct TrainingResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<std::pair<int, EvalSummary>> evals;  // (after episode, summary)
  std::string final_checkpoint;
};

using ProgressFn = std::function<void(const EpisodeRecord&)>;

/// Writes train_log.csv, eval_log.csv, timing.csv and checkpoints under
/// config.output_dir. Throws IoError before any compute if it is unwritable.
TrainingResult run_training(const RunConfig& config, const ProgressFn& progress = {});

/// Refuses (ConfigError) when the checkpoint's scenario differs from `config`'s.
EvalSummary run_eval(const CheckpointState& checkpoint, const RunConfig& config, int episodes, PolicyKind policy);

/// One greedy evaluation episode with every entity recorded per tick.
std::vector<TrajectoryRow> record_episode(const CheckpointState& checkpoint, int eval_index = 0);

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns);
std::string format_episode_row(const EpisodeRecord& r);
const std::vector<std::string>& train_log_columns();

}  // namespace samarl::harness

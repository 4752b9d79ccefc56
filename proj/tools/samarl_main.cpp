// samarl: train, evaluate and replay multi-AUV tracking policies.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include "samarl/harness/checkpoint.hpp"
#include "samarl/harness/config.hpp"
#include "samarl/harness/runner.hpp"
#include "samarl/harness/trajectory.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace samarl;
using namespace samarl::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string preset;
  bool interference = false;
  std::string out;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  int episodes = 0;
  bool random = false;
};

struct ReplayArgs {
  std::string checkpoint;
  std::string out;
  int index = 0;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_config_file(a.config);
  if (!a.preset.empty()) apply_preset(cfg, a.preset);
  if (a.seed) cfg.scenario.seed = *a.seed;
  if (a.interference) cfg.scenario.interference = true;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.validate();

  const int every = std::max(1, cfg.episodes / 20);
  const auto result = run_training(cfg, [&](const EpisodeRecord& r) {
    if (a.quiet || (r.episode + 1) % every != 0) return;
    std::printf("episode %d  return %.3f  accuracy %.1f%%  sigma %.3f\n", r.episode + 1, r.mean_return,
                r.tracking_accuracy, r.explore_sigma);
    std::fflush(stdout);
  });
  if (!result.evals.empty()) {
    const auto& ev = result.evals.back().second;
    std::printf("final eval: return %.3f +- %.3f, accuracy %.2f +- %.2f %%\n", ev.return_mean, ev.return_std,
                ev.accuracy_mean, ev.accuracy_std);
  }
  std::printf("checkpoint: %s\n", result.final_checkpoint.c_str());
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  const CheckpointState ckpt = load_checkpoint(a.checkpoint);
  const int episodes = a.episodes > 0 ? a.episodes : ckpt.config.eval_episodes;
  const auto policy = a.random ? PolicyKind::kRandom : PolicyKind::kActor;
  const EvalSummary ev = run_eval(ckpt, ckpt.config, episodes, policy);
  std::printf("policy,episodes,return_mean,return_std,accuracy_mean,accuracy_std\n");
  std::printf("%s,%d,%.10g,%.10g,%.10g,%.10g\n", a.random ? "random" : "trained", ev.episodes, ev.return_mean,
              ev.return_std, ev.accuracy_mean, ev.accuracy_std);
  return kExitOk;
}

int cmd_replay(const ReplayArgs& a) {
  const CheckpointState ckpt = load_checkpoint(a.checkpoint);
  const auto rows = record_episode(ckpt, a.index);
  export_trajectories(rows, a.out);
  std::printf("wrote %zu rows to %s\n", rows.size(), a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-adaptive multi-agent tracking: training, evaluation and replay"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a policy from a config file");
  t->add_option("--config", train.config, "Flat key = value config file")->required();
  t->add_option("--seed", train.seed, "Override the config seed");
  t->add_option("--preset", train.preset, "Scenario scale")->check(CLI::IsMember({"4v2", "6v3", "12v4"}));
  t->add_flag("--interference", train.interference, "Enable current, sensor noise and beacon loss");
  t->add_option("--out", train.out, "Output directory");
  t->add_flag("--quiet", train.quiet, "Suppress progress lines");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with exploration disabled");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--episodes", eval.episodes, "Evaluation episodes (default: eval_episodes)")
      ->check(CLI::PositiveNumber);
  e->add_flag("--random", eval.random, "Evaluate a uniform-random policy instead");

  ReplayArgs replay;
  auto* r = app.add_subcommand("replay", "Export one evaluation episode as a trajectory CSV");
  r->add_option("--checkpoint", replay.checkpoint, "Checkpoint file")->required();
  r->add_option("--out", replay.out, "Output CSV path")->required();
  r->add_option("--index", replay.index, "Evaluation episode index")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    if (r->parsed()) return cmd_replay(replay);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

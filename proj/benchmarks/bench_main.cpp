#include "samarl/env/ocean_env.hpp"
#include "samarl/marl/agent.hpp"
#include "samarl/nn/mlp.hpp"
#include "samarl/reward/reward.hpp"

#include <benchmark/benchmark.h>

#include <array>

namespace {

using namespace samarl;

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const int batch = static_cast<int>(state.range(0));
  const std::array dims{15, 64, 64, 3};
  const std::array acts{nn::Activation::kRelu, nn::Activation::kRelu, nn::Activation::kTanh};
  const auto p = nn::mlp_init(dims, acts, rng);
  const nn::Matrix x = nn::Matrix::Random(15, batch);
  nn::ForwardCache cache;
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_forward(p, x, cache));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(64)->Arg(256);

void BM_MlpBackward(benchmark::State& state) {
  Rng rng(2);
  const int batch = static_cast<int>(state.range(0));
  const std::array dims{60, 128, 128, 1};
  const std::array acts{nn::Activation::kRelu, nn::Activation::kRelu, nn::Activation::kIdentity};
  const auto p = nn::mlp_init(dims, acts, rng);
  const nn::Matrix x = nn::Matrix::Random(60, batch);
  nn::ForwardCache cache;
  const nn::Matrix y = nn::mlp_forward(p, x, cache);
  const nn::Matrix dy = nn::Matrix::Ones(y.rows(), y.cols());
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_backward(p, cache, dy));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(256);

void BM_StepWorld(benchmark::State& state) {
  env::ScenarioConfig cfg;
  cfg.n_auvs = static_cast<int>(state.range(0));
  cfg.n_targets = cfg.n_auvs / 3 + 1;
  cfg.interference = true;
  auto world = env::init_world(cfg);
  std::vector<env::Action> actions(static_cast<std::size_t>(cfg.n_auvs), env::Action{Vec3(0.3, -0.2, 0.1)});
  for (auto _ : state) {
    if (world.tick >= cfg.episode_len) world = env::init_world(cfg);
    world = env::step_world(world, actions, cfg);
  }
}
BENCHMARK(BM_StepWorld)->Arg(4)->Arg(12);

void BM_AssignTargets(benchmark::State& state) {
  env::ScenarioConfig cfg;
  cfg.n_auvs = 12;
  cfg.n_targets = 4;
  const auto world = env::init_world(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(reward::assign_targets(world, cfg.n_targets));
}
BENCHMARK(BM_AssignTargets);

void BM_LearnStep(benchmark::State& state) {
  marl::LearnerConfig lc;
  lc.hyper.batch_size = static_cast<int>(state.range(0));
  lc.hyper.warmup_steps = 0;
  lc.scaler.bounds = Vec3(50, 50, 50);
  lc.scaler.v_max = 2.0;
  marl::Learner learner(lc, 7);
  env::ScenarioConfig cfg;
  auto world = env::init_world(cfg);
  const auto assignment = reward::assign_targets(world, cfg.n_targets);
  Rng rng(3);
  std::vector<env::Action> actions(4, env::Action{Vec3(0.1, 0.2, -0.1)});
  for (int k = 0; k < lc.hyper.batch_size; ++k) {
    auto next = env::step_world(world, actions, cfg);
    marl::Transition t;
    t.global_state = marl::global_state(world);
    t.next_global_state = marl::global_state(next);
    for (int i = 0; i < 4; ++i) {
      t.observations.push_back(env::observe(world, i, assignment, rng).flatten());
      t.next_observations.push_back(env::observe(next, i, assignment, rng).flatten());
      t.joint_actions.push_back(actions[static_cast<std::size_t>(i)].command);
      t.r_scene.push_back(0.5);
      t.r_general.push_back(-0.1);
    }
    t.assignment = assignment;
    learner.observe(std::move(t));
    world = next;
  }
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step());
}
BENCHMARK(BM_LearnStep)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

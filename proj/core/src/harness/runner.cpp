#include "samarl/harness/runner.hpp"

#include "samarl/harness/metrics.hpp"
#include "samarl/reward/reward.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

namespace samarl::harness {
namespace {

namespace fs = std::filesystem;

// Stream ids for derive_stream; the learner owns 2 and 3.
constexpr std::uint64_t kExploreStream = 4;
constexpr std::uint64_t kChannelStream = 5;
constexpr std::uint64_t kSenseStream = 6;
constexpr std::uint64_t kEvalChannelStream = 7;
constexpr std::uint64_t kEvalSenseStream = 8;
constexpr std::uint64_t kEvalExploreStream = 9;
constexpr std::uint64_t kWorkerStreamBase = 100;

beacon::ControlPlaneConfig plane_config(const RunConfig& c) {
  beacon::ControlPlaneConfig pc;
  pc.channel = c.effective_channel();
  pc.control_cycle = c.control_cycle;
  pc.global_cycle_multiplier = c.global_cycle_multiplier;
  pc.comms_gated = c.comms_gated;
  return pc;
}

std::unique_ptr<beacon::ControlPlane> make_plane(const RunConfig& c, Rng rng) {
  return std::make_unique<beacon::ControlPlane>(c.scenario, plane_config(c), std::move(rng));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool same_scenario(const RunConfig& a, const RunConfig& b) {
  static const std::array<const char*, 18> keys{
      "n_auvs",       "n_targets",    "interference", "bounds",        "dt",           "episode_len",
      "v_max",        "v_target_max", "a_max",        "d_target",      "d_auv",        "actuator_tau",
      "c_drag",       "sigma_obs",    "target_theta", "target_sigma",  "current_theta", "current_sigma"};
  const auto ka = to_key_values(a);
  const auto kb = to_key_values(b);
  for (const char* k : keys) {
    for (std::size_t i = 0; i < ka.size(); ++i) {
      if (ka[i].first == k && ka[i].second != kb[i].second) return false;
    }
  }
  return true;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t phase, std::uint64_t index) {
  Rng r = derive_stream(base, (phase << 40) ^ (index + 1));
  return r();
}

EpisodeRecord run_episode(const EpisodeContext& ctx, int episode_index, std::uint64_t world_seed) {
  require(ctx.config && ctx.explore_rng && ctx.sense_rng && ctx.plane, "run_episode: incomplete context");
  require(ctx.policy == PolicyKind::kRandom || ctx.nets, "run_episode: actor policy needs networks");
  const RunConfig& cfg = *ctx.config;
  env::ScenarioConfig sc = cfg.scenario;
  sc.seed = world_seed;
  const int n = sc.n_auvs;
  const int m = sc.n_targets;
  const auto nu = static_cast<std::size_t>(n);
  const marl::LearnerConfig lc = cfg.learner_config();

  env::WorldState world = env::init_world(sc);
  ctx.plane->start(world, reward::assign_targets(world, m));
  const auto sink = ctx.sink ? ctx.sink : beacon::CommitSink([](marl::Transition&&) {});

  EpisodeRecord rec;
  rec.episode = episode_index;
  rec.explore_sigma = ctx.sigma;
  std::array<int, marl::kSceneCount> dominant_votes{};
  double tracked_sum = 0.0;
  const std::uint64_t committed0 = ctx.plane->committed();
  const std::uint64_t dropped0 = ctx.plane->dropped_incomplete();

  std::vector<env::ObsVector> obs(nu);
  env::Assignment obs_assignment;
  std::vector<env::Action> actions(nu);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  auto record_rows = [&](const env::WorldState& w, const env::Assignment& a, const marl::SceneWeights& sw, double fw) {
    if (!ctx.trajectory) return;
    for (const auto& auv : w.auvs) {
      ctx.trajectory->push_back(TrajectoryRow{w.tick, "auv", auv.id, auv.position, auv.velocity,
                                              a[static_cast<std::size_t>(auv.id)], sw.dominant, fw});
    }
    for (const auto& tg : w.targets) {
      ctx.trajectory->push_back(TrajectoryRow{w.tick, "target", tg.id, tg.position, tg.velocity, -1, sw.dominant, fw});
    }
  };

  for (int t = 0; t < sc.episode_len; ++t) {
    const env::Assignment assignment = ctx.plane->follower_assignment();
    if (t == 0 || assignment != obs_assignment) {
      for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env::observe(world, i, assignment, *ctx.sense_rng).flatten();
      obs_assignment = assignment;
    }

    marl::SceneWeights sw;
    double fw = 0.0;
    if (ctx.nets) {
      std::vector<env::ObsVector> scaled(nu);
      for (std::size_t i = 0; i < nu; ++i) scaled[i] = lc.scaler.normalize(obs[i]);
      sw = marl::identify_scene(ctx.nets->gating, marl::encode_observations(ctx.nets->encoder, scaled));
      fw = marl::fusion_weight(sw, cfg.w_mode);
    }
    ++dominant_votes[static_cast<std::size_t>(sw.dominant)];
    rec.mean_w += fw;

    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      if (ctx.policy == PolicyKind::kRandom) {
        actions[ii].command = Vec3(uni(*ctx.explore_rng), uni(*ctx.explore_rng), uni(*ctx.explore_rng));
      } else {
        actions[ii] = marl::select_action(ctx.nets->actor_for(i), lc.scaler, obs[ii], ctx.sigma, *ctx.explore_rng);
      }
    }

    env::WorldState next = env::step_world(world, actions, sc);

    marl::Transition tr;
    tr.global_state = marl::global_state(world);
    tr.observations = obs;
    tr.joint_actions.resize(nu);
    for (std::size_t i = 0; i < nu; ++i) tr.joint_actions[i] = actions[i].command;
    tr.r_scene.resize(nu);
    tr.r_general.resize(nu);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const auto rb = reward::compose_reward(next, i, assignment, cfg.coeffs, sc);
      tr.r_scene[ii] = rb.r_scene;
      tr.r_general[ii] = rb.r_general;
      rec.mean_return += rb.r_total;
      rec.r_track += rb.r_track;
      rec.r_form += rb.r_form;
      rec.r_smooth += rb.r_smooth;
      rec.r_vel += rb.r_vel;
    }
    tr.next_global_state = marl::global_state(next);
    for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env::observe(next, i, assignment, *ctx.sense_rng).flatten();
    tr.next_observations = obs;
    tr.done = (t + 1 == sc.episode_len);
    tr.scene_label = marl::cluster_scene_label(world, assignment, sc);
    tr.assignment = assignment;
    tr.episode = episode_index;
    tr.tick = t;

    std::vector<Vec3> auv_pos(nu);
    std::vector<Vec3> tgt_pos(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < nu; ++i) auv_pos[i] = next.auvs[i].position;
    for (std::size_t k = 0; k < tgt_pos.size(); ++k) tgt_pos[k] = next.targets[k].position;
    tracked_sum += static_cast<double>(tracked_targets(auv_pos, tgt_pos, assignment, sc.d_target)) / m;

    ctx.plane->submit(std::move(tr), sink);
    world = std::move(next);
    record_rows(world, assignment, sw, fw);
    ctx.plane->advance(world, sink);
  }
  ctx.plane->finish(world, sink);

  const double inv_n = 1.0 / n;
  rec.mean_return *= inv_n;
  rec.r_track *= inv_n;
  rec.r_form *= inv_n;
  rec.r_smooth *= inv_n;
  rec.r_vel *= inv_n;
  rec.mean_w /= sc.episode_len;
  rec.tracking_accuracy = 100.0 * tracked_sum / sc.episode_len;
  rec.dominant_scene = static_cast<int>(std::max_element(dominant_votes.begin(), dominant_votes.end()) - dominant_votes.begin());
  rec.committed = ctx.plane->committed() - committed0;
  rec.dropped_incomplete = ctx.plane->dropped_incomplete() - dropped0;
  return rec;
}

EvalSummary evaluate(const RunConfig& config, const marl::AgentNets* nets, int episodes, PolicyKind policy) {
  require(episodes >= 1, "evaluate: episodes must be >= 1");
  const std::uint64_t seed = config.scenario.seed;
  Rng explore = derive_stream(seed, kEvalExploreStream);
  Rng sense = derive_stream(seed, kEvalSenseStream);
  RunConfig eval_cfg = config;
  eval_cfg.comms_gated = false;
  auto plane = make_plane(eval_cfg, derive_stream(seed, kEvalChannelStream));
  EpisodeContext ctx;
  ctx.config = &eval_cfg;
  ctx.nets = policy == PolicyKind::kActor ? nets : nullptr;
  ctx.policy = policy;
  ctx.explore_rng = &explore;
  ctx.sense_rng = &sense;
  ctx.plane = plane.get();
  std::vector<double> returns;
  std::vector<double> accuracy;
  for (int k = 0; k < episodes; ++k) {
    const auto r = run_episode(ctx, k, episode_seed(seed, kEvalPhase, static_cast<std::uint64_t>(k)));
    returns.push_back(r.mean_return);
    accuracy.push_back(r.tracking_accuracy);
  }
  const auto rs = mean_std(returns);
  const auto as = mean_std(accuracy);
  return EvalSummary{episodes, rs.mean, rs.std, as.mean, as.std};
}

Trainer::Trainer(RunConfig config)
    : config_((config.validate(), std::move(config))),
      learner_(config_.learner_config(), config_.scenario.seed),
      explore_rng_(derive_stream(config_.scenario.seed, kExploreStream)),
      sense_rng_(derive_stream(config_.scenario.seed, kSenseStream)),
      plane_(make_plane(config_, derive_stream(config_.scenario.seed, kChannelStream))),
      sigma_(config_.hyper.explore_sigma) {
  for (int w = 0; config_.workers > 1 && w < config_.workers; ++w) {
    const std::uint64_t base = kWorkerStreamBase + 3 * static_cast<std::uint64_t>(w);
    workers_.push_back(Worker{derive_stream(config_.scenario.seed, base), derive_stream(config_.scenario.seed, base + 1),
                              make_plane(config_, derive_stream(config_.scenario.seed, base + 2))});
  }
}

void Trainer::stamp(EpisodeRecord& r) const {
  const auto& c = learner_.counters();
  r.env_steps = c.env_steps;
  r.learn_steps = c.learn_steps;
  r.critic_loss = c.last_critic_loss;
  r.actor_loss = c.last_actor_loss;
}

EpisodeRecord Trainer::train_sequential() {
  const auto t0 = std::chrono::steady_clock::now();
  // Followers act with the policy broadcast at the start of the episode.
  const marl::AgentNets snapshot = learner_.nets();
  EpisodeContext ctx;
  ctx.config = &config_;
  ctx.nets = &snapshot;
  ctx.sigma = sigma_;
  ctx.explore_rng = &explore_rng_;
  ctx.sense_rng = &sense_rng_;
  ctx.plane = plane_.get();
  ctx.sink = [this](marl::Transition&& t) { learner_.observe(std::move(t)); };
  EpisodeRecord r =
      run_episode(ctx, episode_, episode_seed(config_.scenario.seed, kTrainPhase, static_cast<std::uint64_t>(episode_)));
  stamp(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++episode_;
  sigma_ = std::max(config_.hyper.explore_min, sigma_ * config_.hyper.explore_decay);
  return r;
}

void Trainer::train_parallel() {
  const auto t0 = std::chrono::steady_clock::now();
  const int count = std::min(config_.workers, config_.episodes - episode_);
  const marl::AgentNets snapshot = learner_.nets();
  std::vector<std::vector<marl::Transition>> collected(static_cast<std::size_t>(count));
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  double sigma = sigma_;
  std::vector<double> sigmas;
  for (int w = 0; w < count; ++w) {
    sigmas.push_back(sigma);
    sigma = std::max(config_.hyper.explore_min, sigma * config_.hyper.explore_decay);
  }
  std::vector<std::thread> threads;
  for (int w = 0; w < count; ++w) {
    threads.emplace_back([&, w] {
      const auto wi = static_cast<std::size_t>(w);
      try {
        auto& worker = workers_[wi];
        EpisodeContext ctx;
        ctx.config = &config_;
        ctx.nets = &snapshot;
        ctx.sigma = sigmas[wi];
        ctx.explore_rng = &worker.explore_rng;
        ctx.sense_rng = &worker.sense_rng;
        ctx.plane = worker.plane.get();
        ctx.sink = [&collected, wi](marl::Transition&& t) { collected[wi].push_back(std::move(t)); };
        const int index = episode_ + w;
        records[wi] = run_episode(ctx, index, episode_seed(config_.scenario.seed, kTrainPhase, static_cast<std::uint64_t>(index)));
      } catch (...) {
        errors[wi] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / count;
  for (int w = 0; w < count; ++w) {
    const auto wi = static_cast<std::size_t>(w);
    for (auto& t : collected[wi]) learner_.observe(std::move(t));
    stamp(records[wi]);
    records[wi].wall_seconds = wall;
    queued_.push_back(records[wi]);
  }
  episode_ += count;
  sigma_ = sigma;
}

EpisodeRecord Trainer::train_episode() {
  if (config_.workers <= 1) return train_sequential();
  if (queued_.empty()) train_parallel();
  EpisodeRecord r = queued_.front();
  queued_.erase(queued_.begin());
  return r;
}

CheckpointState Trainer::checkpoint() const {
  CheckpointState s;
  s.config = config_;
  s.episode = episode_;
  s.explore_sigma = sigma_;
  s.nets = learner_.nets();
  s.optimizers = learner_.optimizers();
  s.counters = learner_.counters();
  s.sample_rng = rng_to_string(learner_.sample_rng());
  s.explore_rng = rng_to_string(explore_rng_);
  return s;
}

const std::vector<std::string>& train_log_columns() {
  static const std::vector<std::string> cols{
      "episode",         "mean_return",  "r_track",     "r_form",      "r_smooth",  "r_vel",
      "tracking_accuracy", "explore_sigma", "mean_w",    "dominant_scene", "env_steps", "learn_steps",
      "critic_loss",     "actor_loss",   "committed",   "dropped_incomplete"};
  return cols;
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
}

std::string format_episode_row(const EpisodeRecord& r) {
  return std::to_string(r.episode) + "," + fmt(r.mean_return) + "," + fmt(r.r_track) + "," + fmt(r.r_form) + "," +
         fmt(r.r_smooth) + "," + fmt(r.r_vel) + "," + fmt(r.tracking_accuracy) + "," + fmt(r.explore_sigma) + "," +
         fmt(r.mean_w) + "," + std::to_string(r.dominant_scene) + "," + std::to_string(r.env_steps) + "," +
         std::to_string(r.learn_steps) + "," + fmt(r.critic_loss) + "," + fmt(r.actor_loss) + "," +
         std::to_string(r.committed) + "," + std::to_string(r.dropped_incomplete);
}

TrainingResult run_training(const RunConfig& config, const ProgressFn& progress) {
  config.validate();
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  std::ofstream train_log = open("train_log.csv");
  std::ofstream eval_log = open("eval_log.csv");
  std::ofstream timing = open("timing.csv");
  {
    std::ofstream cfg_out = open("config.txt");
    cfg_out << format_config(config);
  }
  write_csv_header(train_log, train_log_columns());
  write_csv_header(eval_log, {"episode", "eval_episodes", "return_mean", "return_std", "accuracy_mean", "accuracy_std"});
  write_csv_header(timing, {"episode", "wall_seconds"});

  Trainer trainer(config);
  TrainingResult result;
  while (trainer.episodes_done() < config.episodes) {
    const EpisodeRecord r = trainer.train_episode();
    train_log << format_episode_row(r) << '\n';
    timing << r.episode << ',' << fmt(r.wall_seconds) << '\n';
    result.episodes.push_back(r);
    if (progress) progress(r);
    const int done = r.episode + 1;
    if (done % config.eval_every == 0 || done == config.episodes) {
      const auto ckpt = trainer.checkpoint();
      const EvalSummary ev = evaluate(config, &ckpt.nets, config.eval_episodes, PolicyKind::kActor);
      eval_log << done << ',' << ev.episodes << ',' << fmt(ev.return_mean) << ',' << fmt(ev.return_std) << ','
               << fmt(ev.accuracy_mean) << ',' << fmt(ev.accuracy_std) << '\n';
      result.evals.emplace_back(done, ev);
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%06d.bin", done);
      save_checkpoint(ckpt, (dir / "checkpoints" / name).string());
      if (done == config.episodes) {
        result.final_checkpoint = (dir / "final.ckpt").string();
        save_checkpoint(ckpt, result.final_checkpoint);
      }
    }
  }
  for (auto* f : {&train_log, &eval_log, &timing}) {
    f->flush();
    if (!*f) throw IoError("writing logs under '" + dir.string() + "' failed");
  }
  return result;
}

EvalSummary run_eval(const CheckpointState& checkpoint, const RunConfig& config, int episodes, PolicyKind policy) {
  if (!same_scenario(checkpoint.config, config)) {
    throw ConfigError("checkpoint scenario does not match the evaluation config");
  }
  return evaluate(config, &checkpoint.nets, episodes, policy);
}

std::vector<TrajectoryRow> record_episode(const CheckpointState& checkpoint, int eval_index) {
  const RunConfig& cfg = checkpoint.config;
  const std::uint64_t seed = cfg.scenario.seed;
  Rng explore = derive_stream(seed, kEvalExploreStream);
  Rng sense = derive_stream(seed, kEvalSenseStream);
  RunConfig eval_cfg = cfg;
  eval_cfg.comms_gated = false;
  auto plane = make_plane(eval_cfg, derive_stream(seed, kEvalChannelStream));
  std::vector<TrajectoryRow> rows;
  EpisodeContext ctx;
  ctx.config = &eval_cfg;
  ctx.nets = &checkpoint.nets;
  ctx.explore_rng = &explore;
  ctx.sense_rng = &sense;
  ctx.plane = plane.get();
  ctx.trajectory = &rows;
  run_episode(ctx, eval_index, episode_seed(seed, kEvalPhase, static_cast<std::uint64_t>(eval_index)));
  return rows;
}

}  // namespace samarl::harness

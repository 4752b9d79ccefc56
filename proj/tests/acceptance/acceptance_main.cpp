// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include "samarl/beacon/control_plane.hpp"
#include "samarl/harness/config.hpp"
#include "samarl/harness/metrics.hpp"
#include "samarl/harness/runner.hpp"
#include "samarl/nn/mlp.hpp"
#include "samarl/reward/reward.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace {

using namespace samarl;
using namespace samarl::harness;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::string config;
  std::string work_dir;
  std::string cli;
  std::vector<int> only;
  int seeds = 5;
  int random_episodes = 100;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(20240101);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    for (const auto head : {nn::Activation::kIdentity, nn::Activation::kTanh}) {
      const std::array dims{8, 16, 16, head == nn::Activation::kTanh ? 4 : 1};
      const std::array acts{nn::Activation::kRelu, nn::Activation::kRelu, head};
      const auto params = nn::mlp_init(dims, acts, rng);
      nn::Vector x(8);
      for (int k = 0; k < 8; ++k) x(k) = g(rng);
      worst = std::max(worst, nn::grad_check(params, x, 1e-5));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, fmt("max relative error %.3g over 40 nets, %.2f s", worst, secs)};
}

Outcome fusion_identities() {
  Rng rng(7);
  std::uniform_real_distribution<double> q(-1e4, 1e4);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  int bad_ends = 0;
  int outside = 0;
  for (int i = 0; i < 100000; ++i) {
    const double qg = q(rng);
    const double qs = q(rng);
    if (marl::fuse_q(qg, qs, 0.0) != qg || marl::fuse_q(qg, qs, 1.0) != qs) ++bad_ends;
    const double f = marl::fuse_q(qg, qs, w(rng));
    if (f < std::min(qg, qs) || f > std::max(qg, qs)) ++outside;
  }
  return {bad_ends == 0 && outside == 0,
          fmt("10^5 triples: %d endpoint mismatches, %d fused values outside [min, max]", bad_ends, outside)};
}

Outcome reward_properties() {
  const reward::RewardCoefficients k;
  int not_decreasing = 0;
  double prev = reward::tracking_reward(0.0, k, 5.0);
  for (int i = 1; i <= 100000; ++i) {
    const double r = reward::tracking_reward(i * 1e-3, k, 5.0);
    if (!(r < prev)) ++not_decreasing;
    prev = r;
  }

  const std::vector<Vec3> spread{Vec3(0, 0, 0), Vec3(5, 0, 0), Vec3(0, 5, 0)};
  const Vec3 v(0.3, -0.2, 0.1);
  const bool zeros = reward::formation_reward(spread, 0, k, 4.0) == 0.0 &&
                     reward::smoothness_reward(v, v, k) == 0.0 &&
                     reward::velocity_consistency_reward(v, v, k) == 0.0;

  int split_mismatch = 0;
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> preset(0, 2);
  const std::array<std::pair<int, int>, 3> scales{{{4, 2}, {6, 3}, {12, 4}}};
  for (int trial = 0; trial < 10000; ++trial) {
    env::ScenarioConfig sc;
    const auto [n, m] = scales[static_cast<std::size_t>(preset(rng))];
    sc.n_auvs = n;
    sc.n_targets = m;
    sc.interference = trial % 2 == 1;
    sc.bounds = Vec3(15, 15, 15);
    sc.seed = static_cast<std::uint64_t>(trial);
    auto world = env::init_world(sc);
    std::vector<env::Action> acts(static_cast<std::size_t>(n));
    for (int step = 0; step < 3; ++step) {
      for (auto& a : acts) a.command = Vec3(u(rng), u(rng), u(rng));
      world = env::step_world(world, acts, sc);
    }
    const auto asg = reward::assign_targets(world, m);
    for (int i = 0; i < n; ++i) {
      const auto r = reward::compose_reward(world, i, asg, k, sc);
      if (r.r_scene + r.r_general != r.r_total) ++split_mismatch;
    }
  }
  return {not_decreasing == 0 && zeros && split_mismatch == 0,
          fmt("grid violations %d, ideal penalties zero: %s, split mismatches %d on 10^4 worlds", not_decreasing,
              zeros ? "yes" : "no", split_mismatch)};
}

Outcome physics_and_determinism(const RunConfig& base, const Options& opt) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<int> preset(0, 2);
  const std::array<std::pair<int, int>, 3> scales{{{4, 2}, {6, 3}, {12, 4}}};
  long steps = 0;
  long violations = 0;
  std::uint64_t seed = 0;
  while (steps < 100000) {
    env::ScenarioConfig sc;
    const auto [n, m] = scales[static_cast<std::size_t>(preset(rng))];
    sc.n_auvs = n;
    sc.n_targets = m;
    sc.interference = seed % 2 == 0;
    sc.bounds = Vec3(8 + static_cast<double>(seed % 5), 10, 12);
    sc.episode_len = 1000;
    sc.seed = seed++;
    auto world = env::init_world(sc);
    std::vector<env::Action> acts(static_cast<std::size_t>(n));
    for (int t = 0; t < 1000; ++t) {
      for (auto& a : acts) a.command = Vec3(u(rng), u(rng), u(rng));
      world = env::step_world(world, acts, sc);
      ++steps;
      for (const auto& a : world.auvs) {
        if (a.velocity.norm() > sc.v_max * (1 + 1e-12)) ++violations;
        if ((a.position.cwiseAbs() - sc.bounds).maxCoeff() > 0.0) ++violations;
      }
      for (const auto& tg : world.targets) {
        if (tg.velocity.norm() > sc.v_target_max * (1 + 1e-12)) ++violations;
        if ((tg.position.cwiseAbs() - sc.bounds).maxCoeff() > 0.0) ++violations;
      }
    }
  }

  // Two short `train` runs, same config and seed, single worker.
  RunConfig cfg = base;
  apply_preset(cfg, "4v2");
  cfg.episodes = std::min(cfg.episodes, 30);
  cfg.eval_every = 10;
  cfg.workers = 1;
  const fs::path dir = fs::path(opt.work_dir) / "c4";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::array<std::string, 2> logs;
  std::string how;
  if (!opt.cli.empty()) {
    const fs::path conf = dir / "determinism.conf";
    std::ofstream(conf) << format_config(cfg);
    for (int r = 0; r < 2; ++r) {
      const fs::path out = dir / ("run" + std::to_string(r));
      const std::string cmd = "\"" + opt.cli + "\" train --quiet --config \"" + conf.string() + "\" --seed " +
                              std::to_string(cfg.scenario.seed) + " --out \"" + out.string() + "\" > \"" +
                              (dir / ("run" + std::to_string(r) + ".log")).string() + "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "train subprocess failed: " + cmd};
      logs[static_cast<std::size_t>(r)] = slurp(out / "train_log.csv");
    }
    how = "CLI";
  } else {
    for (int r = 0; r < 2; ++r) {
      cfg.output_dir = (dir / ("run" + std::to_string(r))).string();
      run_training(cfg);
      logs[static_cast<std::size_t>(r)] = slurp(fs::path(cfg.output_dir) / "train_log.csv");
    }
    how = "library";
  }
  const bool identical = !logs[0].empty() && logs[0] == logs[1];
  return {violations == 0 && identical,
          fmt("%ld randomized steps, %ld invariant violations; two %d-episode %s train runs byte-identical: %s", steps,
              violations, cfg.episodes, how.c_str(), identical ? "yes" : "no")};
}

Outcome beacon_layer() {
  using namespace samarl::beacon;
  Rng rng(5);
  // Codec round trip.
  int codec_fail = 0;
  std::uniform_int_distribution<int> nd(1, 12);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_real_distribution<float> real(-1e3F, 1e3F);
  std::uniform_real_distribution<float> unit(0.0F, 1.0F);
  for (int i = 0; i < 10000; ++i) {
    const int n = nd(rng);
    Beacon b;
    b.src = static_cast<std::uint16_t>(u32(rng));
    b.dst = static_cast<std::uint16_t>(u32(rng));
    b.tick = u32(rng);
    switch (i % 4) {
      case 0:
        b.payload = GloRequest{static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint16_t>(u32(rng)), real(rng),
                               real(rng), u32(rng)};
        break;
      case 1: {
        GloReply p;
        for (int j = 0; j < n * (n - 1) / 2; ++j) p.cluster_topo.push_back(byte(rng) % 2 == 0);
        p.exe_progress = unit(rng);
        p.est_reward = real(rng);
        b.payload = p;
        break;
      }
      case 2: {
        LocRequest p;
        for (int j = 0; j < n; ++j) p.local_task.push_back(static_cast<std::uint8_t>(byte(rng)));
        p.control_cycle = static_cast<std::uint16_t>(u32(rng));
        b.payload = p;
        break;
      }
      default: {
        LocReply p;
        for (auto& x : p.auv_state) x = real(rng);
        p.instant_reward = real(rng);
        p.error_flag = static_cast<std::uint8_t>(byte(rng));
        b.payload = p;
      }
    }
    if (decode_beacon(encode_beacon(b), n) != b) ++codec_fail;
  }

  // Delay against the closed formula.
  const ChannelParams params;
  double worst_delay = 0.0;
  std::uniform_real_distribution<double> pos(-600, 600);
  std::uniform_real_distribution<double> bits(0, 5000);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 a(pos(rng), pos(rng), pos(rng));
    const Vec3 b(pos(rng), pos(rng), pos(rng));
    const double s = bits(rng);
    const double closed = std::hypot(a.x() - b.x(), a.y() - b.y(), a.z() - b.z()) / 1500.0 + s / 2000.0;
    worst_delay = std::max(worst_delay, std::abs(transmission_delay(a, b, s, params) - closed));
  }

  // Conservation under every schedule of up to 7 operations.
  const std::vector<Vec3> nodes{Vec3::Zero(), Vec3(300, 0, 0), Vec3(15, 0, 0)};
  long schedules = 0;
  long conservation_fail = 0;
  for (double loss : {0.0, 0.3, 1.0}) {
    for (int len = 1; len <= 7; ++len) {
      const int words = static_cast<int>(std::pow(3, len));
      for (int word = 0; word < words; ++word) {
        ChannelParams p;
        p.p_loss = loss;
        AcousticChannel ch(p, 4, Rng(static_cast<std::uint64_t>(word * 7 + len)));
        std::vector<ChannelEvent> sent;
        std::map<std::uint32_t, int> got;
        double t = 0.0;
        int w = word;
        auto take = [&](double now) {
          for (const auto& b : ch.poll(now)) {
            ++got[b.tick];
            if (sent[b.tick].deliver_time > now) ++conservation_fail;
          }
        };
        for (int s = 0; s < len; ++s, w /= 3) {
          if (w % 3 == 2) {
            t += 0.05;
            take(t);
            continue;
          }
          Beacon b;
          b.src = 0;
          b.dst = w % 3 == 0 ? 2 : 1;
          b.tick = static_cast<std::uint32_t>(sent.size());
          b.payload = LocReply{};
          sent.push_back(ch.send(b, nodes, t));
        }
        take(1e9);
        for (const auto& ev : sent) {
          const int d = got.count(ev.beacon.tick) != 0 ? got[ev.beacon.tick] : 0;
          if (ev.dropped ? d != 0 : d != 1) ++conservation_fail;
        }
        ++schedules;
      }
    }
  }

  // Drop rate.
  ChannelParams lossy;
  lossy.p_loss = 0.1;
  AcousticChannel ch(lossy, 4, Rng(6));
  const int sends = 10000;
  int dropped = 0;
  Beacon b;
  b.src = 0;
  b.dst = 1;
  b.payload = LocReply{};
  const std::vector<Vec3> pair{Vec3::Zero(), Vec3(20, 0, 0)};
  for (int i = 0; i < sends; ++i) dropped += ch.send(b, pair, 0.0).dropped ? 1 : 0;
  const double sigma = std::sqrt(sends * 0.1 * 0.9);
  const double z = (dropped - sends * 0.1) / sigma;

  const bool pass = codec_fail == 0 && worst_delay <= 1e-9 && conservation_fail == 0 && std::abs(z) <= 3.0;
  return {pass, fmt("codec failures %d/10^4, max delay error %.2g s, %ld schedules with %ld conservation failures, "
                    "drop rate %.4f (z = %.2f)",
                    codec_fail, worst_delay, schedules, conservation_fail, dropped / static_cast<double>(sends), z)};
}

// ---------------------------------------------------------------------------

struct RunSummary {
  double final_accuracy = 0.0;   // last evaluation
  double final_ma_return = 0.0;  // 100-episode moving average at the end
  TrendFit trend;
  double ma_start_final_third = 0.0;
  double wall_seconds = 0.0;
};

RunSummary train_and_summarize(RunConfig cfg, const fs::path& dir) {
  cfg.output_dir = dir.string();
  cfg.workers = 1;
  fs::remove_all(dir);
  const auto t0 = Clock::now();
  const auto result = run_training(cfg);
  RunSummary s;
  s.wall_seconds = seconds_since(t0);
  s.final_accuracy = result.evals.back().second.accuracy_mean;
  std::vector<double> returns;
  for (const auto& r : result.episodes) returns.push_back(r.mean_return);
  const auto ma = moving_average(returns, 100);
  s.final_ma_return = ma.back();
  const std::size_t third = returns.size() / 3;
  const std::size_t from = returns.size() - third;
  s.ma_start_final_third = ma[from == 0 ? 0 : from - 1];
  s.trend = linear_trend(std::span<const double>(returns).subspan(from));
  std::printf("  run %s: accuracy %.2f%%, MA100 return %.3f, %.0f s\n", dir.filename().c_str(), s.final_accuracy,
              s.final_ma_return, s.wall_seconds);
  std::fflush(stdout);
  return s;
}

class LearningRuns {
 public:
  LearningRuns(RunConfig base, const Options& opt) : base_(std::move(base)), opt_(opt) {
    apply_preset(base_, "4v2");
    base_.scenario.interference = false;
    base_.w_mode = marl::WMode{};
  }

  const RunSummary& get(const std::string& mode, bool interference, int seed_index) {
    const std::string key = mode + (interference ? "_interf" : "_clean") + "_s" + std::to_string(seed_index);
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    RunConfig cfg = base_;
    cfg.w_mode = marl::WMode::parse(mode);
    cfg.scenario.interference = interference;
    cfg.scenario.seed = base_.scenario.seed + static_cast<std::uint64_t>(seed_index);
    std::string dirname = key;
    std::replace(dirname.begin(), dirname.end(), ':', '_');
    return runs_.emplace(key, train_and_summarize(cfg, fs::path(opt_.work_dir) / "learning" / dirname)).first->second;
  }

  [[nodiscard]] const RunConfig& base() const { return base_; }

 private:
  RunConfig base_;
  const Options& opt_;
  std::map<std::string, RunSummary> runs_;
};

Outcome learning_smoke(LearningRuns& runs, const Options& opt) {
  const RunConfig& cfg = runs.base();
  if (cfg.episodes > 2000) return {false, fmt("config asks for %d episodes; the budget is 2000", cfg.episodes)};
  // The random-policy oracle is measured before any training.
  const auto random = evaluate(cfg, nullptr, opt.random_episodes, PolicyKind::kRandom);
  std::printf("  random-policy oracle: return %.3f +- %.3f, accuracy %.2f%% over %d episodes\n", random.return_mean,
              random.return_std, random.accuracy_mean, random.episodes);
  const auto& s = runs.get("max_a", false, 0);
  const double gate = 3.0 * random.return_mean;
  const bool return_ok = s.final_ma_return >= gate;
  const bool accuracy_ok = s.final_accuracy >= 70.0;
  // Final third: the fitted per-episode slope may not be significantly negative.
  const bool trend_ok = s.trend.slope + 2.0 * s.trend.slope_se >= 0.0;
  const bool time_ok = s.wall_seconds <= 1800.0;
  return {return_ok && accuracy_ok && trend_ok && time_ok,
          fmt("%d episodes in %.0f s; MA100 return %.2f vs 3x random %.2f (%s); eval accuracy %.2f%% (%s); "
              "final-third slope %.4f +- %.4f per episode, MA %.2f -> %.2f (%s)",
              cfg.episodes, s.wall_seconds, s.final_ma_return, gate, return_ok ? "ok" : "low", s.final_accuracy,
              accuracy_ok ? "ok" : "low", s.trend.slope, s.trend.slope_se, s.ma_start_final_third, s.final_ma_return,
              trend_ok ? "ok" : "decreasing")};
}

double mean_accuracy(LearningRuns& runs, const std::string& mode, bool interference, int seeds) {
  double sum = 0.0;
  for (int k = 0; k < seeds; ++k) sum += runs.get(mode, interference, k).final_accuracy;
  return sum / seeds;
}

Outcome ablation(LearningRuns& runs, const Options& opt) {
  const double full = mean_accuracy(runs, "max_a", false, opt.seeds);
  const double w0 = mean_accuracy(runs, "fixed:0", false, opt.seeds);
  const double w1 = mean_accuracy(runs, "fixed:1", false, opt.seeds);
  const double bar = std::max(w0, w1) - 5.0;
  return {full >= bar, fmt("mean accuracy over %d seeds: max_a %.2f%%, w=0 %.2f%%, w=1 %.2f%% (bar %.2f%%)", opt.seeds,
                           full, w0, w1, bar)};
}

Outcome interference(LearningRuns& runs, const Options& opt) {
  const double clean = mean_accuracy(runs, "max_a", false, opt.seeds);
  const double noisy = mean_accuracy(runs, "max_a", true, opt.seeds);
  const double drop = clean - noisy;
  return {drop <= 15.0,
          fmt("mean accuracy over %d seeds: clean %.2f%%, interference %.2f%%, drop %.2f points", opt.seeds, clean,
              noisy, drop)};
}

Outcome comms_gated(const RunConfig& base) {
  RunConfig cfg = base;
  apply_preset(cfg, "4v2");
  cfg.scenario.interference = false;
  cfg.channel.p_loss = 0.0;
  cfg.channel.comm_range = 1e6;
  cfg.episodes = 50;
  cfg.workers = 1;
  cfg.hyper.buffer_capacity = std::max(cfg.hyper.buffer_capacity, 50 * cfg.scenario.episode_len);
  std::array<std::unique_ptr<Trainer>, 2> t;
  for (int gated = 0; gated < 2; ++gated) {
    cfg.comms_gated = gated == 1;
    t[static_cast<std::size_t>(gated)] = std::make_unique<Trainer>(cfg);
    for (int e = 0; e < cfg.episodes; ++e) t[static_cast<std::size_t>(gated)]->train_episode();
  }
  const auto& a = t[0]->learner().buffer();
  const auto& b = t[1]->learner().buffer();
  std::size_t mismatches = a.size() == b.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) mismatches += a.at(i) == b.at(i) ? 0 : 1;
  const bool same_params = t[0]->learner().nets().actors == t[1]->learner().nets().actors;
  const std::size_t expected = static_cast<std::size_t>(cfg.episodes) * static_cast<std::size_t>(cfg.scenario.episode_len);
  return {mismatches == 0 && a.size() == expected && same_params,
          fmt("50 episodes: buffers hold %zu and %zu transitions, %zu mismatches; actor parameters identical: %s",
              a.size(), b.size(), mismatches, same_params ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Acceptance suite"};
  app.add_option("--config", opt.config, "Base run config for the learning criteria")->required();
  app.add_option("--work-dir", opt.work_dir, "Scratch directory for training runs")->required();
  app.add_option("--cli", opt.cli, "samarl binary used for the determinism check");
  app.add_option("--only", opt.only, "Run only these criteria")->delimiter(',');
  app.add_option("--seeds", opt.seeds, "Seeds for the ablation and interference criteria")->check(CLI::PositiveNumber);
  app.add_option("--random-episodes", opt.random_episodes, "Episodes for the random-policy oracle")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  RunConfig base;
  try {
    base = load_config_file(opt.config);
    base.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
  fs::create_directories(opt.work_dir);

  const std::set<int> only(opt.only.begin(), opt.only.end());
  auto wanted = [&](int c) { return only.empty() || only.count(c) != 0; };
  LearningRuns runs(base, opt);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_check},
      {2, fusion_identities},
      {3, reward_properties},
      {4, [&] { return physics_and_determinism(base, opt); }},
      {5, beacon_layer},
      {6, [&] { return learning_smoke(runs, opt); }},
      {7, [&] { return ablation(runs, opt); }},
      {8, [&] { return interference(runs, opt); }},
      {9, [&] { return comms_gated(base); }},
  };

  int failures = 0;
  std::ofstream summary(fs::path(opt.work_dir) / "acceptance_summary.txt");
  for (const auto& [id, fn] : criteria) {
    if (!wanted(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = fmt("criterion %d: %s  %s  [%.1f s]", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                                 seconds_since(t0));
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary << line << '\n';
    summary.flush();
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

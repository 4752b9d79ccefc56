#include "samarl/marl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace samarl::marl {
namespace {

using nn::Activation;
using nn::ForwardCache;
using nn::MlpGrads;

constexpr double kProbFloor = 1e-12;

// Rows of a batch are (transition b, agent i) pairs at column b * n + i.
struct RowLayout {
  int batch = 0;
  int n = 0;
  [[nodiscard]] int rows() const { return batch * n; }
  [[nodiscard]] int col(int b, int i) const { return b * n + i; }
};

Matrix stack_observations(const Batch& batch, const LearnerConfig& cfg, bool next) {
  const RowLayout lay{static_cast<int>(batch.items.size()), cfg.n_auvs};
  Matrix out(env::kObservationDim, lay.rows());
  for (int b = 0; b < lay.batch; ++b) {
    const auto& obs = next ? batch.items[static_cast<std::size_t>(b)]->next_observations
                           : batch.items[static_cast<std::size_t>(b)]->observations;
    for (int i = 0; i < lay.n; ++i) out.col(lay.col(b, i)) = cfg.scaler.normalize(obs[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Column groups evaluated by each actor network.
std::vector<std::vector<int>> actor_groups(const RowLayout& lay, std::size_t n_actors) {
  std::vector<std::vector<int>> groups(n_actors);
  for (int b = 0; b < lay.batch; ++b) {
    for (int i = 0; i < lay.n; ++i) groups[n_actors == 1 ? 0 : static_cast<std::size_t>(i)].push_back(lay.col(b, i));
  }
  return groups;
}

Matrix gather_cols(const Matrix& m, const std::vector<int>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]);
  return out;
}

// Actions for every row from the per-actor networks (no noise).
Matrix policy_actions(const std::vector<const MlpParams*>& actors, const Matrix& obs, const RowLayout& lay) {
  Matrix out(3, lay.rows());
  const auto groups = actor_groups(lay, actors.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Matrix y = nn::mlp_predict(*actors[g], gather_cols(obs, groups[g]));
    for (std::size_t c = 0; c < groups[g].size(); ++c) out.col(groups[g][c]) = y.col(static_cast<Eigen::Index>(c));
  }
  return out;
}

// Scene probabilities per transition (kSceneCount x B) from scaled observations.
Matrix gating_probs(const MlpParams& encoder, const MlpParams& gating, const Matrix& obs, const RowLayout& lay) {
  const Matrix z = nn::mlp_predict(encoder, obs);
  const Eigen::Map<const Matrix> zcat(z.data(), z.rows() * lay.n, lay.batch);
  return nn::mlp_predict(gating, zcat);
}

void write_state_features(const Eigen::VectorXd& s, int agent, const Assignment& assignment, const LearnerConfig& cfg,
                          Eigen::Ref<Vector> out) {
  const Vec3 inv_b = cfg.scaler.bounds.cwiseInverse();
  const double inv_v = 1.0 / cfg.scaler.v_max;
  const int n = cfg.n_auvs;
  const int m = cfg.n_targets;
  auto pos = [&](int entity) -> Vec3 { return s.segment<3>(6 * entity); };
  auto vel = [&](int entity) -> Vec3 { return s.segment<3>(6 * entity + 3); };
  const Vec3 p0 = pos(agent);
  const int target_entity = n + assignment[static_cast<std::size_t>(agent)];
  Eigen::Index k = 0;
  auto put = [&](const Vec3& rel_pos, const Vec3& v) {
    out.segment<3>(k) = rel_pos.cwiseProduct(inv_b);
    out.segment<3>(k + 3) = v * inv_v;
    k += 6;
  };
  put(p0, vel(agent));
  put(pos(target_entity) - p0, vel(target_entity));
  for (int j = 0; j < n; ++j) {
    if (j != agent) put(pos(j) - p0, vel(j));
  }
  for (int t = 0; t < m; ++t) {
    if (n + t != target_entity) put(pos(n + t) - p0, vel(n + t));
  }
}

// action_of(b, j) supplies AUV j's action for transition b.
template <typename ActionOf>
Matrix critic_inputs(const Batch& batch, const LearnerConfig& cfg, bool next, ActionOf&& action_of) {
  const RowLayout lay{static_cast<int>(batch.items.size()), cfg.n_auvs};
  const int sd = cfg.state_dim();
  Matrix x(cfg.critic_input_dim(), lay.rows());
  for (int b = 0; b < lay.batch; ++b) {
    const Transition& t = *batch.items[static_cast<std::size_t>(b)];
    const Eigen::VectorXd& s = next ? t.next_global_state : t.global_state;
    for (int i = 0; i < lay.n; ++i) {
      auto col = x.col(lay.col(b, i));
      write_state_features(s, i, t.assignment, cfg, col.head(sd));
      Eigen::Index k = sd;
      col.segment<3>(k) = action_of(b, i);
      k += 3;
      for (int j = 0; j < lay.n; ++j) {
        if (j == i) continue;
        col.segment<3>(k) = action_of(b, j);
        k += 3;
      }
    }
  }
  return x;
}

double argmax_weight(const Eigen::Ref<const Vector>& a, int& dominant) {
  dominant = 0;
  for (Eigen::Index k = 1; k < a.size(); ++k) {
    if (a(k) > a(dominant)) dominant = static_cast<int>(k);
  }
  return a(dominant);
}

void clip_and_step(MlpParams& params, MlpGrads& grads, nn::AdamState& opt, double clip, bool& skipped) {
  nn::clip_global_norm(grads, clip);
  if (nn::adam_step(params, grads, opt) == nn::StepStatus::kSkippedNonFinite) skipped = true;
}

}  // namespace

WMode WMode::parse(const std::string& text) {
  if (text == "max_a") return {};
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) == 0) {
    WMode m;
    m.kind = Kind::kFixed;
    try {
      std::size_t used = 0;
      m.fixed = std::stod(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("w_mode: cannot parse value in '" + text + "'");
    }
    if (!(m.fixed >= 0.0 && m.fixed <= 1.0)) throw ConfigError("w_mode: fixed weight must lie in [0, 1]");
    return m;
  }
  throw ConfigError("w_mode: expected 'max_a' or 'fixed:<value>', got '" + text + "'");
}

std::string WMode::str() const {
  if (kind == Kind::kMaxA) return "max_a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "fixed:%.17g", fixed);
  return buf;
}

RewardSplit parse_reward_split(const std::string& text) {
  if (text == "decomposed") return RewardSplit::kDecomposed;
  if (text == "shared") return RewardSplit::kShared;
  throw ConfigError("reward_split: expected 'decomposed' or 'shared', got '" + text + "'");
}

std::string to_string(RewardSplit s) { return s == RewardSplit::kDecomposed ? "decomposed" : "shared"; }

void Hyperparams::validate() const {
  auto fail = [](const char* msg) { throw ConfigError(std::string("hyperparams: ") + msg); };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (!(lr_actor > 0.0 && lr_critic > 0.0 && lr_gating > 0.0)) fail("learning rates must be > 0");
  if (batch_size < 1 || buffer_capacity < 1) fail("batch_size and buffer_capacity must be >= 1");
  if (explore_sigma < 0.0 || explore_min < 0.0 || !(explore_decay > 0.0 && explore_decay <= 1.0)) {
    fail("exploration schedule out of range");
  }
  if (update_every < 1 || warmup_steps < 0) fail("update_every must be >= 1 and warmup_steps >= 0");
  if (lambda_scene < 0.0 || !(grad_clip > 0.0)) fail("lambda_scene must be >= 0 and grad_clip > 0");
  if (actor_hidden < 1 || encoder_hidden < 1 || latent_dim < 1 || gating_hidden < 1 || critic_hidden < 1) {
    fail("layer widths must be >= 1");
  }
}

ObsVector FeatureScaler::normalize(const ObsVector& raw) const {
  ObsVector out = raw;
  const Vec3 inv_b = bounds.cwiseInverse();
  out.segment<3>(0) /= v_max;
  out.segment<3>(3) = out.segment<3>(3).cwiseProduct(inv_b);
  out.segment<3>(6) /= v_max;
  out.segment<3>(9) = out.segment<3>(9).cwiseProduct(inv_b);
  out.segment<3>(12) = out.segment<3>(12).cwiseProduct(inv_b);
  return out;
}

AgentNets make_agent_nets(const LearnerConfig& cfg, Rng& rng) {
  cfg.hyper.validate();
  const auto& h = cfg.hyper;
  AgentNets nets;
  const int n_actors = h.shared_actor ? 1 : cfg.n_auvs;
  const std::array actor_acts{Activation::kRelu, Activation::kRelu, Activation::kTanh};
  const std::array actor_dims{env::kObservationDim, h.actor_hidden, h.actor_hidden, 3};
  for (int i = 0; i < n_actors; ++i) nets.actors.push_back(nn::mlp_init(actor_dims, actor_acts, rng));
  nets.actor_targets = nets.actors;

  const std::array enc_dims{env::kObservationDim, h.encoder_hidden, h.latent_dim};
  nets.encoder = nn::mlp_init(enc_dims, std::array{Activation::kRelu, Activation::kTanh}, rng);
  const std::array gate_dims{h.latent_dim * cfg.n_auvs, h.gating_hidden, kSceneCount};
  nets.gating = nn::mlp_init(gate_dims, std::array{Activation::kRelu, Activation::kSoftmax}, rng);

  const std::array critic_acts{Activation::kRelu, Activation::kRelu, Activation::kIdentity};
  const int d = cfg.critic_input_dim();
  nets.general = nn::mlp_init(std::array{d, h.critic_hidden, h.critic_hidden, 1}, critic_acts, rng);
  nets.scene = nn::mlp_init(std::array{d, h.critic_hidden, h.critic_hidden, kSceneCount}, critic_acts, rng);
  nets.general_target = nets.general;
  nets.scene_target = nets.scene;
  return nets;
}

Optimizers make_optimizers(const AgentNets& nets, const Hyperparams& hyper) {
  Optimizers o;
  for (const auto& a : nets.actors) o.actors.push_back(nn::adam_init(a, hyper.lr_actor));
  o.encoder = nn::adam_init(nets.encoder, hyper.lr_gating);
  o.gating = nn::adam_init(nets.gating, hyper.lr_gating);
  o.general = nn::adam_init(nets.general, hyper.lr_critic);
  o.scene = nn::adam_init(nets.scene, hyper.lr_critic);
  return o;
}

LatentState encode_observations(const MlpParams& encoder, std::span<const ObsVector> observations) {
  Matrix x(env::kObservationDim, static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = observations[i];
  return nn::mlp_predict(encoder, x);
}

SceneWeights scene_weights_from_probs(std::span<const double> a) {
  require(a.size() == kSceneCount, "scene weights need exactly four probabilities");
  SceneWeights sw;
  std::copy(a.begin(), a.end(), sw.a.begin());
  sw.dominant = 0;
  for (int k = 1; k < kSceneCount; ++k) {
    if (sw.a[static_cast<std::size_t>(k)] > sw.a[static_cast<std::size_t>(sw.dominant)]) sw.dominant = k;
  }
  sw.w = sw.a[static_cast<std::size_t>(sw.dominant)];
  return sw;
}

SceneWeights identify_scene(const MlpParams& gating, const LatentState& latent) {
  require(latent.size() == gating.input_dim(), "identify_scene: latent count does not match gating input");
  const Eigen::Map<const Vector> zcat(latent.data(), latent.size());
  const Matrix a = nn::mlp_predict(gating, zcat);
  return scene_weights_from_probs(std::span<const double>(a.data(), kSceneCount));
}

double fusion_weight(const SceneWeights& sw, const WMode& mode) {
  return mode.kind == WMode::Kind::kFixed ? mode.fixed : sw.w;
}

int heuristic_scene_label(const env::WorldState& world, int auv_id, const Assignment& assignment,
                          const env::ScenarioConfig& config) {
  const auto& self = world.auvs[static_cast<std::size_t>(auv_id)];
  for (const auto& other : world.auvs) {
    if (other.id != auv_id && (other.position - self.position).norm() < config.d_auv) {
      return static_cast<int>(Scene::kAvoidance);
    }
  }
  const auto& tgt = world.targets[static_cast<std::size_t>(assignment[static_cast<std::size_t>(auv_id)])];
  const double d = (tgt.position - self.position).norm();
  if (d <= config.d_target) return static_cast<int>(Scene::kEncirclement);
  if (d <= 2.0 * config.d_target) return static_cast<int>(Scene::kTracking);
  return static_cast<int>(Scene::kApproach);
}

int cluster_scene_label(const env::WorldState& world, const Assignment& assignment, const env::ScenarioConfig& config) {
  std::array<int, kSceneCount> votes{};
  for (const auto& a : world.auvs) ++votes[static_cast<std::size_t>(heuristic_scene_label(world, a.id, assignment, config))];
  if (votes[static_cast<std::size_t>(Scene::kAvoidance)] > 0) return static_cast<int>(Scene::kAvoidance);
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

Vector critic_features(const Eigen::VectorXd& state, std::span<const Vec3> joint_actions, int agent,
                       const Assignment& assignment, const LearnerConfig& cfg) {
  require(state.size() == cfg.state_dim() && joint_actions.size() == static_cast<std::size_t>(cfg.n_auvs),
          "critic_features: dimensions do not match scenario");
  Vector x(cfg.critic_input_dim());
  write_state_features(state, agent, assignment, cfg, x.head(cfg.state_dim()));
  Eigen::Index k = cfg.state_dim();
  x.segment<3>(k) = joint_actions[static_cast<std::size_t>(agent)];
  k += 3;
  for (int j = 0; j < cfg.n_auvs; ++j) {
    if (j == agent) continue;
    x.segment<3>(k) = joint_actions[static_cast<std::size_t>(j)];
    k += 3;
  }
  return x;
}

double q_general(const MlpParams& critic, const Vector& critic_input) {
  require(critic_input.size() == critic.input_dim() && critic.output_dim() == 1, "q_general: dimension mismatch");
  return nn::mlp_predict(critic, critic_input)(0, 0);
}

double q_scene(const MlpParams& critic, const Vector& critic_input, std::span<const double> a) {
  require(critic_input.size() == critic.input_dim() && critic.output_dim() == kSceneCount && a.size() == kSceneCount,
          "q_scene: dimension mismatch");
  const Matrix heads = nn::mlp_predict(critic, critic_input);
  double q = 0.0;
  for (int k = 0; k < kSceneCount; ++k) q += a[static_cast<std::size_t>(k)] * heads(k, 0);
  return q;
}

double fuse_q(double q_general, double q_scene, double w) {
  require(w >= 0.0 && w <= 1.0, "fuse_q: w must lie in [0, 1]");
  if (w == 0.0) return q_general;
  if (w == 1.0) return q_scene;
  const double fused = (1.0 - w) * q_general + w * q_scene;
  return std::clamp(fused, std::min(q_general, q_scene), std::max(q_general, q_scene));
}

env::Action select_action(const MlpParams& actor, const FeatureScaler& scaler, const ObsVector& observation,
                          double sigma, Rng& rng) {
  require(sigma >= 0.0, "select_action: sigma must be >= 0");
  const Matrix y = nn::mlp_predict(actor, Matrix(scaler.normalize(observation)));
  env::Action act{Vec3(y(0, 0), y(1, 0), y(2, 0))};
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int k = 0; k < 3; ++k) act.command[k] += noise(rng);
  }
  return act.clamped();
}

Batch sample_batch(const ReplayBuffer& buffer, std::size_t batch_size, Rng& rng) {
  Batch b;
  for (auto i : buffer.sample_indices(batch_size, rng)) b.items.push_back(&buffer.at(i));
  return b;
}

CriticLosses critic_update(AgentNets& nets, Optimizers& opt, const Batch& batch, const LearnerConfig& cfg) {
  require(!batch.items.empty(), "critic_update: empty batch");
  const RowLayout lay{static_cast<int>(batch.items.size()), cfg.n_auvs};
  const int rows = lay.rows();
  const double gamma = cfg.hyper.gamma;

  // Bootstrapped targets from the target actors and target critics.
  const Matrix next_obs = stack_observations(batch, cfg, true);
  std::vector<const MlpParams*> target_actors;
  for (const auto& a : nets.actor_targets) target_actors.push_back(&a);
  const Matrix next_act = policy_actions(target_actors, next_obs, lay);
  const Matrix next_probs = gating_probs(nets.encoder, nets.gating, next_obs, lay);
  const Matrix x_next = critic_inputs(batch, cfg, true, [&](int b, int j) -> Vec3 { return next_act.col(lay.col(b, j)); });
  const Matrix qg_next = nn::mlp_predict(nets.general_target, x_next);
  const Matrix qh_next = nn::mlp_predict(nets.scene_target, x_next);

  Vector y_g(rows);
  Vector y_s(rows);
  for (int b = 0; b < lay.batch; ++b) {
    const Transition& t = *batch.items[static_cast<std::size_t>(b)];
    const double cont = t.done ? 0.0 : gamma;
    for (int i = 0; i < lay.n; ++i) {
      const int r = lay.col(b, i);
      const auto ii = static_cast<std::size_t>(i);
      double rg = t.r_general[ii];
      double rs = t.r_scene[ii];
      if (cfg.reward_split == RewardSplit::kShared) rg = rs = t.r_general[ii] + t.r_scene[ii];
      y_g(r) = rg + (cont == 0.0 ? 0.0 : cont * qg_next(0, r));
      y_s(r) = rs + (cont == 0.0 ? 0.0 : cont * next_probs.col(b).dot(qh_next.col(r)));
    }
  }

  // Online critics on the stored joint actions.
  const Matrix obs = stack_observations(batch, cfg, false);
  const Matrix probs = gating_probs(nets.encoder, nets.gating, obs, lay);
  const Matrix x = critic_inputs(batch, cfg, false, [&](int b, int j) -> Vec3 {
    return batch.items[static_cast<std::size_t>(b)]->joint_actions[static_cast<std::size_t>(j)];
  });

  CriticLosses out;
  ForwardCache gcache;
  const Matrix qg = nn::mlp_forward(nets.general, x, gcache);
  const Matrix err_g = qg.row(0).transpose() - y_g;
  out.general = err_g.squaredNorm() / rows;

  ForwardCache scache;
  const Matrix qh = nn::mlp_forward(nets.scene, x, scache);
  Matrix d_heads(kSceneCount, rows);
  double loss_s = 0.0;
  for (int b = 0; b < lay.batch; ++b) {
    for (int i = 0; i < lay.n; ++i) {
      const int r = lay.col(b, i);
      const double err = probs.col(b).dot(qh.col(r)) - y_s(r);
      loss_s += err * err;
      d_heads.col(r) = (2.0 * err / rows) * probs.col(b);
    }
  }
  out.scene = loss_s / rows;

  if (!std::isfinite(out.general) || !std::isfinite(out.scene)) {
    out.skipped = true;
    return out;
  }
  MlpGrads gg = nn::mlp_backward(nets.general, gcache, (2.0 / rows) * err_g.transpose());
  MlpGrads gs = nn::mlp_backward(nets.scene, scache, d_heads);
  clip_and_step(nets.general, gg, opt.general, cfg.hyper.grad_clip, out.skipped);
  clip_and_step(nets.scene, gs, opt.scene, cfg.hyper.grad_clip, out.skipped);
  return out;
}

ActorGradients compute_actor_gradients(const AgentNets& nets, const Batch& batch, const LearnerConfig& cfg) {
  require(!batch.items.empty(), "actor_update: empty batch");
  const RowLayout lay{static_cast<int>(batch.items.size()), cfg.n_auvs};
  const int rows = lay.rows();
  const int sd = cfg.state_dim();
  const Matrix obs = stack_observations(batch, cfg, false);

  // Policy actions for every (transition, agent) row.
  const auto groups = actor_groups(lay, nets.actors.size());
  std::vector<ForwardCache> actor_caches(groups.size());
  Matrix mu(3, rows);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Matrix y = nn::mlp_forward(nets.actors[g], gather_cols(obs, groups[g]), actor_caches[g]);
    for (std::size_t c = 0; c < groups[g].size(); ++c) mu.col(groups[g][c]) = y.col(static_cast<Eigen::Index>(c));
  }

  // Row (b, i) swaps in agent i's policy action; peers keep stored actions.
  Matrix x(cfg.critic_input_dim(), rows);
  for (int b = 0; b < lay.batch; ++b) {
    const Transition& t = *batch.items[static_cast<std::size_t>(b)];
    for (int i = 0; i < lay.n; ++i) {
      auto col = x.col(lay.col(b, i));
      write_state_features(t.global_state, i, t.assignment, cfg, col.head(sd));
      Eigen::Index k = sd;
      col.segment<3>(k) = mu.col(lay.col(b, i));
      k += 3;
      for (int j = 0; j < lay.n; ++j) {
        if (j == i) continue;
        col.segment<3>(k) = t.joint_actions[static_cast<std::size_t>(j)];
        k += 3;
      }
    }
  }

  ForwardCache ecache;
  const Matrix z = nn::mlp_forward(nets.encoder, obs, ecache);
  const Matrix zcat = Eigen::Map<const Matrix>(z.data(), z.rows() * lay.n, lay.batch);
  ForwardCache gatecache;
  const Matrix probs = nn::mlp_forward(nets.gating, zcat, gatecache);

  ForwardCache gcache;
  ForwardCache scache;
  const Matrix qg = nn::mlp_forward(nets.general, x, gcache);
  const Matrix qh = nn::mlp_forward(nets.scene, x, scache);

  ActorGradients out;
  Matrix d_qg(1, rows);
  Matrix d_qh(kSceneCount, rows);
  Matrix d_probs = Matrix::Zero(kSceneCount, lay.batch);
  const double inv_rows = 1.0 / rows;
  double fused_sum = 0.0;
  double ce_sum = 0.0;
  const double lambda = cfg.hyper.lambda_scene;
  for (int b = 0; b < lay.batch; ++b) {
    int dominant = 0;
    const double max_a = argmax_weight(probs.col(b), dominant);
    const bool dynamic = cfg.w_mode.kind == WMode::Kind::kMaxA;
    const double w = dynamic ? max_a : cfg.w_mode.fixed;
    for (int i = 0; i < lay.n; ++i) {
      const int r = lay.col(b, i);
      const double qs = probs.col(b).dot(qh.col(r));
      fused_sum += fuse_q(qg(0, r), qs, w);
      d_qg(0, r) = -(1.0 - w) * inv_rows;
      d_qh.col(r) = (-w * inv_rows) * probs.col(b);
      d_probs.col(b) += (-w * inv_rows) * qh.col(r);
      if (dynamic) d_probs(dominant, b) += -(qs - qg(0, r)) * inv_rows;
    }
    const int label = batch.items[static_cast<std::size_t>(b)]->scene_label;
    const double p = std::max(probs(label, b), kProbFloor);
    ce_sum += -std::log(p);
    if (lambda > 0.0) d_probs(label, b) += -lambda / (lay.batch * p);
  }
  out.losses.actor = -fused_sum * inv_rows;
  out.losses.gating_aux = ce_sum / lay.batch;
  if (!std::isfinite(out.losses.actor) || !std::isfinite(out.losses.gating_aux)) {
    out.losses.skipped = true;
    return out;
  }

  // Critics only pass gradients through to their action inputs.
  const MlpGrads through_g = nn::mlp_backward(nets.general, gcache, d_qg, false);
  const MlpGrads through_s = nn::mlp_backward(nets.scene, scache, d_qh, false);
  const Matrix d_mu = through_g.dx.middleRows(sd, 3) + through_s.dx.middleRows(sd, 3);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.actors.push_back(nn::mlp_backward(nets.actors[g], actor_caches[g], gather_cols(d_mu, groups[g])));
  }

  out.gating = nn::mlp_backward(nets.gating, gatecache, d_probs);
  const Matrix dz = Eigen::Map<const Matrix>(out.gating.dx.data(), z.rows(), rows);
  out.encoder = nn::mlp_backward(nets.encoder, ecache, dz);
  return out;
}

ActorLosses actor_update(AgentNets& nets, Optimizers& opt, const Batch& batch, const LearnerConfig& cfg) {
  ActorGradients g = compute_actor_gradients(nets, batch, cfg);
  if (g.losses.skipped) return g.losses;
  const double clip = cfg.hyper.grad_clip;
  for (std::size_t a = 0; a < nets.actors.size(); ++a) clip_and_step(nets.actors[a], g.actors[a], opt.actors[a], clip, g.losses.skipped);
  clip_and_step(nets.gating, g.gating, opt.gating, clip, g.losses.skipped);
  clip_and_step(nets.encoder, g.encoder, opt.encoder, clip, g.losses.skipped);
  return g.losses;
}

void soft_update_targets(AgentNets& nets, double tau) {
  for (std::size_t a = 0; a < nets.actors.size(); ++a) nn::soft_update(nets.actor_targets[a], nets.actors[a], tau);
  nn::soft_update(nets.general_target, nets.general, tau);
  nn::soft_update(nets.scene_target, nets.scene, tau);
}

Learner::Learner(LearnerConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      buffer_(static_cast<std::size_t>(cfg_.hyper.buffer_capacity)),
      sample_rng_(derive_stream(seed, 3)) {
  Rng init = derive_stream(seed, 2);
  nets_ = make_agent_nets(cfg_, init);
  opt_ = make_optimizers(nets_, cfg_.hyper);
}

bool Learner::observe(Transition t) {
  buffer_.store(std::move(t));
  return train_step();
}

bool Learner::train_step() {
  ++counters_.env_steps;
  const auto& h = cfg_.hyper;
  if (counters_.env_steps < h.warmup_steps) return false;
  if (buffer_.size() < static_cast<std::size_t>(h.batch_size)) return false;
  if (counters_.env_steps % h.update_every != 0) return false;

  const Batch batch = sample_batch(buffer_, static_cast<std::size_t>(h.batch_size), sample_rng_);
  const CriticLosses cl = critic_update(nets_, opt_, batch, cfg_);
  const ActorLosses al = actor_update(nets_, opt_, batch, cfg_);
  if (cl.skipped || al.skipped) ++counters_.skipped_updates;
  soft_update_targets(nets_, h.tau);
  counters_.last_critic_loss = cl.general + cl.scene;
  counters_.last_actor_loss = al.actor;
  ++counters_.learn_steps;
  return true;
}

}  // namespace samarl::marl

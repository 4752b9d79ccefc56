#pragma once

// Scene-adaptive actor-critic learner: observation encoder, scene gating,
// general and scene critics fused as Q = (1 - w) Q_general + w Q_scene.

#include "samarl/marl/replay.hpp"
#include "samarl/nn/mlp.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace samarl::marl {

using nn::Matrix;
using nn::MlpParams;
using nn::Vector;

inline constexpr int kSceneCount = 4;

enum class Scene : int { kApproach = 0, kTracking = 1, kEncirclement = 2, kAvoidance = 3 };

struct SceneWeights {
  std::array<double, kSceneCount> a{};
  int dominant = 0;  // argmax(a), lowest index on ties
  double w = 0.0;    // max(a)
};

/// How the fusion weight is chosen: dominant-scene confidence or a constant
/// (the w = 0 and w = 1 ablations).
struct WMode {
  enum class Kind { kMaxA, kFixed };
  Kind kind = Kind::kMaxA;
  double fixed = 0.0;

  /// "max_a" or "fixed:<value>".
  static WMode parse(const std::string& text);
  [[nodiscard]] std::string str() const;
};

enum class RewardSplit { kDecomposed, kShared };

RewardSplit parse_reward_split(const std::string& text);
std::string to_string(RewardSplit s);

struct Hyperparams {
  double gamma = 0.95;
  double tau = 0.01;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double lr_gating = 1e-3;  // gating and encoder
  int batch_size = 256;
  int buffer_capacity = 100000;
  double explore_sigma = 0.3;
  double explore_decay = 0.9995;  // per episode
  double explore_min = 0.05;
  int update_every = 1;
  int warmup_steps = 1000;
  double lambda_scene = 0.1;
  double grad_clip = 10.0;
  bool shared_actor = true;
  int actor_hidden = 64;
  int encoder_hidden = 64;
  int latent_dim = 64;
  int gating_hidden = 64;
  int critic_hidden = 128;

  void validate() const;
};

/// Fixed input scaling: positions by the world half-extents, velocities by v_max.
struct FeatureScaler {
  Vec3 bounds{1.0, 1.0, 1.0};
  double v_max = 1.0;

  [[nodiscard]] ObsVector normalize(const ObsVector& raw) const;
};

struct AgentNets {
  std::vector<MlpParams> actors;  // one shared actor, or one per AUV
  std::vector<MlpParams> actor_targets;
  MlpParams encoder;
  MlpParams gating;
  MlpParams general;
  MlpParams general_target;
  MlpParams scene;  // trunk with one linear output per scene
  MlpParams scene_target;

  [[nodiscard]] const MlpParams& actor_for(int auv) const {
    return actors.size() == 1 ? actors.front() : actors[static_cast<std::size_t>(auv)];
  }
};

struct Optimizers {
  std::vector<nn::AdamState> actors;
  nn::AdamState encoder;
  nn::AdamState gating;
  nn::AdamState general;
  nn::AdamState scene;
};

struct LearnerConfig {
  int n_auvs = 4;
  int n_targets = 2;
  Hyperparams hyper;
  WMode w_mode;
  RewardSplit reward_split = RewardSplit::kDecomposed;
  FeatureScaler scaler;

  [[nodiscard]] int state_dim() const { return 6 * (n_auvs + n_targets); }
  [[nodiscard]] int critic_input_dim() const { return state_dim() + 3 * n_auvs; }
};

AgentNets make_agent_nets(const LearnerConfig& cfg, Rng& rng);
Optimizers make_optimizers(const AgentNets& nets, const Hyperparams& hyper);

/// Per-AUV latent vectors, one column per AUV.
using LatentState = Matrix;

/// `observations` are already scaled.
LatentState encode_observations(const MlpParams& encoder, std::span<const ObsVector> observations);

SceneWeights scene_weights_from_probs(std::span<const double> a);
SceneWeights identify_scene(const MlpParams& gating, const LatentState& latent);

/// The fusion weight actually used: max(a), or the fixed ablation value.
double fusion_weight(const SceneWeights& sw, const WMode& mode);

/// 3 = a peer within d_auv (overrides), else 2 = within d_target of the
/// assigned target, 1 = within 2 d_target, 0 = farther.
int heuristic_scene_label(const env::WorldState& world, int auv_id, const Assignment& assignment,
                          const env::ScenarioConfig& config);

/// Cluster label: avoidance if any AUV is avoiding, else the most common
/// per-AUV label (lowest index on ties).
int cluster_scene_label(const env::WorldState& world, const Assignment& assignment, const env::ScenarioConfig& config);

/// Agent-centric critic input: own state, assigned target, other AUVs and
/// other targets relative to the agent, then own action followed by the
/// other AUVs' actions.
Vector critic_features(const Eigen::VectorXd& state, std::span<const Vec3> joint_actions, int agent,
                       const Assignment& assignment, const LearnerConfig& cfg);

double q_general(const MlpParams& critic, const Vector& critic_input);
/// Soft mixture sum_k a_k Q_k over the scene heads.
double q_scene(const MlpParams& critic, const Vector& critic_input, std::span<const double> a);
double fuse_q(double q_general, double q_scene, double w);

/// tanh policy plus N(0, sigma^2) noise, clamped to [-1, 1]^3.
env::Action select_action(const MlpParams& actor, const FeatureScaler& scaler, const ObsVector& observation,
                          double sigma, Rng& rng);

struct Batch {
  std::vector<const Transition*> items;
};

Batch sample_batch(const ReplayBuffer& buffer, std::size_t batch_size, Rng& rng);

struct CriticLosses {
  double general = 0.0;
  double scene = 0.0;
  bool skipped = false;
};

struct ActorLosses {
  double actor = 0.0;
  double gating_aux = 0.0;  // cross-entropy against the heuristic scene label
  bool skipped = false;
};

/// Raw (unclipped) actor-side gradients; critics are read, never written.
struct ActorGradients {
  std::vector<nn::MlpGrads> actors;
  nn::MlpGrads encoder;
  nn::MlpGrads gating;
  ActorLosses losses;
};

CriticLosses critic_update(AgentNets& nets, Optimizers& opt, const Batch& batch, const LearnerConfig& cfg);
ActorGradients compute_actor_gradients(const AgentNets& nets, const Batch& batch, const LearnerConfig& cfg);
ActorLosses actor_update(AgentNets& nets, Optimizers& opt, const Batch& batch, const LearnerConfig& cfg);
void soft_update_targets(AgentNets& nets, double tau);

struct LearnCounters {
  std::int64_t env_steps = 0;
  std::int64_t learn_steps = 0;
  std::int64_t skipped_updates = 0;
  double last_critic_loss = 0.0;
  double last_actor_loss = 0.0;
};

/// LC-AUV side of CTDE: owns the networks, optimizers and replay buffer.
class Learner {
 public:
  Learner(LearnerConfig cfg, std::uint64_t seed);

  /// Stores a transition and runs train_step once for it.
  bool observe(Transition t);
  /// One env-step tick of the learning schedule; true if parameters changed.
  bool train_step();

  [[nodiscard]] const LearnerConfig& config() const { return cfg_; }
  [[nodiscard]] const AgentNets& nets() const { return nets_; }
  AgentNets& mutable_nets() { return nets_; }
  [[nodiscard]] const Optimizers& optimizers() const { return opt_; }
  Optimizers& mutable_optimizers() { return opt_; }
  [[nodiscard]] const ReplayBuffer& buffer() const { return buffer_; }
  [[nodiscard]] const LearnCounters& counters() const { return counters_; }
  LearnCounters& mutable_counters() { return counters_; }
  Rng& sample_rng() { return sample_rng_; }
  [[nodiscard]] const Rng& sample_rng() const { return sample_rng_; }

 private:
  LearnerConfig cfg_;
  AgentNets nets_;
  Optimizers opt_;
  ReplayBuffer buffer_;
  Rng sample_rng_;
  LearnCounters counters_;
};

}  // namespace samarl::marl

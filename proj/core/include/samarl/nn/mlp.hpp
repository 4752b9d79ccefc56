#pragma once

// Dense multilayer perceptron with explicit forward caches and hand-written
// backpropagation. Batches are column-major: one sample per column.

#include "samarl/common.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace samarl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { kRelu = 0, kTanh = 1, kIdentity = 2, kSoftmax = 3 };

const char* to_string(Activation a);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;
};

struct MlpParams {
  std::vector<Layer> layers;
  // Bumped by every in-place update so that caches from an older forward
  // pass are rejected by mlp_backward.
  std::uint64_t generation = 0;

  [[nodiscard]] int input_dim() const;
  [[nodiscard]] int output_dim() const;
  [[nodiscard]] std::size_t parameter_count() const;
  /// Throws ConfigError if dimensions do not chain or softmax is not last.
  void validate() const;
  [[nodiscard]] bool all_finite() const;

  /// Parameter equality; the generation counter is ignored.
  bool operator==(const MlpParams& other) const;
};

struct ForwardCache {
  const MlpParams* params = nullptr;
  std::uint64_t generation = 0;
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // activations per layer
};

struct LayerGrad {
  Matrix weight;
  Vector bias;
};

struct MlpGrads {
  std::vector<LayerGrad> layers;
  Matrix dx;

  static MlpGrads zeros_like(const MlpParams& params);
  [[nodiscard]] double squared_norm() const;
  [[nodiscard]] bool all_finite() const;
  void scale(double s);
  void add(const MlpGrads& other);
};

/// Uniform weights in +-1/sqrt(fan_in), zero biases.
MlpParams mlp_init(std::span<const int> dims, std::span<const Activation> activations, Rng& rng);

Matrix mlp_forward(const MlpParams& params, const Matrix& x, ForwardCache& cache);
Vector mlp_forward(const MlpParams& params, const Vector& x, ForwardCache& cache);

/// Forward pass without retaining intermediates.
Matrix mlp_predict(const MlpParams& params, const Matrix& x);

/// Gradients of sum_columns(dy . y) with respect to parameters and input.
/// With `param_grads` false only dx is produced.
MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache, const Matrix& dy, bool param_grads = true);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<LayerGrad> m;
  std::vector<LayerGrad> v;
};

AdamState adam_init(const MlpParams& params, double lr);

enum class StepStatus { kApplied, kSkippedNonFinite };

StepStatus adam_step(MlpParams& params, const MlpGrads& grads, AdamState& opt);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(MlpGrads& grads, double max_norm);

/// target <- (1 - tau) * target + tau * online.
void soft_update(MlpParams& target, const MlpParams& online, double tau);

using BackwardFn = std::function<MlpGrads(const MlpParams&, const ForwardCache&, const Matrix&)>;

/// Max relative error between analytic parameter gradients and central
/// differences of L(x) = sum_k (k + 1) * y_k.
double grad_check(const MlpParams& params, const Vector& input, double h);
double grad_check(const MlpParams& params, const Vector& input, double h, const BackwardFn& backward);

}  // namespace samarl::nn

#include "samarl/nn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace samarl::nn {
namespace {

void activate(Activation a, const Matrix& z, Matrix& out) {
  switch (a) {
    case Activation::kRelu:
      out = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      out = z.array().tanh().matrix();
      break;
    case Activation::kIdentity:
      out = z;
      break;
    case Activation::kSoftmax: {
      out.resize(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double mx = z.col(c).maxCoeff();
        out.col(c) = (z.col(c).array() - mx).exp().matrix();
        out.col(c) /= out.col(c).sum();
      }
      break;
    }
  }
}

// dL/dz given dL/dy, pre-activation z and activation y.
Matrix activation_backward(Activation a, const Matrix& z, const Matrix& y, const Matrix& dy) {
  switch (a) {
    case Activation::kRelu:
      return (z.array() > 0.0).select(dy.array(), 0.0).matrix();
    case Activation::kTanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::kIdentity:
      return dy;
    case Activation::kSoftmax: {
      Matrix dz(dy.rows(), dy.cols());
      for (Eigen::Index c = 0; c < dy.cols(); ++c) {
        const double inner = y.col(c).dot(dy.col(c));
        dz.col(c) = (y.col(c).array() * (dy.col(c).array() - inner)).matrix();
      }
      return dz;
    }
  }
  return dy;
}

double objective(const MlpParams& params, const Vector& input) {
  const Matrix y = mlp_predict(params, input);
  double l = 0.0;
  for (Eigen::Index k = 0; k < y.rows(); ++k) l += static_cast<double>(k + 1) * y(k, 0);
  return l;
}

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

int MlpParams::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }

int MlpParams::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigError("mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weight.rows()) throw ConfigError("mlp: bias length differs from layer width");
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows()) throw ConfigError("mlp: layer dims do not chain");
    if (l.activation == Activation::kSoftmax && i + 1 != layers.size()) {
      throw ConfigError("mlp: softmax allowed only on the final layer");
    }
  }
}

bool MlpParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const Layer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.weight != b.weight || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

double MlpGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

bool MlpGrads::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const LayerGrad& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

void MlpGrads::scale(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
}

void MlpGrads::add(const MlpGrads& other) {
  require(other.layers.size() == layers.size(), "MlpGrads::add: shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
}

MlpParams mlp_init(std::span<const int> dims, std::span<const Activation> activations, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("mlp_init: need at least input and output dims");
  if (activations.size() + 1 != dims.size()) throw ConfigError("mlp_init: one activation per layer required");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i];
    const int out = dims[i + 1];
    if (in < 1 || out < 1) throw ConfigError("mlp_init: dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l;
    l.weight.resize(out, in);
    // Row-major fill order keeps the stream independent of Eigen storage.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);
    }
    l.bias = Vector::Zero(out);
    l.activation = activations[i];
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x, ForwardCache& cache) {
  require(!params.layers.empty() && x.rows() == params.input_dim(), "mlp_forward: input dimension mismatch");
  cache.params = &params;
  cache.generation = params.generation;
  cache.input = x;
  cache.pre.resize(params.layers.size());
  cache.post.resize(params.layers.size());
  const Matrix* in = &cache.input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    cache.pre[i].noalias() = l.weight * (*in);
    cache.pre[i].colwise() += l.bias;
    activate(l.activation, cache.pre[i], cache.post[i]);
    in = &cache.post[i];
  }
  return cache.post.back();
}

Vector mlp_forward(const MlpParams& params, const Vector& x, ForwardCache& cache) {
  return mlp_forward(params, Matrix(x), cache).col(0);
}

Matrix mlp_predict(const MlpParams& params, const Matrix& x) {
  require(!params.layers.empty() && x.rows() == params.input_dim(), "mlp_predict: input dimension mismatch");
  Matrix a = x;
  Matrix z;
  for (const auto& l : params.layers) {
    z.noalias() = l.weight * a;
    z.colwise() += l.bias;
    activate(l.activation, z, a);
  }
  return a;
}

MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache, const Matrix& dy, bool param_grads) {
  require(cache.params == &params && cache.generation == params.generation &&
              cache.pre.size() == params.layers.size(),
          "mlp_backward: cache does not belong to these parameters (stale or foreign)");
  require(dy.rows() == params.output_dim() && dy.cols() == cache.input.cols(),
          "mlp_backward: upstream gradient shape mismatch");
  MlpGrads g;
  if (param_grads) g.layers.resize(params.layers.size());
  Matrix delta = dy;
  for (std::size_t idx = params.layers.size(); idx-- > 0;) {
    const auto& l = params.layers[idx];
    const Matrix dz = activation_backward(l.activation, cache.pre[idx], cache.post[idx], delta);
    const Matrix& a_prev = idx == 0 ? cache.input : cache.post[idx - 1];
    if (param_grads) {
      g.layers[idx].weight.noalias() = dz * a_prev.transpose();
      g.layers[idx].bias = dz.rowwise().sum();
    }
    delta.noalias() = l.weight.transpose() * dz;
  }
  g.dx = std::move(delta);
  return g;
}

AdamState adam_init(const MlpParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = MlpGrads::zeros_like(params).layers;
  s.v = s.m;
  return s;
}

StepStatus adam_step(MlpParams& params, const MlpGrads& grads, AdamState& opt) {
  require(grads.layers.size() == params.layers.size() && opt.m.size() == params.layers.size(),
          "adam_step: shape mismatch");
  if (!grads.all_finite()) return StepStatus::kSkippedNonFinite;
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    theta.array() -= opt.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, opt.m[i].weight, opt.v[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, opt.m[i].bias, opt.v[i].bias);
  }
  ++params.generation;
  return StepStatus::kApplied;
}

double clip_global_norm(MlpGrads& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && std::isfinite(norm)) grads.scale(max_norm / norm);
  return norm;
}

void soft_update(MlpParams& target, const MlpParams& online, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "soft_update: tau must lie in [0, 1]");
  require(target.layers.size() == online.layers.size(), "soft_update: layer count mismatch");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    require(t.weight.rows() == o.weight.rows() && t.weight.cols() == o.weight.cols() &&
                t.bias.size() == o.bias.size(),
            "soft_update: shape mismatch");
    if (tau == 1.0) {
      t.weight = o.weight;
      t.bias = o.bias;
    } else {
      t.weight = (1.0 - tau) * t.weight + tau * o.weight;
      t.bias = (1.0 - tau) * t.bias + tau * o.bias;
    }
  }
  ++target.generation;
}

double grad_check(const MlpParams& params, const Vector& input, double h) {
  return grad_check(params, input, h, [](const MlpParams& p, const ForwardCache& c, const Matrix& dy) {
    return mlp_backward(p, c, dy);
  });
}

double grad_check(const MlpParams& params, const Vector& input, double h, const BackwardFn& backward) {
  require(h > 0.0, "grad_check: h must be > 0");
  ForwardCache cache;
  mlp_forward(params, Matrix(input), cache);
  Matrix dy(params.output_dim(), 1);
  for (Eigen::Index k = 0; k < dy.rows(); ++k) dy(k, 0) = static_cast<double>(k + 1);
  const MlpGrads analytic = backward(params, cache, dy);

  MlpParams probe = params;
  double worst = 0.0;
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double up = objective(probe, input);
    slot = saved - h;
    const double down = objective(probe, input);
    slot = saved;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    auto& l = probe.layers[i];
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        worst = std::max(worst, rel_error(analytic.layers[i].weight(r, c), central(l.weight(r, c))));
      }
      worst = std::max(worst, rel_error(analytic.layers[i].bias(r), central(l.bias(r))));
    }
  }
  return worst;
}

}  // namespace samarl::nn

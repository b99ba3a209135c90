#include "ccgym/nnkit.hpp"

#include <cmath>
#include <numbers>

#include "ccgym/error.hpp"

namespace ccgym::nn {

namespace {

void activate(Activation act, Mat& z) {
  switch (act) {
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kSigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      break;
    case Activation::kIdentity: break;
  }
}

// dL/dz from dL/dy, using the activation output y.
Mat through_activation(Activation act, const Mat& y, const Mat& dy) {
  switch (act) {
    case Activation::kTanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::kRelu:
      return (dy.array() * (y.array() > 0.0).cast<double>()).matrix();
    case Activation::kSigmoid:
      return (dy.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::kIdentity: return dy;
  }
  return dy;
}

}  // namespace

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : bias) b.setZero();
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& o) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += o.weights[i];
    bias[i] += o.bias[i];
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double s) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= s;
    bias[i] *= s;
  }
  return *this;
}

Mlp::Mlp(std::span<const int> sizes, std::span<const Activation> activations,
         Rng& rng) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
    throw ArgumentError("Mlp: need one activation per layer");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    if (in <= 0 || out <= 0) throw ArgumentError("Mlp: layer sizes must be positive");
    const double lim = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer;
    layer.weights.resize(out, in);
    layer.bias.resize(out);
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = rng.uniform(-lim, lim);
    }
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = rng.uniform(-lim, lim);
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
  }
}

int Mlp::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int Mlp::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

Mat Mlp::forward(const Mat& x, ForwardCache* cache) const {
  if (x.rows() != input_dim()) {
    throw ArgumentError("Mlp::forward: input has " + std::to_string(x.rows()) +
                        " rows, expected " + std::to_string(input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Mat h = x;
  for (const auto& layer : layers) {
    Mat z = layer.weights * h;
    z.colwise() += layer.bias;
    activate(layer.activation, z);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

Vec Mlp::forward(const Vec& x) const {
  return forward(Mat(x), nullptr).col(0);
}

MlpGrads Mlp::backward(const ForwardCache& cache, const Mat& dy, Mat* dx) const {
  if (cache.inputs.size() != layers.size() ||
      cache.outputs.size() != layers.size()) {
    throw ArgumentError("Mlp::backward: cache does not match network");
  }
  if (dy.rows() != output_dim() || dy.cols() != cache.outputs.back().cols()) {
    throw ArgumentError("Mlp::backward: upstream gradient shape mismatch");
  }
  MlpGrads g;
  g.weights.resize(layers.size());
  g.bias.resize(layers.size());
  Mat upstream = dy;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Layer& layer = layers[i];
    const Mat dz = through_activation(layer.activation, cache.outputs[i], upstream);
    g.weights[i].noalias() = dz * cache.inputs[i].transpose();
    g.bias[i] = dz.rowwise().sum();
    if (i > 0 || dx) upstream.noalias() = layer.weights.transpose() * dz;
  }
  if (dx) *dx = std::move(upstream);
  return g;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& l : layers) {
    g.weights.push_back(Mat::Zero(l.weights.rows(), l.weights.cols()));
    g.bias.push_back(Vec::Zero(l.bias.size()));
  }
  return g;
}

void Mlp::init_last_layer(double limit, Rng& rng) {
  Layer& last = layers.back();
  for (Eigen::Index c = 0; c < last.weights.cols(); ++c) {
    for (Eigen::Index r = 0; r < last.weights.rows(); ++r) {
      last.weights(r, c) = rng.uniform(-limit, limit);
    }
  }
  for (Eigen::Index r = 0; r < last.bias.size(); ++r) last.bias(r) = rng.uniform(-limit, limit);
}

bool Mlp::same_shape(const Mlp& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.rows() != o.layers[i].weights.rows() ||
        layers[i].weights.cols() != o.layers[i].weights.cols()) {
      return false;
    }
  }
  return true;
}

std::pair<Mat, ForwardCache> mlp_forward(const Mlp& params, const Mat& x) {
  ForwardCache cache;
  Mat y = params.forward(x, &cache);
  return {std::move(y), std::move(cache)};
}

MlpGrads mlp_backward(const Mlp& params, const ForwardCache& cache,
                      const Mat& dy) {
  return params.backward(cache, dy);
}

std::vector<ParamBlock> param_blocks(Mlp& params, const MlpGrads& grads) {
  if (grads.weights.size() != params.layers.size()) {
    throw ArgumentError("param_blocks: gradient layout mismatch");
  }
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& l = params.layers[i];
    if (grads.weights[i].size() != l.weights.size() ||
        grads.bias[i].size() != l.bias.size()) {
      throw ArgumentError("param_blocks: gradient shape mismatch");
    }
    blocks.push_back({{l.weights.data(), std::size_t(l.weights.size())},
                      {grads.weights[i].data(), std::size_t(grads.weights[i].size())}});
    blocks.push_back({{l.bias.data(), std::size_t(l.bias.size())},
                      {grads.bias[i].data(), std::size_t(grads.bias[i].size())}});
  }
  return blocks;
}

void Adam::step(std::span<const ParamBlock> blocks) {
  if (m_.empty()) {
    for (const auto& b : blocks) {
      m_.push_back(Vec::Zero(static_cast<Eigen::Index>(b.value.size())));
      v_.push_back(Vec::Zero(static_cast<Eigen::Index>(b.value.size())));
    }
  }
  if (m_.size() != blocks.size()) throw ArgumentError("Adam: block count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    if (b.grad.size() != b.value.size() ||
        static_cast<Eigen::Index>(b.value.size()) != m_[k].size()) {
      throw ArgumentError("Adam: block shape mismatch");
    }
    Eigen::Map<Vec> value(b.value.data(), m_[k].size());
    Eigen::Map<const Vec> grad(b.grad.data(), m_[k].size());
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad.cwiseProduct(grad);
    value.array() -= lr_ * (m_[k].array() / bc1) /
                     ((v_[k].array() / bc2).sqrt() + eps_);
  }
}

void Adam::step(Mlp& params, const MlpGrads& grads) {
  const auto blocks = param_blocks(params, grads);
  step(blocks);
}

void adam_step(Mlp& params, const MlpGrads& grads, Adam& state) {
  state.step(params, grads);
}

OuNoise::OuNoise(int dim, double theta, double sigma, double mu, double scale,
                 double dt)
    : x_(Vec::Zero(dim)), theta_(theta), sigma_(sigma), mu_(mu), scale_(scale), dt_(dt) {}

Vec OuNoise::step(const Vec& z) {
  if (z.size() != x_.size()) throw ArgumentError("OuNoise: draw has wrong length");
  x_ += theta_ * (mu_ - x_.array()).matrix() * dt_ + sigma_ * std::sqrt(dt_) * z;
  return scale_ * x_;
}

Vec OuNoise::sample(Rng& rng) {
  Vec z(x_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return step(z);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ArgumentError("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw ArgumentError("ReplayBuffer: index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw StateError("ReplayBuffer: sampling an empty buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[rng.index(items_.size())]);
  return out;
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_shape(source)) throw ArgumentError("soft_update: shape mismatch");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& s = source.layers[i];
    t.weights = tau * s.weights + (1.0 - tau) * t.weights;
    t.bias = tau * s.bias + (1.0 - tau) * t.bias;
  }
}

double gaussian_logprob(const Vec& mean, const Vec& log_std, const Vec& a) {
  if (mean.size() != log_std.size() || mean.size() != a.size()) {
    throw ArgumentError("gaussian_logprob: length mismatch");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto z = (a - mean).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - half_log_2pi).sum();
}

GaussianLogprobGrad gaussian_logprob_grad(const Vec& mean, const Vec& log_std,
                                          const Vec& a) {
  const Vec var = (2.0 * log_std.array()).exp();
  const Vec diff = a - mean;
  GaussianLogprobGrad g;
  g.d_mean = diff.array() / var.array();
  g.d_log_std = (diff.array().square() / var.array() - 1.0).matrix();
  return g;
}

double gaussian_kl(const Vec& mo, const Vec& lso, const Vec& mn, const Vec& lsn) {
  const auto var_o = (2.0 * lso.array()).exp();
  const auto var_n = (2.0 * lsn.array()).exp();
  return (lsn.array() - lso.array() +
          (var_o + (mo - mn).array().square()) / (2.0 * var_n) - 0.5)
      .sum();
}

GaussianLogprobGrad gaussian_kl_grad(const Vec& mo, const Vec& lso, const Vec& mn,
                                     const Vec& lsn) {
  const Vec var_o = (2.0 * lso.array()).exp();
  const Vec var_n = (2.0 * lsn.array()).exp();
  GaussianLogprobGrad g;
  g.d_mean = (mn - mo).array() / var_n.array();
  g.d_log_std =
      (1.0 - (var_o.array() + (mo - mn).array().square()) / var_n.array()).matrix();
  return g;
}

}  // namespace ccgym::nn

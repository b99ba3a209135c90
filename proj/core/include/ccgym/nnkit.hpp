#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ccgym/rng.hpp"

namespace ccgym::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { kTanh, kRelu, kSigmoid, kIdentity };

struct Layer {
  Mat weights;  // out x in
  Vec bias;
  Activation activation = Activation::kIdentity;
};

/// Activations kept by forward() for the matching backward() call. Columns
/// are samples.
struct ForwardCache {
  std::vector<Mat> inputs;   // input to each layer
  std::vector<Mat> outputs;  // post-activation output of each layer
};

struct MlpGrads {
  std::vector<Mat> weights;
  std::vector<Vec> bias;

  void set_zero();
  MlpGrads& operator+=(const MlpGrads& other);
  MlpGrads& operator*=(double s);
};

/// Fully connected network; batched calls take one sample per column.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {in, h1, ..., out}; one activation per layer. Weights and biases
  /// draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(std::span<const int> sizes, std::span<const Activation> activations,
      Rng& rng);

  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t num_params() const;

  Mat forward(const Mat& x, ForwardCache* cache = nullptr) const;
  Vec forward(const Vec& x) const;

  /// Gradients of a scalar loss given dL/dy for the cached batch. When
  /// `dx` is non-null it receives dL/dx.
  MlpGrads backward(const ForwardCache& cache, const Mat& dy,
                    Mat* dx = nullptr) const;

  MlpGrads zero_grads() const;
  /// Re-draws the last layer from U(-limit, limit).
  void init_last_layer(double limit, Rng& rng);
  bool same_shape(const Mlp& other) const;
};

std::pair<Mat, ForwardCache> mlp_forward(const Mlp& params, const Mat& x);
MlpGrads mlp_backward(const Mlp& params, const ForwardCache& cache,
                      const Mat& dy);

/// A parameter tensor and its gradient, flattened.
struct ParamBlock {
  std::span<double> value;
  std::span<const double> grad;
};

std::vector<ParamBlock> param_blocks(Mlp& params, const MlpGrads& grads);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8). Moments are
/// allocated on the first step and keyed by block position.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<const ParamBlock> blocks);
  void step(Mlp& params, const MlpGrads& grads);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t t() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Vec> m_, v_;
};

void adam_step(Mlp& params, const MlpGrads& grads, Adam& state);

/// Discretized Ornstein-Uhlenbeck process.
class OuNoise {
 public:
  OuNoise(int dim, double theta = 0.15, double sigma = 0.2, double mu = 0.0,
          double scale = 1.0, double dt = 1.0);

  /// x <- x + theta (mu - x) dt + sigma sqrt(dt) z; returns scale * x.
  Vec step(const Vec& z);
  Vec sample(Rng& rng);
  void reset() { x_.setZero(); }
  const Vec& state() const { return x_; }
  void set_state(const Vec& x) { x_ = x; }

  double theta() const { return theta_; }
  double sigma() const { return sigma_; }
  double scale() const { return scale_; }

 private:
  Vec x_;
  double theta_, sigma_, mu_, scale_, dt_;
};

struct Transition {
  Vec state;
  Vec action;
  double reward = 0.0;
  Vec next_state;
  bool done = false;
};

/// Fixed-capacity ring with uniform sampling (no prioritization).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i = 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;
  /// Uniform draws with replacement.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot once full
  std::vector<Transition> items_;
};

/// target <- tau * source + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& source, double tau);

/// Diagonal Gaussian log density.
double gaussian_logprob(const Vec& mean, const Vec& log_std, const Vec& a);

struct GaussianLogprobGrad {
  Vec d_mean;
  Vec d_log_std;
};
GaussianLogprobGrad gaussian_logprob_grad(const Vec& mean, const Vec& log_std,
                                          const Vec& a);

/// KL(old || new) between diagonal Gaussians.
double gaussian_kl(const Vec& mean_old, const Vec& log_std_old,
                   const Vec& mean_new, const Vec& log_std_new);
/// Gradient of gaussian_kl with respect to the new distribution.
GaussianLogprobGrad gaussian_kl_grad(const Vec& mean_old, const Vec& log_std_old,
                                     const Vec& mean_new, const Vec& log_std_new);

}  // namespace ccgym::nn

#ifndef ESGRL_NN_HPP_
#define ESGRL_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "esgrl/rng.hpp"

namespace esgrl {

struct ForwardCache;

// Fully connected network: tanh hidden layers, linear output. All weights
// and biases live in one flat buffer, layer by layer: W (fan_in x fan_out,
// row-major) followed by b (fan_out).
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized parameters.
  explicit Mlp(std::vector<std::size_t> sizes);

  // Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  static Mlp init(std::vector<std::size_t> sizes, std::uint64_t seed);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  // Any mutable access invalidates outstanding forward caches.
  std::span<double> mutable_params() {
    ++generation_;
    return params_;
  }
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> biases(std::size_t layer) const;
  std::uint64_t generation() const { return generation_; }

  std::vector<double> forward(std::span<const double> x, ForwardCache* cache = nullptr) const;

  // Gradient of dot(output, grad_out) w.r.t. every parameter, added into
  // `grad_params`. Optionally writes d/dx into `grad_input`.
  void accumulate_backward(const ForwardCache& cache, std::span<const double> grad_out,
                           std::span<double> grad_params, std::span<double> grad_input = {}) const;
  std::vector<double> backward(const ForwardCache& cache, std::span<const double> grad_out) const;

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.sizes_ == b.sizes_ && a.params_ == b.params_;
  }

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::uint64_t generation_ = 0;
};

struct ForwardCache {
  const Mlp* owner = nullptr;
  std::uint64_t generation = 0;
  std::vector<std::vector<double>> activations;  // input, hidden outputs, final output
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam. Non-finite gradients throw kNumeric before any
// parameter is touched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

// Diagonal Gaussian over actions with a state-independent log std.
class GaussianPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, std::vector<double> log_std);

  const Mlp& mean_net() const { return mean_net_; }
  Mlp& mean_net() { return mean_net_; }
  std::span<const double> log_std() const { return log_std_; }
  // Callers must re-clamp() after writing.
  std::span<double> mutable_log_std() { return log_std_; }
  void clamp();

  std::size_t action_dim() const { return log_std_.size(); }
  std::vector<double> stddev() const;

  std::vector<double> mean(std::span<const double> obs, ForwardCache* cache = nullptr) const;
  double log_prob(std::span<const double> mean, std::span<const double> action) const;
  double entropy() const;

  struct Sample {
    std::vector<double> action;
    std::vector<double> mean;
    double log_prob = 0.0;
  };
  Sample sample(std::span<const double> obs, Rng& rng) const;

  friend bool operator==(const GaussianPolicy& a, const GaussianPolicy& b) {
    return a.mean_net_ == b.mean_net_ && a.log_std_ == b.log_std_;
  }

 private:
  Mlp mean_net_;
  std::vector<double> log_std_;
};

// Closed-form differential entropy of a diagonal Gaussian.
double gaussian_entropy(std::span<const double> log_std);
double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

// `esgrl-ckpt v1`: text, values as C99 hex floats so round trips are exact.
void write_checkpoint(std::ostream& out, const GaussianPolicy& actor, const Mlp& critic);
void read_checkpoint(std::istream& in, GaussianPolicy& actor, Mlp& critic);

bool all_finite(std::span<const double> v);

}  // namespace esgrl

#endif  // ESGRL_NN_HPP_

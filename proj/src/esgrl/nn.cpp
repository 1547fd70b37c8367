#include "esgrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "esgrl/error.hpp"

namespace esgrl {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  require(end != token.c_str() && *end == '\0', ErrorKind::kParse, "checkpoint: bad number '" + token + "'");
  return v;
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  require(static_cast<bool>(in >> got) && got == want, ErrorKind::kParse,
          "checkpoint: expected '" + want + "', got '" + got + "'");
}

std::size_t read_count(std::istream& in) {
  long long n = -1;
  require(static_cast<bool>(in >> n) && n >= 0, ErrorKind::kParse, "checkpoint: bad count");
  return static_cast<std::size_t>(n);
}

void write_net(std::ostream& out, const std::string& name, const Mlp& net) {
  out << name << "_sizes " << net.sizes().size();
  for (auto s : net.sizes()) out << ' ' << s;
  out << '\n' << name << "_params " << net.num_params() << '\n';
  for (double v : net.params()) out << hexfloat(v) << '\n';
}

Mlp read_net(std::istream& in, const std::string& name) {
  expect_token(in, name + "_sizes");
  std::vector<std::size_t> sizes(read_count(in));
  for (auto& s : sizes) s = read_count(in);
  Mlp net(sizes);
  expect_token(in, name + "_params");
  const std::size_t n = read_count(in);
  require(n == net.num_params(), ErrorKind::kParse, "checkpoint: parameter count mismatch for " + name);
  auto p = net.mutable_params();
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    require(static_cast<bool>(in >> tok), ErrorKind::kParse, "checkpoint: truncated " + name + " parameters");
    p[i] = parse_hexfloat(tok);
  }
  require(all_finite(net.params()), ErrorKind::kNumeric, "checkpoint: non-finite parameter in " + name);
  return net;
}

}  // namespace

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  require(sizes_.size() >= 2, ErrorKind::kInvalidArgument, "MLP needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    require(sizes_[l] >= 1 && sizes_[l + 1] >= 1, ErrorKind::kInvalidArgument, "MLP layer sizes must be >= 1");
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::init(std::vector<std::size_t> sizes, std::uint64_t seed) {
  Mlp net(std::move(sizes));
  Rng rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t fan_in = net.sizes_[l], fan_out = net.sizes_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    double* w = net.params_.data() + net.weight_offset(l);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-bound, bound);
  }
  return net;
}

std::span<const double> Mlp::weights(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), sizes_[layer] * sizes_[layer + 1]};
}

std::span<const double> Mlp::biases(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
}

std::vector<double> Mlp::forward(std::span<const double> x, ForwardCache* cache) const {
  require(!sizes_.empty(), ErrorKind::kState, "forward on an empty network");
  require(x.size() == input_dim(), ErrorKind::kInvalidArgument,
          "input has dimension " + std::to_string(x.size()) + ", network expects " + std::to_string(input_dim()));
  if (cache) {
    cache->owner = this;
    cache->generation = generation_;
    cache->activations.resize(sizes_.size());
    cache->activations[0].assign(x.begin(), x.end());
  }
  std::vector<double> in(x.begin(), x.end()), out;
  const std::size_t L = num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    out.assign(b, b + n_out);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = in[i];
      const double* row = w + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * row[j];
    }
    if (l + 1 < L) {
      for (auto& v : out) v = std::tanh(v);
    }
    if (cache) cache->activations[l + 1] = out;
    in.swap(out);
  }
  return in;
}

void Mlp::accumulate_backward(const ForwardCache& cache, std::span<const double> grad_out,
                              std::span<double> grad_params, std::span<double> grad_input) const {
  require(cache.owner == this && cache.generation == generation_ && cache.activations.size() == sizes_.size(),
          ErrorKind::kState, "stale forward cache: parameters changed since forward");
  require(grad_out.size() == output_dim(), ErrorKind::kInvalidArgument, "grad_out dimension mismatch");
  require(grad_params.size() == params_.size(), ErrorKind::kInvalidArgument, "gradient buffer size mismatch");
  require(grad_input.empty() || grad_input.size() == input_dim(), ErrorKind::kInvalidArgument,
          "grad_input dimension mismatch");

  std::vector<double> delta(grad_out.begin(), grad_out.end()), prev;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const auto& a = cache.activations[l];
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad_params.data() + weight_offset(l);
    double* gb = grad_params.data() + bias_offset(l);
    for (std::size_t j = 0; j < n_out; ++j) gb[j] += delta[j];
    for (std::size_t i = 0; i < n_in; ++i) {
      double* grow = gw + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) grow[j] += a[i] * delta[j];
    }
    if (l == 0 && grad_input.empty()) break;
    prev.assign(n_in, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* row = w + i * n_out;
      double s = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) s += row[j] * delta[j];
      prev[i] = s;
    }
    if (l == 0) {
      std::copy(prev.begin(), prev.end(), grad_input.begin());
      break;
    }
    for (std::size_t i = 0; i < n_in; ++i) prev[i] *= 1.0 - a[i] * a[i];  // tanh'
    delta.swap(prev);
  }
}

std::vector<double> Mlp::backward(const ForwardCache& cache, std::span<const double> grad_out) const {
  std::vector<double> g(params_.size(), 0.0);
  accumulate_backward(cache, grad_out, g);
  return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  require(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorKind::kInvalidArgument, "adam: shape mismatch");
  require(all_finite(grads), ErrorKind::kNumeric, "adam: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  require(all_finite(params), ErrorKind::kNumeric, "adam: parameters became non-finite");
}

double gaussian_entropy(std::span<const double> log_std) {
  double h = 0.0;
  for (double ls : log_std) h += 0.5 + kHalfLog2Pi + ls;  // 0.5 * (1 + log(2 pi sigma^2))
  return h;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
  require(mean.size() == log_std.size() && action.size() == log_std.size(), ErrorKind::kInvalidArgument,
          "log_prob: dimension mismatch");
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (action[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -kHalfLog2Pi - log_std[d] - 0.5 * z * z;
  }
  return lp;
}

GaussianPolicy::GaussianPolicy(Mlp mean_net, std::vector<double> log_std)
    : mean_net_(std::move(mean_net)), log_std_(std::move(log_std)) {
  require(mean_net_.output_dim() == log_std_.size(), ErrorKind::kInvalidArgument,
          "policy head and log_std dimensions differ");
  clamp();
}

void GaussianPolicy::clamp() {
  for (auto& ls : log_std_) ls = std::clamp(ls, kMinLogStd, kMaxLogStd);
}

std::vector<double> GaussianPolicy::stddev() const {
  std::vector<double> out(log_std_.size());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = std::exp(log_std_[d]);
  return out;
}

std::vector<double> GaussianPolicy::mean(std::span<const double> obs, ForwardCache* cache) const {
  return mean_net_.forward(obs, cache);
}

double GaussianPolicy::log_prob(std::span<const double> mean, std::span<const double> action) const {
  return gaussian_log_prob(mean, log_std_, action);
}

double GaussianPolicy::entropy() const { return gaussian_entropy(log_std_); }

GaussianPolicy::Sample GaussianPolicy::sample(std::span<const double> obs, Rng& rng) const {
  Sample s;
  s.mean = mean(obs);
  s.action.resize(s.mean.size());
  for (std::size_t d = 0; d < s.mean.size(); ++d) s.action[d] = s.mean[d] + std::exp(log_std_[d]) * rng.normal();
  s.log_prob = log_prob(s.mean, s.action);
  return s;
}

void write_checkpoint(std::ostream& out, const GaussianPolicy& actor, const Mlp& critic) {
  out << "esgrl-ckpt v1\n";
  write_net(out, "actor", actor.mean_net());
  out << "log_std " << actor.log_std().size() << '\n';
  for (double v : actor.log_std()) out << hexfloat(v) << '\n';
  write_net(out, "critic", critic);
  out << "end\n";
  require(static_cast<bool>(out), ErrorKind::kIo, "checkpoint write failed");
}

void read_checkpoint(std::istream& in, GaussianPolicy& actor, Mlp& critic) {
  std::string magic;
  std::getline(in, magic);
  if (!magic.empty() && magic.back() == '\r') magic.pop_back();
  require(magic == "esgrl-ckpt v1", ErrorKind::kParse, "not an esgrl-ckpt v1 checkpoint");
  Mlp mean_net = read_net(in, "actor");
  expect_token(in, "log_std");
  std::vector<double> log_std(read_count(in));
  std::string tok;
  for (auto& v : log_std) {
    require(static_cast<bool>(in >> tok), ErrorKind::kParse, "checkpoint: truncated log_std");
    v = parse_hexfloat(tok);
  }
  Mlp value_net = read_net(in, "critic");
  expect_token(in, "end");
  actor = GaussianPolicy(std::move(mean_net), std::move(log_std));
  critic = std::move(value_net);
}

}  // namespace esgrl

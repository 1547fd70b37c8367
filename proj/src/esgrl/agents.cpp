#include "esgrl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "esgrl/error.hpp"

namespace esgrl {
namespace {

// Shrinks the initial policy head so the first actions sit near equal weight.
constexpr double kPolicyHeadScale = 0.01;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Gradient of a per-sample policy term through the Gaussian log-density.
// dlogp is d(loss)/d(log pi(a|s)) for this sample.
void policy_sample_grad(const ActorCritic& ac, const ForwardCache& cache, std::span<const double> mean,
                        std::span<const double> action, double dlogp, std::span<double> grad) {
  const std::size_t A = ac.actor.action_dim();
  const std::size_t n_actor = ac.actor.mean_net().num_params();
  auto log_std = ac.actor.log_std();
  std::vector<double> dmean(A);
  for (std::size_t d = 0; d < A; ++d) {
    const double inv_var = std::exp(-2.0 * log_std[d]);
    const double diff = action[d] - mean[d];
    dmean[d] = dlogp * diff * inv_var;                         // d logp / d mu
    grad[n_actor + d] += dlogp * (diff * diff * inv_var - 1.0);  // d logp / d log_std
  }
  ac.actor.mean_net().accumulate_backward(cache, dmean, grad.subspan(0, n_actor));
}

// value_coef * mean[(G - V)^2] over `indices`; returns the mean squared error.
double value_term(const RolloutBuffer& buf, std::span<const std::size_t> indices, std::span<const double> returns,
                  const ActorCritic& ac, double value_coef, std::vector<double>* grad) {
  const std::size_t n_actor = ac.actor.mean_net().num_params() + ac.actor.action_dim();
  const double n = static_cast<double>(indices.size());
  double mse = 0.0;
  ForwardCache cache;
  for (std::size_t i : indices) {
    const double v = ac.critic.forward(buf.observation(i), grad ? &cache : nullptr)[0];
    const double err = returns[i] - v;
    mse += err * err;
    if (grad) {
      const double dv = -2.0 * value_coef * err / n;
      ac.critic.accumulate_backward(cache, std::span<const double>(&dv, 1),
                                    std::span<double>(*grad).subspan(n_actor));
    }
  }
  return mse / n;
}

void entropy_grad(const ActorCritic& ac, double entropy_coef, std::vector<double>* grad) {
  if (!grad) return;
  const std::size_t n_actor = ac.actor.mean_net().num_params();
  for (std::size_t d = 0; d < ac.actor.action_dim(); ++d) (*grad)[n_actor + d] -= entropy_coef;
}

void check_finite_loss(const LossBreakdown& l) {
  if (!std::isfinite(l.total) || !std::isfinite(l.policy) || !std::isfinite(l.value)) {
    fail(ErrorKind::kNumeric, "non-finite loss (policy " + fmt(l.policy) + ", value " + fmt(l.value) +
                                  ", entropy " + fmt(l.entropy) + ")");
  }
}

void check_buffer(const RolloutBuffer& buf, std::span<const double> advantages, std::span<const double> returns) {
  require(buf.size() > 0, ErrorKind::kState, "empty rollout buffer");
  require(advantages.size() == buf.size() && returns.size() == buf.size(), ErrorKind::kInvalidArgument,
          "advantage/return length differs from buffer");
}

}  // namespace

const char* to_string(Algorithm algo) { return algo == Algorithm::kA2C ? "a2c" : "ppo"; }

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "A2C" || name == "a2c") return Algorithm::kA2C;
  if (name == "PPO" || name == "ppo") return Algorithm::kPPO;
  fail(ErrorKind::kValidation, "unknown algorithm '" + std::string(name) + "' (a2c|ppo)");
}

AgentHyper AgentHyper::defaults(Algorithm algo) {
  AgentHyper h;
  h.algorithm = algo;
  if (algo == Algorithm::kPPO) {
    h.learning_rate = 1e-4;
    h.entropy_coef = 5e-3;
    h.batch_size = 128;
    h.rollout_length = 2048;
    h.epochs = 10;
  }
  return h;
}

void AgentHyper::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::kValidation, "agent.gamma must lie in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, ErrorKind::kValidation, "agent.gae_lambda must lie in [0, 1]");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorKind::kValidation,
          "agent.learning_rate must be >= 0");
  require(std::isfinite(entropy_coef) && entropy_coef >= 0.0, ErrorKind::kValidation,
          "agent.entropy_coef must be >= 0");
  require(clip_epsilon > 0.0 && clip_epsilon < 1.0, ErrorKind::kValidation, "agent.clip_epsilon must lie in (0, 1)");
  require(rollout_length >= 1, ErrorKind::kValidation, "agent.rollout_length must be >= 1");
  require(total_timesteps >= rollout_length, ErrorKind::kValidation,
          "agent.total_timesteps must be >= rollout_length");
  require(batch_size >= 1, ErrorKind::kValidation, "agent.batch_size must be >= 1");
  require(epochs >= 1, ErrorKind::kValidation, "agent.epochs must be >= 1");
  require(value_coef >= 0.0, ErrorKind::kValidation, "agent.value_coef must be >= 0");
  require(max_grad_norm > 0.0, ErrorKind::kValidation, "agent.max_grad_norm must be > 0");
  for (auto h : hidden) require(h >= 1, ErrorKind::kValidation, "agent.hidden sizes must be >= 1");
  require(initial_log_std >= GaussianPolicy::kMinLogStd && initial_log_std <= GaussianPolicy::kMaxLogStd,
          ErrorKind::kValidation, "agent.initial_log_std must lie in [-5, 2]");
}

std::string AgentHyper::canonical() const {
  std::string h;
  for (auto x : hidden) h += std::to_string(x) + "x";
  return std::string("algorithm=") + to_string(algorithm) + ";gamma=" + fmt(gamma) +
         ";gae_lambda=" + fmt(gae_lambda) + ";learning_rate=" + fmt(learning_rate) +
         ";entropy_coef=" + fmt(entropy_coef) + ";clip_epsilon=" + fmt(clip_epsilon) +
         ";batch_size=" + std::to_string(batch_size) + ";epochs=" + std::to_string(epochs) +
         ";rollout_length=" + std::to_string(rollout_length) + ";total_timesteps=" + std::to_string(total_timesteps) +
         ";value_coef=" + fmt(value_coef) + ";max_grad_norm=" + fmt(max_grad_norm) +
         ";normalize_advantage=" + std::to_string(normalize_advantage) + ";hidden=" + h +
         ";initial_log_std=" + fmt(initial_log_std) + ";seed=" + std::to_string(seed);
}

RolloutBuffer::RolloutBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  require(capacity >= 1, ErrorKind::kInvalidArgument, "rollout buffer capacity must be >= 1");
  observations.reserve(capacity * obs_dim);
  actions.reserve(capacity * action_dim);
}

void RolloutBuffer::add(std::span<const double> obs, std::span<const double> action, double log_prob,
                        double reward, double value, bool done) {
  require(!full(), ErrorKind::kState, "rollout buffer is full");
  require(obs.size() == obs_dim_ && action.size() == action_dim_, ErrorKind::kInvalidArgument,
          "rollout buffer: dimension mismatch");
  observations.insert(observations.end(), obs.begin(), obs.end());
  actions.insert(actions.end(), action.begin(), action.end());
  log_probs.push_back(log_prob);
  rewards.push_back(reward);
  values.push_back(value);
  dones.push_back(done ? 1 : 0);
}

void RolloutBuffer::clear() {
  observations.clear();
  actions.clear();
  log_probs.clear();
  rewards.clear();
  values.clear();
  dones.clear();
  last_value = 0.0;
  consumed_ = false;
}

void RolloutBuffer::consume() {
  require(full(), ErrorKind::kState, "update requires a full rollout buffer");
  require(!consumed_, ErrorKind::kState, "rollout buffer already consumed");
  consumed_ = true;
}

Advantages compute_advantages(std::span<const double> rewards, std::span<const double> values,
                              std::span<const std::uint8_t> dones, double last_value, double gamma,
                              double gae_lambda) {
  require(rewards.size() == values.size() && rewards.size() == dones.size(), ErrorKind::kInvalidArgument,
          "compute_advantages: length mismatch");
  require(gamma >= 0.0 && gamma <= 1.0 && gae_lambda >= 0.0 && gae_lambda <= 1.0, ErrorKind::kInvalidArgument,
          "compute_advantages: gamma and gae_lambda must lie in [0, 1]");
  const std::size_t n = rewards.size();
  Advantages out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : last_value;
    const double alive = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * alive - values[t];
    next_adv = delta + gamma * gae_lambda * alive * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

void standardize(std::span<double> x) {
  if (x.empty()) return;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (auto& v : x) v = (v - mean) / (sd + 1e-8);
}

ActorCritic ActorCritic::create(std::size_t obs_dim, std::size_t action_dim, const AgentHyper& hyper) {
  Rng seeds(hyper.seed);
  std::vector<std::size_t> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  std::vector<std::size_t> critic_sizes = actor_sizes;
  actor_sizes.push_back(action_dim);
  critic_sizes.push_back(1);

  Mlp mean_net = Mlp::init(actor_sizes, seeds.next_u64());
  {
    auto p = mean_net.mutable_params();
    // Output layer is the last (fan_in * fan_out + fan_out) entries.
    const std::size_t fan_in = actor_sizes[actor_sizes.size() - 2];
    const std::size_t head = fan_in * action_dim + action_dim;
    for (std::size_t i = p.size() - head; i < p.size(); ++i) p[i] *= kPolicyHeadScale;
  }
  ActorCritic ac{GaussianPolicy(std::move(mean_net), std::vector<double>(action_dim, hyper.initial_log_std)),
                 Mlp::init(critic_sizes, seeds.next_u64()), AdamState(), AdamState(action_dim), AdamState()};
  ac.actor_opt = AdamState(ac.actor.mean_net().num_params());
  ac.critic_opt = AdamState(ac.critic.num_params());
  return ac;
}

LossBreakdown a2c_loss(const RolloutBuffer& buf, std::span<const double> advantages,
                       std::span<const double> returns, const ActorCritic& ac, const AgentHyper& hyper,
                       std::vector<double>* grad) {
  check_buffer(buf, advantages, returns);
  if (grad) require(grad->size() == ac.num_params(), ErrorKind::kInvalidArgument, "gradient buffer size mismatch");
  const std::size_t n = buf.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossBreakdown out;
  ForwardCache cache;
  for (std::size_t t = 0; t < n; ++t) {
    const auto mean = ac.actor.mean(buf.observation(t), grad ? &cache : nullptr);
    const double logp = ac.actor.log_prob(mean, buf.action(t));
    out.policy += -logp * advantages[t] * inv_n;
    if (grad) policy_sample_grad(ac, cache, mean, buf.action(t), -advantages[t] * inv_n, *grad);
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  out.value = value_term(buf, all, returns, ac, hyper.value_coef, grad);
  out.entropy = ac.actor.entropy();
  entropy_grad(ac, hyper.entropy_coef, grad);
  out.total = out.policy - hyper.entropy_coef * out.entropy + hyper.value_coef * out.value;
  return out;
}

LossBreakdown ppo_loss(const RolloutBuffer& buf, std::span<const std::size_t> indices,
                       std::span<const double> advantages, std::span<const double> returns,
                       const ActorCritic& ac, const AgentHyper& hyper, double clip_epsilon,
                       std::vector<double>* grad) {
  check_buffer(buf, advantages, returns);
  require(!indices.empty(), ErrorKind::kInvalidArgument, "ppo_loss: empty minibatch");
  if (grad) require(grad->size() == ac.num_params(), ErrorKind::kInvalidArgument, "gradient buffer size mismatch");
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  LossBreakdown out;
  ForwardCache cache;
  for (std::size_t i : indices) {
    const auto mean = ac.actor.mean(buf.observation(i), grad ? &cache : nullptr);
    const double logp = ac.actor.log_prob(mean, buf.action(i));
    const double ratio = std::exp(logp - buf.log_probs[i]);
    const double adv = advantages[i];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv;
    out.policy += -std::min(unclipped, clipped) * inv_n;
    // The clipped branch is constant in theta whenever it is the strict minimum.
    if (grad && unclipped <= clipped) policy_sample_grad(ac, cache, mean, buf.action(i), -adv * ratio * inv_n, *grad);
  }
  out.value = value_term(buf, indices, returns, ac, hyper.value_coef, grad);
  out.entropy = ac.actor.entropy();
  entropy_grad(ac, hyper.entropy_coef, grad);
  out.total = out.policy - hyper.entropy_coef * out.entropy + hyper.value_coef * out.value;
  return out;
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grad) g *= scale;
  }
  return norm;
}

void apply_gradient(ActorCritic& ac, std::span<const double> grad, double learning_rate) {
  require(grad.size() == ac.num_params(), ErrorKind::kInvalidArgument, "gradient size mismatch");
  const AdamConfig cfg{learning_rate};
  const std::size_t n_actor = ac.actor.mean_net().num_params();
  const std::size_t A = ac.actor.action_dim();
  adam_step(ac.actor.mean_net().mutable_params(), grad.subspan(0, n_actor), ac.actor_opt, cfg);
  adam_step(ac.actor.mutable_log_std(), grad.subspan(n_actor, A), ac.log_std_opt, cfg);
  ac.actor.clamp();
  adam_step(ac.critic.mutable_params(), grad.subspan(n_actor + A), ac.critic_opt, cfg);
}

namespace {

UpdateDiagnostics step_with(ActorCritic& ac, std::vector<double>& grad, const LossBreakdown& loss,
                            const AgentHyper& hyper) {
  check_finite_loss(loss);
  require(all_finite(grad), ErrorKind::kNumeric, "non-finite gradient");
  UpdateDiagnostics d;
  d.policy_loss = loss.policy;
  d.value_loss = loss.value;
  d.entropy = loss.entropy;
  d.grad_norm = clip_grad_norm(grad, hyper.max_grad_norm);
  d.clipped_grad_norm = std::min(d.grad_norm, hyper.max_grad_norm);
  apply_gradient(ac, grad, hyper.learning_rate);
  return d;
}

}  // namespace

UpdateDiagnostics a2c_update(RolloutBuffer& buf, ActorCritic& ac, const AgentHyper& hyper) {
  buf.consume();
  auto adv = compute_advantages(buf.rewards, buf.values, buf.dones, buf.last_value, hyper.gamma, hyper.gae_lambda);
  if (hyper.normalize_advantage) standardize(adv.advantages);
  std::vector<double> grad(ac.num_params(), 0.0);
  const auto loss = a2c_loss(buf, adv.advantages, adv.returns, ac, hyper, &grad);
  return step_with(ac, grad, loss, hyper);
}

UpdateDiagnostics ppo_update(RolloutBuffer& buf, ActorCritic& ac, const AgentHyper& hyper, Rng& rng) {
  buf.consume();
  auto adv = compute_advantages(buf.rewards, buf.values, buf.dones, buf.last_value, hyper.gamma, hyper.gae_lambda);
  if (hyper.normalize_advantage) standardize(adv.advantages);
  const std::size_t n = buf.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min(hyper.batch_size, n);

  UpdateDiagnostics last;
  double policy_sum = 0.0, value_sum = 0.0, clipped = 0.0;
  std::size_t batches = 0;
  std::vector<double> grad(ac.num_params());
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      for (std::size_t i : idx) {
        const double ratio = std::exp(ac.actor.log_prob(ac.actor.mean(buf.observation(i)), buf.action(i)) -
                                      buf.log_probs[i]);
        if (std::abs(ratio - 1.0) > hyper.clip_epsilon) clipped += 1.0;
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const auto loss = ppo_loss(buf, idx, adv.advantages, adv.returns, ac, hyper, hyper.clip_epsilon, &grad);
      last = step_with(ac, grad, loss, hyper);
      policy_sum += loss.policy;
      value_sum += loss.value;
      ++batches;
    }
  }
  last.policy_loss = policy_sum / static_cast<double>(batches);
  last.value_loss = value_sum / static_cast<double>(batches);
  last.clip_fraction = clipped / static_cast<double>(n * hyper.epochs);
  return last;
}

void TrainedPolicy::save(const std::string& path) const {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write checkpoint '" + path + "'");
    write_checkpoint(out, actor, critic);
  }
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fingerprint));
  nlohmann::json meta{{"format", "esgrl-ckpt v1"},
                      {"fingerprint", hex},
                      {"obs_mean", obs_stats.mean},
                      {"obs_std", obs_stats.stddev}};
  std::ofstream out(path + ".meta.json", std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write checkpoint sidecar for '" + path + "'");
  out << meta.dump(2) << '\n';
}

TrainedPolicy TrainedPolicy::load(const std::string& path) {
  TrainedPolicy p;
  {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot open checkpoint '" + path + "'");
    read_checkpoint(in, p.actor, p.critic);
  }
  std::ifstream in(path + ".meta.json", std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "missing checkpoint sidecar for '" + path + "'");
  try {
    const auto meta = nlohmann::json::parse(in);
    p.fingerprint = std::stoull(meta.at("fingerprint").get<std::string>(), nullptr, 16);
    p.obs_stats.mean = meta.at("obs_mean").get<std::vector<double>>();
    p.obs_stats.stddev = meta.at("obs_std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("checkpoint sidecar: ") + e.what());
  }
  return p;
}

std::string TrainResult::log_csv() const {
  std::string out = "update,timestep,policy_loss,value_loss,entropy,mean_reward\n";
  for (const auto& r : log) {
    out += std::to_string(r.update) + "," + std::to_string(r.timestep) + "," + fmt(r.policy_loss) + "," +
           fmt(r.value_loss) + "," + fmt(r.entropy) + "," + fmt(r.mean_reward) + "\n";
  }
  return out;
}

TrainResult train(PortfolioEnv& env, const AgentHyper& hyper) {
  hyper.validate();
  Rng rng(hyper.seed);
  AgentHyper init_hyper = hyper;
  init_hyper.seed = rng.next_u64();
  ActorCritic ac = ActorCritic::create(env.obs_dim(), env.action_dim(), init_hyper);
  Rng sampler = rng.fork(1);
  Rng shuffler = rng.fork(2);

  TrainResult result;
  RolloutBuffer buf(hyper.rollout_length, env.obs_dim(), env.action_dim());
  const std::size_t updates = hyper.total_timesteps / hyper.rollout_length;
  std::size_t timestep = 0;
  auto obs = env.reset(hyper.seed);
  for (std::size_t u = 0; u < updates; ++u) {
    buf.clear();
    for (std::size_t k = 0; k < hyper.rollout_length; ++k) {
      const auto s = ac.actor.sample(obs, sampler);
      const double v = ac.value(obs);
      auto out = env.step(s.action);
      buf.add(obs, s.action, s.log_prob, out.reward, v, out.done);
      obs = out.done ? env.reset(hyper.seed) : std::move(out.observation);
      ++timestep;
    }
    buf.last_value = ac.value(obs);
    const double mean_reward =
        std::accumulate(buf.rewards.begin(), buf.rewards.end(), 0.0) / static_cast<double>(buf.size());
    const auto diag = hyper.algorithm == Algorithm::kA2C ? a2c_update(buf, ac, hyper)
                                                         : ppo_update(buf, ac, hyper, shuffler);
    result.log.push_back({u + 1, timestep, diag.policy_loss, diag.value_loss, diag.entropy, mean_reward});
  }
  result.policy = TrainedPolicy{std::move(ac.actor), std::move(ac.critic), env.obs_stats(), env.fingerprint()};
  return result;
}

EpisodeResult evaluate(const TrainedPolicy& policy, PortfolioEnv& env) {
  require(policy.fingerprint == env.fingerprint(), ErrorKind::kValidation,
          "policy was trained under a different environment configuration");
  require(policy.obs_stats == env.obs_stats(), ErrorKind::kValidation,
          "environment observation statistics differ from the policy's training statistics");
  return run_episode(env, [&](std::span<const double> obs) { return policy.act(obs); });
}

}  // namespace esgrl

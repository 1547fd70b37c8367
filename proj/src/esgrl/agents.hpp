#ifndef ESGRL_AGENTS_HPP_
#define ESGRL_AGENTS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esgrl/env.hpp"
#include "esgrl/nn.hpp"

namespace esgrl {

enum class Algorithm { kA2C, kPPO };

const char* to_string(Algorithm algo);
Algorithm algorithm_from_string(std::string_view name);

struct AgentHyper {
  Algorithm algorithm = Algorithm::kA2C;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 2e-4;
  double entropy_coef = 5e-3;
  double clip_epsilon = 0.2;       // PPO
  std::size_t batch_size = 128;    // PPO minibatch
  std::size_t epochs = 10;         // PPO
  std::size_t rollout_length = 5;
  std::size_t total_timesteps = 50000;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
  std::vector<std::size_t> hidden{64, 64};
  double initial_log_std = 0.0;
  std::uint64_t seed = 0;

  // A2C: lr 2e-4, entropy 5e-3, 5-step rollouts.
  // PPO: lr 1e-4, entropy 5e-3, batch 128, 2048-step rollouts, 10 epochs.
  static AgentHyper defaults(Algorithm algo);

  void validate() const;
  std::string canonical() const;
};

// Fixed-capacity on-policy storage, consumed once per update.
class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t action_dim);

  void add(std::span<const double> obs, std::span<const double> action, double log_prob, double reward,
           double value, bool done);
  void clear();
  // Throws kState when the buffer is not full or was already consumed.
  void consume();

  std::size_t size() const { return log_probs.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return size() == capacity_; }
  bool consumed() const { return consumed_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  std::span<const double> observation(std::size_t i) const {
    return {observations.data() + i * obs_dim_, obs_dim_};
  }
  std::span<const double> action(std::size_t i) const { return {actions.data() + i * action_dim_, action_dim_}; }

  std::vector<double> observations;
  std::vector<double> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  double last_value = 0.0;  // V(s) after the final stored transition

 private:
  std::size_t capacity_;
  std::size_t obs_dim_;
  std::size_t action_dim_;
  bool consumed_ = false;
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// GAE(gamma, lambda); done_t cuts bootstrapping from step t+1.
Advantages compute_advantages(std::span<const double> rewards, std::span<const double> values,
                              std::span<const std::uint8_t> dones, double last_value, double gamma,
                              double gae_lambda);

// In-place (x - mean) / (std + 1e-8), population std.
void standardize(std::span<double> x);

struct ActorCritic {
  GaussianPolicy actor;
  Mlp critic;
  AdamState actor_opt;
  AdamState log_std_opt;
  AdamState critic_opt;

  static ActorCritic create(std::size_t obs_dim, std::size_t action_dim, const AgentHyper& hyper);

  // Flat gradient layout: [actor net | log_std | critic net].
  std::size_t num_params() const {
    return actor.mean_net().num_params() + actor.action_dim() + critic.num_params();
  }
  double value(std::span<const double> obs) const { return critic.forward(obs)[0]; }
};

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// mean[-log pi(a|s) A] - c H + value_coef mean[(G - V)^2] over the whole
// buffer. Adds d(total)/d(params) into *grad when given.
LossBreakdown a2c_loss(const RolloutBuffer& buf, std::span<const double> advantages,
                       std::span<const double> returns, const ActorCritic& ac, const AgentHyper& hyper,
                       std::vector<double>* grad = nullptr);

// -mean[min(ratio A, clip(ratio, 1-eps, 1+eps) A)] - c H + value_coef
// mean[(G - V)^2] over `indices`, ratio against the stored log-probs.
LossBreakdown ppo_loss(const RolloutBuffer& buf, std::span<const std::size_t> indices,
                       std::span<const double> advantages, std::span<const double> returns,
                       const ActorCritic& ac, const AgentHyper& hyper, double clip_epsilon,
                       std::vector<double>* grad = nullptr);

// Rescales to norm <= max_norm; returns the norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

// One Adam step on every parameter block, then re-clamps log_std.
void apply_gradient(ActorCritic& ac, std::span<const double> grad, double learning_rate);

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;          // before clipping, last optimizer step
  double clipped_grad_norm = 0.0;  // after clipping, last optimizer step
  double clip_fraction = 0.0;      // PPO only
};

UpdateDiagnostics a2c_update(RolloutBuffer& buf, ActorCritic& ac, const AgentHyper& hyper);
UpdateDiagnostics ppo_update(RolloutBuffer& buf, ActorCritic& ac, const AgentHyper& hyper, Rng& rng);

struct TrainedPolicy {
  GaussianPolicy actor;
  Mlp critic;
  ObsStats obs_stats;
  std::uint64_t fingerprint = 0;

  // Mean (deterministic) action.
  std::vector<double> act(std::span<const double> obs) const { return actor.mean(obs); }

  // Checkpoint at `path`, fingerprint and normalization sidecar at
  // `path + ".meta.json"`.
  void save(const std::string& path) const;
  static TrainedPolicy load(const std::string& path);

  friend bool operator==(const TrainedPolicy&, const TrainedPolicy&) = default;
};

struct TrainLogRow {
  std::size_t update = 0;
  std::size_t timestep = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_reward = 0.0;
};

struct TrainResult {
  TrainedPolicy policy;
  std::vector<TrainLogRow> log;

  // `update,timestep,policy_loss,value_loss,entropy,mean_reward`
  std::string log_csv() const;
};

// Collect rollouts and update until total_timesteps; the env restarts
// from reset whenever its window is exhausted.
TrainResult train(PortfolioEnv& env, const AgentHyper& hyper);

// One deterministic episode with the policy mean action.
EpisodeResult evaluate(const TrainedPolicy& policy, PortfolioEnv& env);

}  // namespace esgrl

#endif  // ESGRL_AGENTS_HPP_

#ifndef ESGRL_ENV_HPP_
#define ESGRL_ENV_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esgrl/indicators.hpp"
#include "esgrl/marketdata.hpp"

namespace esgrl {

struct EnvConfig {
  static constexpr double kEsgMax = 10.0;

  double lambda = 1.0;  // ESG importance
  bool regulate = true;
  bool esg_in_state = true;
  double transaction_cost = 0.0;  // proportional to turnover
  bool include_weights_in_obs = false;
  bool normalize_obs = true;
  // Normalized entries are clamped to [-obs_clip, obs_clip]; 0 disables.
  double obs_clip = 5.0;
  // Literal reading: grants/taxes also compound into portfolio value.
  bool regulation_affects_value = false;
  EsgField esg_field = EsgField::kMean;

  void validate() const;
  // Stable text form, used for fingerprints and manifests.
  std::string canonical() const;
};

// Clip to [-1, 1], shift by +1, renormalize; all-zero mass -> equal weight.
std::vector<double> action_to_weights(std::span<const double> action);
std::vector<double> equal_weights(std::size_t n);

// Weighted simple return sum_j w_j (p_t/p_{t-1} - 1).
double portfolio_return(std::span<const double> weights, std::span<const double> closes_now,
                        std::span<const double> closes_prev);

// Portfolio ESG value: weighted mean of asset scores.
double esg_score(std::span<const double> weights, std::span<const double> esg);
// ESG value of the equal-weight index; identical to esg_score at equal weights.
double index_esg(std::span<const double> esg);

// Grant when phi > psi, tax when phi < psi, identity when equal.
double regulate(double raw_return, double phi, double psi, double lambda);

// Extension point for non-linear grant/tax schedules.
using ShapingFunction = std::function<double(double raw_return, double phi, double psi, double lambda)>;

struct PortfolioState {
  std::size_t day_index = 0;
  std::vector<double> weights;
  double portfolio_value = 1.0;
};

// Per-coordinate z-score statistics for the market block of an observation.
struct ObsStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const ObsStats&, const ObsStats&) = default;
};

struct StepInfo {
  double raw_return = 0.0;
  double regulated_return = 0.0;
  double phi = 0.0;
  double psi = 0.0;
  double turnover = 0.0;
  double cost = 0.0;
};

struct StepOutcome {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EpisodeResult {
  std::vector<std::string> tickers;
  Date start_date;
  std::vector<Date> dates;  // date reached by each step
  std::vector<double> raw_returns;
  std::vector<double> regulated_returns;
  std::vector<double> rewards;
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> turnover;
  std::vector<double> cost;
  std::vector<double> values;  // portfolio value after each step
  std::vector<std::vector<double>> weights;

  std::size_t steps() const { return raw_returns.size(); }
  double final_value() const { return values.empty() ? 1.0 : values.back(); }
  // Net daily returns that drove portfolio value.
  std::vector<double> value_returns() const;
  double mean_phi() const;

  // `day,date,raw_return,regulated_return,phi,psi,turnover,cost,value`
  std::string trace_csv() const;
  // `date,<ticker...>`
  std::string weights_csv() const;
  // `date,value`, starting with the initial value 1 on start_date.
  std::string equity_csv() const;
  static EpisodeResult from_trace_csv(std::string_view text);
};

class PortfolioEnv {
 public:
  // Episode runs over panel days [first_day, last_day]; both must be past
  // the indicator warm-up. Without `stats` and with normalize_obs set, the
  // z-score statistics come from this window.
  PortfolioEnv(std::shared_ptr<const FeaturePanel> panel, std::size_t first_day, std::size_t last_day,
               EnvConfig cfg, std::optional<ObsStats> stats = std::nullopt);

  std::vector<double> reset(std::uint64_t seed = 0);
  StepOutcome step(std::span<const double> action);

  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return panel_->dataset().num_assets(); }
  std::size_t episode_length() const { return last_day_ - first_day_; }
  bool done() const { return state_.day_index >= last_day_; }
  const PortfolioState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const ObsStats& obs_stats() const { return stats_; }
  const FeaturePanel& panel() const { return *panel_; }
  std::size_t first_day() const { return first_day_; }
  std::size_t last_day() const { return last_day_; }

  // Hash of everything that fixes the observation layout and reward.
  std::uint64_t fingerprint() const;

  void set_shaping(ShapingFunction fn) { shaping_ = std::move(fn); }

  std::vector<double> esg_scores(std::size_t day) const;
  std::vector<double> closes(std::size_t day) const;

 private:
  std::vector<double> raw_observation(std::size_t day) const;
  std::vector<double> observe() const;

  std::shared_ptr<const FeaturePanel> panel_;
  std::size_t first_day_;
  std::size_t last_day_;
  EnvConfig cfg_;
  ObsStats stats_;
  std::size_t market_dim_ = 0;
  std::size_t obs_dim_ = 0;
  PortfolioState state_;
  bool started_ = false;
  ShapingFunction shaping_;
};

using PolicyFn = std::function<std::vector<double>(std::span<const double> observation)>;

// Reset and step to the end, recording the trace.
EpisodeResult run_episode(PortfolioEnv& env, const PolicyFn& policy, std::uint64_t seed = 0);

}  // namespace esgrl

#endif  // ESGRL_ENV_HPP_

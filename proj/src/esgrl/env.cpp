#include "esgrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "esgrl/error.hpp"

namespace esgrl {
namespace {

constexpr std::size_t kOhlcvFeatures = 5;
constexpr std::size_t kEsgFeatures = 4;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void EnvConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::kValidation, "env.lambda must be >= 0");
  require(transaction_cost >= 0.0 && transaction_cost <= 0.1, ErrorKind::kValidation,
          "env.transaction_cost must lie in [0, 0.1]");
  require(std::isfinite(obs_clip) && obs_clip >= 0.0, ErrorKind::kValidation, "env.obs_clip must be >= 0");
}

std::string EnvConfig::canonical() const {
  return "lambda=" + fmt(lambda) + ";regulate=" + std::to_string(regulate) +
         ";esg_in_state=" + std::to_string(esg_in_state) + ";transaction_cost=" + fmt(transaction_cost) +
         ";include_weights_in_obs=" + std::to_string(include_weights_in_obs) +
         ";normalize_obs=" + std::to_string(normalize_obs) + ";obs_clip=" + fmt(obs_clip) +
         ";regulation_affects_value=" + std::to_string(regulation_affects_value) +
         ";esg_field=" + to_string(esg_field) + ";esg_max=" + fmt(kEsgMax);
}

std::vector<double> equal_weights(std::size_t n) {
  require(n >= 1, ErrorKind::kInvalidArgument, "need at least one asset");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> action_to_weights(std::span<const double> action) {
  require(!action.empty(), ErrorKind::kInvalidArgument, "empty action");
  std::vector<double> w(action.size());
  double total = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    require(std::isfinite(action[i]), ErrorKind::kNumeric, "non-finite action component");
    w[i] = std::max(0.0, std::clamp(action[i], -1.0, 1.0) + 1.0);
    total += w[i];
  }
  if (total <= 0.0) return equal_weights(action.size());
  for (auto& x : w) x /= total;
  return w;
}

double portfolio_return(std::span<const double> weights, std::span<const double> closes_now,
                        std::span<const double> closes_prev) {
  require(weights.size() == closes_now.size() && weights.size() == closes_prev.size(),
          ErrorKind::kInvalidArgument, "portfolio_return: length mismatch");
  double r = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    require(closes_now[j] > 0.0 && closes_prev[j] > 0.0, ErrorKind::kInvalidArgument,
            "portfolio_return: non-positive price");
    r += weights[j] * (closes_now[j] / closes_prev[j] - 1.0);
  }
  return r;
}

double esg_score(std::span<const double> weights, std::span<const double> esg) {
  require(weights.size() == esg.size(), ErrorKind::kInvalidArgument, "esg_score: length mismatch");
  require(!esg.empty(), ErrorKind::kInvalidArgument, "esg_score: empty score vector");
  double phi = 0.0;
  for (std::size_t i = 0; i < esg.size(); ++i) phi += weights[i] * esg[i];
  auto [lo, hi] = std::minmax_element(esg.begin(), esg.end());
  return std::clamp(phi, *lo, *hi);
}

double index_esg(std::span<const double> esg) {
  require(!esg.empty(), ErrorKind::kInvalidArgument, "index_esg: empty score vector");
  return esg_score(equal_weights(esg.size()), esg);
}

double regulate(double raw_return, double phi, double psi, double lambda) {
  constexpr double kMax = EnvConfig::kEsgMax;
  require(std::isfinite(raw_return), ErrorKind::kNumeric, "regulate: non-finite return");
  require(phi >= 0.0 && phi <= kMax && psi >= 0.0 && psi <= kMax, ErrorKind::kInvalidArgument,
          "regulate: phi and psi must lie in [0, 10]");
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "regulate: lambda must be >= 0");
  if (phi > psi) {
    // phi <= 10 and phi > psi, so the denominator is positive.
    require(kMax - psi > 0.0, ErrorKind::kNumeric, "regulate: grant branch with psi = 10");
    return raw_return + lambda * std::abs(raw_return) * (phi - psi) / (kMax - psi);
  }
  if (phi < psi) {
    require(psi > 0.0, ErrorKind::kNumeric, "regulate: tax branch with psi = 0");
    return raw_return - lambda * std::abs(raw_return) * (psi - phi) / psi;
  }
  return raw_return;
}

std::vector<double> EpisodeResult::value_returns() const {
  std::vector<double> out(values.size());
  double prev = 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] / prev - 1.0;
    prev = values[i];
  }
  return out;
}

double EpisodeResult::mean_phi() const {
  if (phi.empty()) return 0.0;
  return std::accumulate(phi.begin(), phi.end(), 0.0) / static_cast<double>(phi.size());
}

std::string EpisodeResult::trace_csv() const {
  std::string out = "day,date,raw_return,regulated_return,phi,psi,turnover,cost,value\n";
  for (std::size_t i = 0; i < steps(); ++i) {
    out += std::to_string(i + 1) + "," + dates[i].to_string() + "," + fmt(raw_returns[i]) + "," +
           fmt(regulated_returns[i]) + "," + fmt(phi[i]) + "," + fmt(psi[i]) + "," + fmt(turnover[i]) +
           "," + fmt(cost[i]) + "," + fmt(values[i]) + "\n";
  }
  return out;
}

std::string EpisodeResult::weights_csv() const {
  std::string out = "date";
  for (const auto& t : tickers) out += "," + t;
  out += "\n";
  for (std::size_t i = 0; i < steps(); ++i) {
    out += dates[i].to_string();
    for (double w : weights[i]) out += "," + fmt(w);
    out += "\n";
  }
  return out;
}

std::string EpisodeResult::equity_csv() const {
  std::string out = "date,value\n" + start_date.to_string() + ",1\n";
  for (std::size_t i = 0; i < steps(); ++i) out += dates[i].to_string() + "," + fmt(values[i]) + "\n";
  return out;
}

EpisodeResult EpisodeResult::from_trace_csv(std::string_view text) {
  EpisodeResult r;
  std::size_t pos = 0, lineno = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (lineno == 1) {
      require(line == "day,date,raw_return,regulated_return,phi,psi,turnover,cost,value", ErrorKind::kParse,
              "episode trace: unexpected header");
      continue;
    }
    std::vector<std::string> f;
    std::size_t p = 0;
    while (true) {
      auto c = line.find(',', p);
      f.emplace_back(line.substr(p, c == line.npos ? line.npos : c - p));
      if (c == line.npos) break;
      p = c + 1;
    }
    require(f.size() == 9, ErrorKind::kParse, "episode trace line " + std::to_string(lineno) + ": expected 9 fields");
    try {
      r.dates.push_back(Date::parse(f[1]));
      r.raw_returns.push_back(std::stod(f[2]));
      r.regulated_returns.push_back(std::stod(f[3]));
      r.phi.push_back(std::stod(f[4]));
      r.psi.push_back(std::stod(f[5]));
      r.turnover.push_back(std::stod(f[6]));
      r.cost.push_back(std::stod(f[7]));
      r.values.push_back(std::stod(f[8]));
    } catch (const std::logic_error&) {
      fail(ErrorKind::kParse, "episode trace line " + std::to_string(lineno) + ": bad number");
    }
  }
  return r;
}

PortfolioEnv::PortfolioEnv(std::shared_ptr<const FeaturePanel> panel, std::size_t first_day,
                           std::size_t last_day, EnvConfig cfg, std::optional<ObsStats> stats)
    : panel_(std::move(panel)), first_day_(first_day), last_day_(last_day), cfg_(cfg), shaping_(regulate) {
  require(panel_ != nullptr, ErrorKind::kInvalidArgument, "environment needs a feature panel");
  cfg_.validate();
  const auto& ds = panel_->dataset();
  require(first_day_ >= panel_->usable_start(), ErrorKind::kValidation,
          "episode starts inside the indicator warm-up");
  require(last_day_ < ds.num_days(), ErrorKind::kValidation, "episode end beyond dataset");
  require(last_day_ >= first_day_ + 1, ErrorKind::kValidation,
          "episode needs at least 2 usable days, got " +
              std::to_string(last_day_ >= first_day_ ? last_day_ - first_day_ + 1 : 0));

  const std::size_t A = ds.num_assets();
  market_dim_ = A * (kOhlcvFeatures + panel_->num_features() + (cfg_.esg_in_state ? kEsgFeatures : 0));
  obs_dim_ = market_dim_ + (cfg_.include_weights_in_obs ? A : 0);

  if (stats) {
    require(stats->mean.size() == market_dim_ && stats->stddev.size() == market_dim_,
            ErrorKind::kValidation, "observation statistics do not match observation layout");
    stats_ = std::move(*stats);
  } else if (cfg_.normalize_obs) {
    std::vector<double> sum(market_dim_, 0.0), sq(market_dim_, 0.0);
    const double n = static_cast<double>(last_day_ - first_day_ + 1);
    for (std::size_t d = first_day_; d <= last_day_; ++d) {
      auto x = raw_observation(d);
      for (std::size_t k = 0; k < market_dim_; ++k) sum[k] += x[k];
    }
    stats_.mean.resize(market_dim_);
    for (std::size_t k = 0; k < market_dim_; ++k) stats_.mean[k] = sum[k] / n;
    for (std::size_t d = first_day_; d <= last_day_; ++d) {
      auto x = raw_observation(d);
      for (std::size_t k = 0; k < market_dim_; ++k) sq[k] += (x[k] - stats_.mean[k]) * (x[k] - stats_.mean[k]);
    }
    stats_.stddev.resize(market_dim_);
    for (std::size_t k = 0; k < market_dim_; ++k) {
      const double sd = std::sqrt(sq[k] / n);
      stats_.stddev[k] = sd > 1e-12 * std::max(1.0, std::abs(stats_.mean[k])) ? sd : 1.0;
    }
  }
  state_ = PortfolioState{first_day_, equal_weights(A), 1.0};
}

std::vector<double> PortfolioEnv::esg_scores(std::size_t day) const {
  const auto& ds = panel_->dataset();
  std::vector<double> out(ds.num_assets());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = esg_value(ds.esg(day, a), cfg_.esg_field);
  return out;
}

std::vector<double> PortfolioEnv::closes(std::size_t day) const {
  const auto& ds = panel_->dataset();
  std::vector<double> out(ds.num_assets());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = ds.bar(day, a).close;
  return out;
}

std::vector<double> PortfolioEnv::raw_observation(std::size_t day) const {
  const auto& ds = panel_->dataset();
  std::vector<double> x;
  x.reserve(market_dim_);
  for (std::size_t a = 0; a < ds.num_assets(); ++a) {
    const auto& b = ds.bar(day, a);
    x.insert(x.end(), {b.open, b.high, b.low, b.close, b.volume});
    auto f = panel_->row(day, a);
    x.insert(x.end(), f.begin(), f.end());
    if (cfg_.esg_in_state) {
      const auto& e = ds.esg(day, a);
      x.insert(x.end(), {e.e, e.s, e.g, e.mean});
    }
  }
  return x;
}

std::vector<double> PortfolioEnv::observe() const {
  std::vector<double> x = raw_observation(state_.day_index);
  if (!stats_.mean.empty()) {
    for (std::size_t k = 0; k < market_dim_; ++k) {
      x[k] = (x[k] - stats_.mean[k]) / stats_.stddev[k];
      if (cfg_.obs_clip > 0.0) x[k] = std::clamp(x[k], -cfg_.obs_clip, cfg_.obs_clip);
    }
  }
  if (cfg_.include_weights_in_obs) x.insert(x.end(), state_.weights.begin(), state_.weights.end());
  for (double v : x) require(std::isfinite(v), ErrorKind::kNumeric, "non-finite observation entry");
  return x;
}

std::vector<double> PortfolioEnv::reset(std::uint64_t /*seed*/) {
  // Deterministic replay: the seed does not influence the episode.
  state_ = PortfolioState{first_day_, equal_weights(action_dim()), 1.0};
  started_ = true;
  return observe();
}

StepOutcome PortfolioEnv::step(std::span<const double> action) {
  require(started_, ErrorKind::kState, "step before reset");
  require(!done(), ErrorKind::kState, "step after episode end");
  require(action.size() == action_dim(), ErrorKind::kInvalidArgument,
          "action has " + std::to_string(action.size()) + " components, expected " +
              std::to_string(action_dim()));
  std::vector<double> w = action_to_weights(action);

  StepInfo info;
  for (std::size_t i = 0; i < w.size(); ++i) info.turnover += std::abs(w[i] - state_.weights[i]);
  info.cost = cfg_.transaction_cost * info.turnover;

  const std::size_t t = state_.day_index + 1;
  info.raw_return = portfolio_return(w, closes(t), closes(t - 1));
  const auto esg = esg_scores(t);
  info.phi = esg_score(w, esg);
  info.psi = index_esg(esg);
  info.regulated_return = shaping_(info.raw_return, info.phi, info.psi, cfg_.lambda);

  StepOutcome out;
  out.reward = (cfg_.regulate ? info.regulated_return : info.raw_return) - info.cost;
  const double growth =
      (cfg_.regulate && cfg_.regulation_affects_value ? info.regulated_return : info.raw_return) - info.cost;
  require(std::isfinite(out.reward), ErrorKind::kNumeric, "non-finite reward");
  require(1.0 + growth > 0.0, ErrorKind::kNumeric, "portfolio value would become non-positive");
  state_.portfolio_value *= 1.0 + growth;
  state_.weights = std::move(w);
  state_.day_index = t;
  out.info = info;
  out.done = done();
  out.observation = observe();
  return out;
}

std::uint64_t PortfolioEnv::fingerprint() const {
  std::string key = cfg_.canonical() + "|features=";
  for (const auto& n : panel_->feature_names()) key += n + ",";
  const auto& ic = panel_->config();
  key += "|macd=" + std::to_string(ic.macd_fast) + "/" + std::to_string(ic.macd_slow) +
         "|boll=" + std::to_string(ic.boll_window) + "/" + fmt(ic.boll_k) +
         "|rsi=" + std::to_string(ic.rsi_window) + "|cci=" + std::to_string(ic.cci_window) +
         "|dx=" + std::to_string(ic.dx_window) + "|tickers=";
  for (const auto& t : panel_->dataset().tickers()) key += t + ",";
  key += "|obs_dim=" + std::to_string(obs_dim_);
  return fnv1a(key);
}

EpisodeResult run_episode(PortfolioEnv& env, const PolicyFn& policy, std::uint64_t seed) {
  EpisodeResult r;
  r.tickers = env.panel().dataset().tickers();
  r.start_date = env.panel().dataset().calendar()[env.first_day()];
  auto obs = env.reset(seed);
  while (!env.done()) {
    auto action = policy(obs);
    auto out = env.step(action);
    r.dates.push_back(env.panel().dataset().calendar()[env.state().day_index]);
    r.raw_returns.push_back(out.info.raw_return);
    r.regulated_returns.push_back(out.info.regulated_return);
    r.rewards.push_back(out.reward);
    r.phi.push_back(out.info.phi);
    r.psi.push_back(out.info.psi);
    r.turnover.push_back(out.info.turnover);
    r.cost.push_back(out.info.cost);
    r.values.push_back(env.state().portfolio_value);
    r.weights.push_back(env.state().weights);
    obs = std::move(out.observation);
  }
  return r;
}

}  // namespace esgrl

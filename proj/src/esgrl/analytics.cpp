#include "esgrl/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "esgrl/error.hpp"

namespace esgrl {
namespace {

constexpr double kRidge = 1e-8;
constexpr double kObjectiveTolerance = 1e-10;
// Standard normal quantile at 0.05.
constexpr double kZ05 = -1.6448536269514722;

struct MetricName {
  const char* key;
  const char* label;
};

constexpr std::array<MetricName, kMetricCount> kNames{{
    {"annual_return", "Annual return"},
    {"cumulative_return", "Cumulative returns"},
    {"annual_volatility", "Annual volatility"},
    {"sharpe", "Sharpe ratio"},
    {"calmar", "Calmar ratio"},
    {"omega", "Omega ratio"},
    {"sortino", "Sortino ratio"},
    {"stability", "Stability"},
    {"max_drawdown", "Max drawdown"},
    {"daily_var", "Daily value at risk"},
}};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double quad_form(std::span<const double> q, std::span<const double> w, std::size_t n) {
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += q[i * n + j] * w[j];
    f += w[i] * row;
  }
  return f;
}

std::vector<double> gradient(std::span<const double> q, std::span<const double> w, std::size_t n) {
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[i] += 2.0 * q[i * n + j] * w[j];
  }
  return g;
}

// Frank-Wolfe duality gap: an upper bound on f(w) - min f over the simplex.
double fw_gap(std::span<const double> g, std::span<const double> w) {
  double dot = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) dot += g[i] * w[i];
  return dot - *std::min_element(g.begin(), g.end());
}

// Exact minimizer on the support of `w` (KKT system of the equality-
// constrained problem). Empty when the system is singular or the result
// leaves the simplex.
std::vector<double> polish(std::span<const double> q, std::span<const double> w, std::size_t n) {
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i)
    if (w[i] > 0.0) support.push_back(i);
  const std::size_t k = support.size();
  // Solve Q_SS x = 1 by Gaussian elimination with partial pivoting.
  std::vector<double> a(k * (k + 1));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) a[r * (k + 1) + c] = q[support[r] * n + support[c]];
    a[r * (k + 1) + k] = 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r * (k + 1) + c]) > std::abs(a[piv * (k + 1) + c])) piv = r;
    if (std::abs(a[piv * (k + 1) + c]) < 1e-300) return {};
    for (std::size_t j = 0; j <= k; ++j) std::swap(a[c * (k + 1) + j], a[piv * (k + 1) + j]);
    for (std::size_t r = c + 1; r < k; ++r) {
      const double f = a[r * (k + 1) + c] / a[c * (k + 1) + c];
      for (std::size_t j = c; j <= k; ++j) a[r * (k + 1) + j] -= f * a[c * (k + 1) + j];
    }
  }
  std::vector<double> x(k);
  for (std::size_t r = k; r-- > 0;) {
    double v = a[r * (k + 1) + k];
    for (std::size_t j = r + 1; j < k; ++j) v -= a[r * (k + 1) + j] * x[j];
    x[r] = v / a[r * (k + 1) + r];
  }
  double total = 0.0;
  for (double v : x) total += v;
  if (!(total > 0.0)) return {};
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    if (!(x[r] >= 0.0)) return {};
    out[support[r]] = x[r] / total;
  }
  return out;
}

}  // namespace

const char* metric_key(Metric m) { return kNames[static_cast<std::size_t>(m)].key; }
const char* metric_label(Metric m) { return kNames[static_cast<std::size_t>(m)].label; }

std::optional<Metric> metric_from_key(std::string_view key) {
  for (auto m : kAllMetrics)
    if (key == metric_key(m)) return m;
  return std::nullopt;
}

std::vector<std::string> MetricsReport::degenerate_keys() const {
  std::vector<std::string> out;
  for (auto m : kAllMetrics)
    if (degenerate(m)) out.emplace_back(metric_key(m));
  return out;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  for (auto m : kAllMetrics) {
    if ((*this)[m]) j[metric_key(m)] = *(*this)[m];
    else j[metric_key(m)] = nullptr;
  }
  j["degenerate"] = degenerate_keys();
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  std::string out;
  for (auto m : kAllMetrics) out += std::string(out.empty() ? "" : ",") + metric_key(m);
  return out;
}

std::string MetricsReport::csv_row() const {
  std::string out;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (i) out += ",";
    if (values_[i]) out += fmt(*values_[i]);
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::kInvalidArgument, "quantile of an empty series");
  require(q >= 0.0 && q <= 1.0, ErrorKind::kInvalidArgument, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

MetricsReport compute_metrics(std::span<const double> r, const MetricsOptions& opts) {
  require(r.size() >= 2, ErrorKind::kInvalidArgument, "metrics need at least 2 returns");
  for (double x : r) {
    require(std::isfinite(x) && x > -1.0, ErrorKind::kInvalidArgument, "returns must be finite and > -1");
  }
  require(opts.periods_per_year > 0.0, ErrorKind::kInvalidArgument, "periods_per_year must be > 0");
  const double n = static_cast<double>(r.size());
  const double ann = opts.periods_per_year;
  MetricsReport rep;

  double growth = 1.0, peak = 1.0, mdd = 0.0;
  for (double x : r) {
    growth *= 1.0 + x;
    peak = std::max(peak, growth);
    mdd = std::min(mdd, growth / peak - 1.0);
  }
  const double cumulative = growth - 1.0;
  rep[Metric::kCumulativeReturn] = cumulative;
  const double annual = std::pow(growth, ann / n) - 1.0;
  rep[Metric::kAnnualReturn] = annual;
  rep[Metric::kMaxDrawdown] = mdd;
  if (mdd < 0.0) rep[Metric::kCalmar] = annual / std::abs(mdd);

  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  const bool flat = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
  double ss = 0.0;
  if (!flat) {
    for (double x : r) ss += (x - mean) * (x - mean);
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  rep[Metric::kAnnualVolatility] = sd * std::sqrt(ann);
  if (sd > 0.0) rep[Metric::kSharpe] = mean / sd * std::sqrt(ann);

  double down_sq = 0.0, gains = 0.0, losses = 0.0;
  for (double x : r) {
    if (x < 0.0) down_sq += x * x;
    gains += std::max(x, 0.0);
    losses += std::max(-x, 0.0);
  }
  const double downside = std::sqrt(down_sq / n);
  if (downside > 0.0) rep[Metric::kSortino] = mean / downside * std::sqrt(ann);
  if (losses > 0.0) rep[Metric::kOmega] = gains / losses;

  // R^2 of cumulative log-equity against time.
  std::vector<double> y(r.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) y[t] = acc += std::log1p(r[t]);
  const double x_mean = (n - 1.0) / 2.0;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double dx = static_cast<double>(t) - x_mean, dy = y[t] - y_mean;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (syy > 0.0) rep[Metric::kStability] = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);

  if (opts.var_method == VarMethod::kEmpirical) {
    rep[Metric::kDailyVar] = empirical_quantile({r.begin(), r.end()}, opts.var_cutoff);
  } else {
    require(opts.var_cutoff == 0.05, ErrorKind::kInvalidArgument, "gaussian VaR supports cutoff 0.05 only");
    rep[Metric::kDailyVar] = mean + kZ05 * sd;
  }
  return rep;
}

std::vector<double> sample_covariance(std::span<const double> x, std::size_t rows, std::size_t cols) {
  require(rows >= 2 && cols >= 1, ErrorKind::kInvalidArgument, "covariance needs >= 2 rows and >= 1 column");
  require(x.size() == rows * cols, ErrorKind::kInvalidArgument, "covariance: matrix size mismatch");
  std::vector<double> mean(cols, 0.0);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t j = 0; j < cols; ++j) mean[j] += x[t * cols + j];
  for (auto& m : mean) m /= static_cast<double>(rows);
  std::vector<double> cov(cols * cols, 0.0);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < cols; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        cov[i * cols + j] += (x[t * cols + i] - mean[i]) * (x[t * cols + j] - mean[j]);
  for (auto& c : cov) c /= static_cast<double>(rows - 1);
  return cov;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  require(!v.empty(), ErrorKind::kInvalidArgument, "projection of an empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

MinVarianceResult min_variance_from_covariance(std::span<const double> cov, std::size_t n,
                                               std::size_t max_iterations) {
  require(n >= 1 && cov.size() == n * n, ErrorKind::kInvalidArgument, "covariance must be n x n");
  for (double c : cov) require(std::isfinite(c), ErrorKind::kNumeric, "non-finite covariance entry");

  // Trace-normalized problem; the minimizer is unchanged.
  std::vector<double> q(cov.begin(), cov.end());
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] += kRidge;
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += q[i * n + i];
  const double scale = trace / static_cast<double>(n);
  for (auto& x : q) x /= scale;

  double lipschitz = 0.0;  // 2 * max absolute row sum >= 2 * lambda_max
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(q[i * n + j]);
    lipschitz = std::max(lipschitz, 2.0 * row);
  }

  std::vector<double> w = equal_weights(n), y = w;
  double f = quad_form(q, w, n);
  double momentum = 1.0;
  double gap = 0.0;
  bool at_w = true;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    const auto gy = gradient(q, y, n);
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = y[i] - gy[i] / lipschitz;
    auto w_next = project_to_simplex(step);
    const double f_next = quad_form(q, w_next, n);
    if (f_next > f && !at_w) {
      // Adaptive restart; a plain step from w is accepted even when
      // rounding makes it look uphill.
      momentum = 1.0;
      y = w;
      at_w = true;
      continue;
    }
    at_w = momentum == 1.0;
    const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    for (std::size_t i = 0; i < n; ++i)
      y[i] = w_next[i] + (momentum - 1.0) / momentum_next * (w_next[i] - w[i]);
    momentum = momentum_next;
    w = std::move(w_next);
    f = f_next;
    gap = fw_gap(gradient(q, w, n), w);
    if (gap <= kObjectiveTolerance) return {w, quad_form(cov, w, n), it};
    if (gap < 1e-6 && it % 50 == 0) {
      auto exact = polish(q, w, n);
      if (!exact.empty() && quad_form(q, exact, n) <= f) {
        const double exact_gap = fw_gap(gradient(q, exact, n), exact);
        if (exact_gap <= kObjectiveTolerance) return {exact, quad_form(cov, exact, n), it};
      }
    }
  }
  fail(ErrorKind::kConvergence, "min-variance solver did not converge in " + std::to_string(max_iterations) +
                                    " iterations (duality gap " + fmt(gap) + ")");
}

std::vector<double> min_variance_weights(std::span<const double> return_window, std::size_t rows,
                                         std::size_t cols) {
  const auto cov = sample_covariance(return_window, rows, cols);
  return min_variance_from_covariance(cov, cols).weights;
}

void BaselineSpec::validate() const {
  require(lookback >= 2, ErrorKind::kValidation, "baseline lookback must be >= 2");
  require(rebalance >= 1, ErrorKind::kValidation, "baseline rebalance must be >= 1");
}

std::string BaselineSpec::name() const { return std::string("baseline/") + to_string(kind); }

const char* to_string(BaselineKind kind) {
  return kind == BaselineKind::kMinVariance ? "min_variance" : "stratified";
}

BaselineKind baseline_kind_from_string(std::string_view name) {
  if (name == "min_variance") return BaselineKind::kMinVariance;
  if (name == "stratified") return BaselineKind::kStratified;
  fail(ErrorKind::kValidation, "unknown baseline kind '" + std::string(name) + "' (min_variance|stratified)");
}

EpisodeResult run_baseline(const AlignedDataset& ds, std::size_t first_day, std::size_t last_day,
                           const BaselineSpec& spec, const EnvConfig& env_cfg) {
  spec.validate();
  env_cfg.validate();
  require(first_day < last_day && last_day < ds.num_days(), ErrorKind::kValidation,
          "baseline needs at least 2 days inside the dataset");
  const std::size_t A = ds.num_assets();
  if (spec.kind == BaselineKind::kMinVariance) {
    require(first_day >= spec.lookback, ErrorKind::kValidation,
            "min-variance baseline needs " + std::to_string(spec.lookback) +
                " days of history before the trade start, only " + std::to_string(first_day) + " available");
  }
  auto closes = [&](std::size_t d) {
    std::vector<double> c(A);
    for (std::size_t a = 0; a < A; ++a) c[a] = ds.bar(d, a).close;
    return c;
  };

  EpisodeResult r;
  r.tickers = ds.tickers();
  r.start_date = ds.calendar()[first_day];
  std::vector<double> prev_w = equal_weights(A), target = equal_weights(A);
  double value = 1.0;
  for (std::size_t d = first_day; d < last_day; ++d) {
    const std::size_t k = d - first_day;
    if (spec.kind == BaselineKind::kMinVariance && k % spec.rebalance == 0) {
      std::vector<double> window;
      window.reserve(spec.lookback * A);
      for (std::size_t tau = d + 1 - spec.lookback; tau <= d; ++tau) {
        const auto now = closes(tau), before = closes(tau - 1);
        for (std::size_t a = 0; a < A; ++a) window.push_back(now[a] / before[a] - 1.0);
      }
      target = min_variance_weights(window, spec.lookback, A);
    }
    double turnover = 0.0;
    for (std::size_t a = 0; a < A; ++a) turnover += std::abs(target[a] - prev_w[a]);
    const double cost = env_cfg.transaction_cost * turnover;
    const double raw = portfolio_return(target, closes(d + 1), closes(d));
    std::vector<double> esg(A);
    for (std::size_t a = 0; a < A; ++a) esg[a] = esg_value(ds.esg(d + 1, a), env_cfg.esg_field);
    const double phi = esg_score(target, esg);
    const double psi = index_esg(esg);
    const double shaped = regulate(raw, phi, psi, env_cfg.lambda);
    value *= 1.0 + (env_cfg.regulate && env_cfg.regulation_affects_value ? shaped : raw) - cost;

    r.dates.push_back(ds.calendar()[d + 1]);
    r.raw_returns.push_back(raw);
    r.regulated_returns.push_back(shaped);
    r.rewards.push_back((env_cfg.regulate ? shaped : raw) - cost);
    r.phi.push_back(phi);
    r.psi.push_back(psi);
    r.turnover.push_back(turnover);
    r.cost.push_back(cost);
    r.values.push_back(value);
    r.weights.push_back(target);
    prev_w = target;
  }
  return r;
}

}  // namespace esgrl

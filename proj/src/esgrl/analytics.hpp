#ifndef ESGRL_ANALYTICS_HPP_
#define ESGRL_ANALYTICS_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esgrl/env.hpp"
#include "esgrl/marketdata.hpp"

namespace esgrl {

enum class Metric {
  kAnnualReturn,
  kCumulativeReturn,
  kAnnualVolatility,
  kSharpe,
  kCalmar,
  kOmega,
  kSortino,
  kStability,
  kMaxDrawdown,
  kDailyVar,
};
inline constexpr std::size_t kMetricCount = 10;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::kAnnualReturn, Metric::kCumulativeReturn, Metric::kAnnualVolatility, Metric::kSharpe,
    Metric::kCalmar,       Metric::kOmega,            Metric::kSortino,          Metric::kStability,
    Metric::kMaxDrawdown,  Metric::kDailyVar};

// snake_case key, e.g. "annual_return".
const char* metric_key(Metric m);
// Row label for text tables, e.g. "Annual return".
const char* metric_label(Metric m);
std::optional<Metric> metric_from_key(std::string_view key);

enum class VarMethod { kEmpirical, kGaussian };

struct MetricsOptions {
  double periods_per_year = 252.0;
  double var_cutoff = 0.05;
  VarMethod var_method = VarMethod::kEmpirical;
};

// A metric without a value (zero denominator) is degenerate, never NaN.
class MetricsReport {
 public:
  const std::optional<double>& operator[](Metric m) const { return values_[static_cast<std::size_t>(m)]; }
  std::optional<double>& operator[](Metric m) { return values_[static_cast<std::size_t>(m)]; }

  bool degenerate(Metric m) const { return !(*this)[m].has_value(); }
  std::vector<std::string> degenerate_keys() const;

  // Ten metric keys (null when degenerate) plus `degenerate: [...]`.
  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;

 private:
  std::array<std::optional<double>, kMetricCount> values_{};
};

// Requires >= 2 returns, all > -1.
MetricsReport compute_metrics(std::span<const double> daily_returns, const MetricsOptions& opts = {});

// Linear-interpolated empirical quantile (order statistics at q*(n-1)).
double empirical_quantile(std::vector<double> values, double q);

// Sample covariance (T-1 denominator) of a row-major T x A matrix.
std::vector<double> sample_covariance(std::span<const double> returns, std::size_t rows, std::size_t cols);

struct MinVarianceResult {
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t iterations = 0;
};

// argmin w' (Sigma + 1e-8 I) w on the probability simplex, by accelerated
// projected gradient. Throws kConvergence with the residual on failure.
MinVarianceResult min_variance_from_covariance(std::span<const double> cov, std::size_t n,
                                               std::size_t max_iterations = 200000);

// Long-only minimum variance weights from a T x A return window.
std::vector<double> min_variance_weights(std::span<const double> return_window, std::size_t rows,
                                         std::size_t cols);

// Euclidean projection onto {w >= 0, sum w = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

enum class BaselineKind { kMinVariance, kStratified };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kStratified;
  std::size_t lookback = 60;  // days of returns for the covariance
  std::size_t rebalance = 21;  // days between re-solves

  void validate() const;
  std::string name() const;
};

const char* to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(std::string_view name);

// Replays days [first_day, last_day] of `ds` with the env's return and
// ESG accounting. Min-variance draws its lookback from days before
// first_day.
EpisodeResult run_baseline(const AlignedDataset& ds, std::size_t first_day, std::size_t last_day,
                           const BaselineSpec& spec, const EnvConfig& env_cfg = {});

}  // namespace esgrl

#endif  // ESGRL_ANALYTICS_HPP_

#ifndef ESGRL_INDICATORS_HPP_
#define ESGRL_INDICATORS_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "esgrl/marketdata.hpp"

namespace esgrl {

enum class BollingerOutput { kUpperLower, kBandwidth };

struct IndicatorConfig {
  std::size_t macd_fast = 12;
  std::size_t macd_slow = 26;
  std::size_t macd_signal = 9;
  std::size_t boll_window = 20;
  double boll_k = 2.0;
  std::size_t rsi_window = 14;
  std::size_t cci_window = 14;
  std::size_t dx_window = 14;
  std::vector<std::size_t> sma_windows{30, 60};
  BollingerOutput boll_output = BollingerOutput::kUpperLower;

  void validate() const;
  // First day index at which every indicator is defined.
  std::size_t warmup_start() const;
  std::vector<std::string> feature_names() const;
};

// Values before `first_valid` are warm-up and hold NaN.
struct Series {
  std::vector<double> values;
  std::size_t first_valid = 0;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

Series sma(std::span<const double> x, std::size_t window);
// Exponential smoothing with multiplier 2/(n+1), seeded with the SMA of the
// first n values.
Series ema(std::span<const double> x, std::size_t n);
// EMA(fast) - EMA(slow).
Series macd(std::span<const double> closes, const IndicatorConfig& cfg);
// EMA(macd_signal) of the MACD line.
Series macd_signal(std::span<const double> closes, const IndicatorConfig& cfg);

struct BollingerBands {
  Series middle;
  Series upper;
  Series lower;
};
// Population standard deviation over the window.
BollingerBands bollinger(std::span<const double> closes, std::size_t window, double k);

// Wilder-smoothed RSI. Zero average loss -> 100, zero average gain -> 0,
// both zero -> 50.
Series rsi(std::span<const double> closes, std::size_t window);

// (TP - SMA(TP)) / (0.015 * mean deviation); zero deviation -> 0.
Series cci(std::span<const double> high, std::span<const double> low,
           std::span<const double> close, std::size_t window);

// Wilder directional movement index; both DI zero -> 0.
Series dx(std::span<const double> high, std::span<const double> low,
          std::span<const double> close, std::size_t window);

// Per (day, asset) technical features over an aligned dataset.
class FeaturePanel {
 public:
  FeaturePanel(std::shared_ptr<const AlignedDataset> data, IndicatorConfig cfg);

  const AlignedDataset& dataset() const { return *data_; }
  std::shared_ptr<const AlignedDataset> dataset_ptr() const { return data_; }
  const IndicatorConfig& config() const { return cfg_; }
  std::size_t usable_start() const { return usable_start_; }
  std::size_t num_features() const { return names_.size(); }
  const std::vector<std::string>& feature_names() const { return names_; }

  std::span<const double> row(std::size_t day, std::size_t asset) const {
    const std::size_t F = names_.size();
    return {values_.data() + (day * data_->num_assets() + asset) * F, F};
  }

  // `date,ticker,<features...>` for every usable day.
  std::string to_csv() const;

 private:
  std::shared_ptr<const AlignedDataset> data_;
  IndicatorConfig cfg_;
  std::size_t usable_start_ = 0;
  std::vector<std::string> names_;
  std::vector<double> values_;  // [day][asset][feature]
};

std::shared_ptr<const FeaturePanel> compute_features(std::shared_ptr<const AlignedDataset> data,
                                                     const IndicatorConfig& cfg);

}  // namespace esgrl

#endif  // ESGRL_INDICATORS_HPP_

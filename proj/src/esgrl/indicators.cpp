#include "esgrl/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "esgrl/error.hpp"

namespace esgrl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCciConstant = 0.015;

void check_window(std::size_t window, std::size_t length, std::size_t needed, const char* name) {
  require(window >= 1, ErrorKind::kInvalidArgument, std::string(name) + ": window must be >= 1");
  if (length < needed) {
    fail(ErrorKind::kInvalidArgument, std::string(name) + ": series length " + std::to_string(length) +
                                          " shorter than required " + std::to_string(needed));
  }
}

Series warm(std::size_t n, std::size_t first_valid) {
  return Series{std::vector<double>(n, kNaN), first_valid};
}

}  // namespace

void IndicatorConfig::validate() const {
  for (auto w : {macd_fast, macd_slow, macd_signal, boll_window, rsi_window, cci_window, dx_window}) {
    require(w >= 1, ErrorKind::kValidation, "indicator windows must be >= 1");
  }
  require(macd_fast < macd_slow, ErrorKind::kValidation, "macd_fast must be < macd_slow");
  require(std::isfinite(boll_k) && boll_k >= 0.0, ErrorKind::kValidation, "boll_k must be finite and >= 0");
  for (auto w : sma_windows) require(w >= 1, ErrorKind::kValidation, "sma windows must be >= 1");
}

std::size_t IndicatorConfig::warmup_start() const {
  std::size_t need = std::max({macd_slow, boll_window, rsi_window + 1, cci_window, dx_window + 1});
  for (auto w : sma_windows) need = std::max(need, w);
  return need - 1;
}

std::vector<std::string> IndicatorConfig::feature_names() const {
  std::vector<std::string> names{"macd"};
  if (boll_output == BollingerOutput::kUpperLower) {
    names.push_back("boll_upper");
    names.push_back("boll_lower");
  } else {
    names.push_back("boll_width");
  }
  names.push_back("rsi");
  names.push_back("cci");
  names.push_back("dx");
  for (auto w : sma_windows) names.push_back("sma_" + std::to_string(w));
  return names;
}

Series sma(std::span<const double> x, std::size_t window) {
  check_window(window, x.size(), window, "sma");
  Series out = warm(x.size(), window - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= window) sum -= x[i - window];
    if (i + 1 >= window) out.values[i] = sum / static_cast<double>(window);
  }
  return out;
}

Series ema(std::span<const double> x, std::size_t n) {
  check_window(n, x.size(), n, "ema");
  Series out = warm(x.size(), n - 1);
  const double alpha = 2.0 / (static_cast<double>(n) + 1.0);
  double seed = 0.0;
  for (std::size_t i = 0; i < n; ++i) seed += x[i];
  double value = seed / static_cast<double>(n);
  out.values[n - 1] = value;
  for (std::size_t i = n; i < x.size(); ++i) {
    value = alpha * x[i] + (1.0 - alpha) * value;
    out.values[i] = value;
  }
  return out;
}

Series macd(std::span<const double> closes, const IndicatorConfig& cfg) {
  require(cfg.macd_fast < cfg.macd_slow, ErrorKind::kInvalidArgument, "macd: fast window must be < slow");
  check_window(cfg.macd_slow, closes.size(), cfg.macd_slow, "macd");
  const Series fast = ema(closes, cfg.macd_fast);
  const Series slow = ema(closes, cfg.macd_slow);
  Series out = warm(closes.size(), cfg.macd_slow - 1);
  for (std::size_t i = out.first_valid; i < closes.size(); ++i) out.values[i] = fast[i] - slow[i];
  return out;
}

Series macd_signal(std::span<const double> closes, const IndicatorConfig& cfg) {
  const Series line = macd(closes, cfg);
  const std::size_t start = line.first_valid;
  check_window(cfg.macd_signal, closes.size() - start, cfg.macd_signal, "macd_signal");
  const Series smoothed =
      ema(std::span<const double>(line.values).subspan(start), cfg.macd_signal);
  Series out = warm(closes.size(), start + smoothed.first_valid);
  std::copy(smoothed.values.begin(), smoothed.values.end(), out.values.begin() + start);
  return out;
}

BollingerBands bollinger(std::span<const double> closes, std::size_t window, double k) {
  check_window(window, closes.size(), window, "bollinger");
  BollingerBands out{warm(closes.size(), window - 1), warm(closes.size(), window - 1),
                     warm(closes.size(), window - 1)};
  const double n = static_cast<double>(window);
  for (std::size_t i = window - 1; i < closes.size(); ++i) {
    double mean = 0.0;
    for (std::size_t j = i + 1 - window; j <= i; ++j) mean += closes[j];
    mean /= n;
    double var = 0.0;
    for (std::size_t j = i + 1 - window; j <= i; ++j) var += (closes[j] - mean) * (closes[j] - mean);
    const double sd = std::sqrt(var / n);
    out.middle.values[i] = mean;
    out.upper.values[i] = mean + k * sd;
    out.lower.values[i] = mean - k * sd;
  }
  return out;
}

Series rsi(std::span<const double> closes, std::size_t window) {
  check_window(window, closes.size(), window + 1, "rsi");
  Series out = warm(closes.size(), window);
  const double w = static_cast<double>(window);
  double avg_gain = 0.0, avg_loss = 0.0;
  auto value = [](double gain, double loss) {
    if (loss == 0.0) return gain == 0.0 ? 50.0 : 100.0;
    if (gain == 0.0) return 0.0;
    return 100.0 - 100.0 / (1.0 + gain / loss);
  };
  for (std::size_t i = 1; i < closes.size(); ++i) {
    const double change = closes[i] - closes[i - 1];
    const double gain = change > 0 ? change : 0.0;
    const double loss = change < 0 ? -change : 0.0;
    if (i <= window) {
      avg_gain += gain;
      avg_loss += loss;
      if (i == window) {
        avg_gain /= w;
        avg_loss /= w;
        out.values[i] = value(avg_gain, avg_loss);
      }
    } else {
      avg_gain = (avg_gain * (w - 1.0) + gain) / w;
      avg_loss = (avg_loss * (w - 1.0) + loss) / w;
      out.values[i] = value(avg_gain, avg_loss);
    }
  }
  return out;
}

Series cci(std::span<const double> high, std::span<const double> low, std::span<const double> close,
           std::size_t window) {
  require(high.size() == close.size() && low.size() == close.size(), ErrorKind::kInvalidArgument,
          "cci: high/low/close lengths differ");
  check_window(window, close.size(), window, "cci");
  std::vector<double> tp(close.size());
  for (std::size_t i = 0; i < close.size(); ++i) tp[i] = (high[i] + low[i] + close[i]) / 3.0;
  Series out = warm(close.size(), window - 1);
  const double n = static_cast<double>(window);
  for (std::size_t i = window - 1; i < close.size(); ++i) {
    double mean = 0.0;
    for (std::size_t j = i + 1 - window; j <= i; ++j) mean += tp[j];
    mean /= n;
    double dev = 0.0;
    for (std::size_t j = i + 1 - window; j <= i; ++j) dev += std::abs(tp[j] - mean);
    dev /= n;
    out.values[i] = dev == 0.0 ? 0.0 : (tp[i] - mean) / (kCciConstant * dev);
  }
  return out;
}

Series dx(std::span<const double> high, std::span<const double> low, std::span<const double> close,
          std::size_t window) {
  require(high.size() == close.size() && low.size() == close.size(), ErrorKind::kInvalidArgument,
          "dx: high/low/close lengths differ");
  check_window(window, close.size(), window + 1, "dx");
  Series out = warm(close.size(), window);
  const double w = static_cast<double>(window);
  double s_plus = 0.0, s_minus = 0.0, s_tr = 0.0;
  for (std::size_t i = 1; i < close.size(); ++i) {
    const double up = high[i] - high[i - 1];
    const double down = low[i - 1] - low[i];
    const double plus_dm = (up > down && up > 0.0) ? up : 0.0;
    const double minus_dm = (down > up && down > 0.0) ? down : 0.0;
    const double tr = std::max({high[i] - low[i], std::abs(high[i] - close[i - 1]),
                                std::abs(low[i] - close[i - 1])});
    if (i <= window) {
      s_plus += plus_dm;
      s_minus += minus_dm;
      s_tr += tr;
    } else {
      s_plus = s_plus - s_plus / w + plus_dm;
      s_minus = s_minus - s_minus / w + minus_dm;
      s_tr = s_tr - s_tr / w + tr;
    }
    if (i >= window) {
      const double di_plus = s_tr > 0.0 ? 100.0 * s_plus / s_tr : 0.0;
      const double di_minus = s_tr > 0.0 ? 100.0 * s_minus / s_tr : 0.0;
      const double sum = di_plus + di_minus;
      out.values[i] = sum > 0.0 ? 100.0 * std::abs(di_plus - di_minus) / sum : 0.0;
    }
  }
  return out;
}

FeaturePanel::FeaturePanel(std::shared_ptr<const AlignedDataset> data, IndicatorConfig cfg)
    : data_(std::move(data)), cfg_(std::move(cfg)) {
  require(data_ != nullptr, ErrorKind::kInvalidArgument, "feature panel needs a dataset");
  cfg_.validate();
  usable_start_ = cfg_.warmup_start();
  const std::size_t T = data_->num_days(), A = data_->num_assets();
  require(T > usable_start_, ErrorKind::kValidation,
          "dataset has " + std::to_string(T) + " days, indicator warm-up needs " +
              std::to_string(usable_start_ + 1));
  names_ = cfg_.feature_names();
  const std::size_t F = names_.size();
  values_.assign(T * A * F, 0.0);

  std::vector<double> h(T), l(T), c(T);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto& b = data_->bar(t, a);
      h[t] = b.high;
      l[t] = b.low;
      c[t] = b.close;
    }
    std::vector<Series> columns;
    columns.push_back(macd(c, cfg_));
    auto bands = bollinger(c, cfg_.boll_window, cfg_.boll_k);
    if (cfg_.boll_output == BollingerOutput::kUpperLower) {
      columns.push_back(std::move(bands.upper));
      columns.push_back(std::move(bands.lower));
    } else {
      Series width = bands.middle;
      for (std::size_t t = width.first_valid; t < T; ++t)
        width.values[t] = (bands.upper[t] - bands.lower[t]) / bands.middle[t];
      columns.push_back(std::move(width));
    }
    columns.push_back(rsi(c, cfg_.rsi_window));
    columns.push_back(cci(h, l, c, cfg_.cci_window));
    columns.push_back(dx(h, l, c, cfg_.dx_window));
    for (auto w : cfg_.sma_windows) columns.push_back(sma(c, w));

    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) values_[(t * A + a) * F + f] = columns[f].values[t];
  }
}

std::string FeaturePanel::to_csv() const {
  std::string out = "date,ticker";
  for (const auto& n : names_) out += "," + n;
  out += "\n";
  char buf[40];
  for (std::size_t t = usable_start_; t < data_->num_days(); ++t) {
    for (std::size_t a = 0; a < data_->num_assets(); ++a) {
      out += data_->calendar()[t].to_string() + "," + data_->tickers()[a];
      for (double v : row(t, a)) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

std::shared_ptr<const FeaturePanel> compute_features(std::shared_ptr<const AlignedDataset> data,
                                                     const IndicatorConfig& cfg) {
  return std::make_shared<const FeaturePanel>(std::move(data), cfg);
}

}  // namespace esgrl

#ifndef ESGRL_REFERENCE_INDICATORS_HPP_
#define ESGRL_REFERENCE_INDICATORS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "esgrl/indicators.hpp"
#include "esgrl/rng.hpp"

namespace reference {

using esgrl::Rng;
using esgrl::Series;

inline const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Direct-formula references: every value is recomputed from scratch, EMA
// and Wilder averages through their closed-form geometric weights.
inline double mean_of(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) s += x[i];
  return s / static_cast<double>(hi - lo + 1);
}

inline double smoothed_at(const std::vector<double>& x, std::size_t n, std::size_t start, double alpha, std::size_t t) {
  const double seed = mean_of(x, start + 1 - n, start);
  double v = std::pow(1.0 - alpha, static_cast<double>(t - start)) * seed;
  for (std::size_t i = start + 1; i <= t; ++i) v += alpha * std::pow(1.0 - alpha, static_cast<double>(t - i)) * x[i];
  return v;
}

inline std::vector<double> naive_sma(const std::vector<double>& x, std::size_t n) {
  std::vector<double> out(x.size(), kNaN);
  for (std::size_t t = n - 1; t < x.size(); ++t) out[t] = mean_of(x, t + 1 - n, t);
  return out;
}

inline std::vector<double> naive_ema(const std::vector<double>& x, std::size_t n) {
  std::vector<double> out(x.size(), kNaN);
  for (std::size_t t = n - 1; t < x.size(); ++t) out[t] = smoothed_at(x, n, n - 1, 2.0 / (n + 1.0), t);
  return out;
}

inline std::vector<double> naive_macd(const std::vector<double>& x, std::size_t fast, std::size_t slow) {
  auto f = naive_ema(x, fast), s = naive_ema(x, slow);
  std::vector<double> out(x.size(), kNaN);
  for (std::size_t t = slow - 1; t < x.size(); ++t) out[t] = f[t] - s[t];
  return out;
}

inline std::pair<std::vector<double>, std::vector<double>> naive_bands(const std::vector<double>& x, std::size_t n, double k) {
  std::vector<double> up(x.size(), kNaN), lo(x.size(), kNaN);
  for (std::size_t t = n - 1; t < x.size(); ++t) {
    const double m = mean_of(x, t + 1 - n, t);
    double v = 0.0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) v += (x[i] - m) * (x[i] - m);
    up[t] = m + k * std::sqrt(v / n);
    lo[t] = m - k * std::sqrt(v / n);
  }
  return {up, lo};
}

inline std::vector<double> naive_rsi(const std::vector<double>& x, std::size_t n) {
  std::vector<double> gain(x.size(), 0.0), loss(x.size(), 0.0), out(x.size(), kNaN);
  for (std::size_t i = 1; i < x.size(); ++i) {
    gain[i] = std::max(x[i] - x[i - 1], 0.0);
    loss[i] = std::max(x[i - 1] - x[i], 0.0);
  }
  for (std::size_t t = n; t < x.size(); ++t) {
    const double g = smoothed_at(gain, n, n, 1.0 / n, t), l = smoothed_at(loss, n, n, 1.0 / n, t);
    out[t] = l == 0.0 ? (g == 0.0 ? 50.0 : 100.0) : g == 0.0 ? 0.0 : 100.0 * g / (g + l);
  }
  return out;
}

inline std::vector<double> naive_cci(const std::vector<double>& h, const std::vector<double>& l,
                              const std::vector<double>& c, std::size_t n) {
  std::vector<double> tp(c.size()), out(c.size(), kNaN);
  for (std::size_t i = 0; i < c.size(); ++i) tp[i] = (h[i] + l[i] + c[i]) / 3.0;
  for (std::size_t t = n - 1; t < c.size(); ++t) {
    const double m = mean_of(tp, t + 1 - n, t);
    double md = 0.0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) md += std::abs(tp[i] - m);
    md /= n;
    out[t] = md == 0.0 ? 0.0 : (tp[t] - m) / (0.015 * md);
  }
  return out;
}

inline std::vector<double> naive_dx(const std::vector<double>& h, const std::vector<double>& l,
                             const std::vector<double>& c, std::size_t n) {
  std::vector<double> pdm(c.size(), 0.0), mdm(c.size(), 0.0), tr(c.size(), 0.0), out(c.size(), kNaN);
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double up = h[i] - h[i - 1], dn = l[i - 1] - l[i];
    pdm[i] = up > dn && up > 0 ? up : 0.0;
    mdm[i] = dn > up && dn > 0 ? dn : 0.0;
    tr[i] = std::max({h[i] - l[i], std::abs(h[i] - c[i - 1]), std::abs(l[i] - c[i - 1])});
  }
  for (std::size_t t = n; t < c.size(); ++t) {
    const double p = smoothed_at(pdm, n, n, 1.0 / n, t), m = smoothed_at(mdm, n, n, 1.0 / n, t),
                 r = smoothed_at(tr, n, n, 1.0 / n, t);
    const double dip = r > 0 ? 100 * p / r : 0.0, dim = r > 0 ? 100 * m / r : 0.0;
    out[t] = dip + dim == 0.0 ? 0.0 : 100.0 * std::abs(dip - dim) / (dip + dim);
  }
  return out;
}

inline bool agree(double a, double b, double rel = 1e-9) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// Counts positions where `got` and `want` disagree.
inline std::size_t mismatches(const Series& got, const std::vector<double>& want, double rel = 1e-9) {
  std::size_t bad = got.size() == want.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) bad += !agree(got[i], want[i], rel);
  return bad;
}

struct Bars {
  std::vector<double> h, l, c;
};

inline Bars random_bars(Rng& rng, std::size_t n) {
  Bars b;
  double p = rng.uniform(20, 200);
  for (std::size_t i = 0; i < n; ++i) {
    p *= std::exp(0.02 * rng.normal());
    const double hi = p * (1 + 0.01 * std::abs(rng.normal()));
    const double lo = p * (1 - 0.01 * std::abs(rng.normal()));
    b.c.push_back(p);
    b.h.push_back(hi);
    b.l.push_back(lo);
  }
  return b;
}

}  // namespace reference

#endif  // ESGRL_REFERENCE_INDICATORS_HPP_

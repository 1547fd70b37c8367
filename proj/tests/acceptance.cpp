// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esgrl/agents.hpp"
#include "esgrl/analytics.hpp"
#include "esgrl/harness.hpp"
#include "reference_indicators.hpp"

using namespace esgrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome shaping_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::size_t sign = 0, bound = 0, cont = 0, zero = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double r = rng.uniform(-0.2, 0.2), phi = rng.uniform(0, 10), psi = rng.uniform(0, 10),
                 lambda = rng.uniform(0, 20);
    const double R = regulate(r, phi, psi, lambda);
    if ((phi > psi && R < r) || (phi < psi && R > r)) ++sign;
    if (std::abs(R - r) > lambda * std::abs(r) * (1 + 1e-15)) ++bound;
    // The slope in phi is lambda|r| / (10 - psi) above psi and lambda|r| / psi
    // below, so the probe step shrinks with the distance to the nearer bound.
    const double step = 1e-13 * std::min(psi, 10.0 - psi);
    const double hi = regulate(r, psi + step, psi, lambda), lo = regulate(r, psi - step, psi, lambda);
    if (std::abs(hi - r) > 1e-12 || std::abs(lo - r) > 1e-12 || regulate(r, psi, psi, lambda) != r) ++cont;
    if (regulate(r, phi, psi, 0.0) != r) ++zero;
  }
  const double secs = seconds_since(t0);
  return {sign + bound + cont + zero == 0 && secs < 10.0,
          fmt("1e6 tuples: sign %zu, bound %zu, continuity %zu, lambda=0 %zu violations; %.2fs", sign, bound, cont,
              zero, secs)};
}

Outcome shaping_values() {
  const double a = regulate(0.01, 8, 6, 1), b = regulate(-0.02, 3, 6, 1);
  return {a == 0.015 && b == -0.03, fmt("regulate(0.01,8,6,1)=%.17g regulate(-0.02,3,6,1)=%.17g", a, b)};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(103);
  std::size_t coords = 0, bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{1 + rng.below(64)};
    const std::size_t hidden = trial == 0 ? 2 : rng.below(3);
    for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(trial == 0 ? 64 : 1 + rng.below(64));
    sizes.push_back(trial == 0 ? 64 : 1 + rng.below(64));
    auto net = Mlp::init(sizes, rng.next_u64());
    for (auto& p : net.mutable_params()) p += 0.1 * rng.normal();
    std::vector<double> x(sizes.front()), g(sizes.back());
    for (auto& v : x) v = rng.normal();
    for (auto& v : g) v = rng.normal();
    auto objective = [&](std::span<const double> in) {
      const auto y = net.forward(in);
      double s = 0;
      for (std::size_t k = 0; k < y.size(); ++k) s += y[k] * g[k];
      return s;
    };
    ForwardCache cache;
    net.forward(x, &cache);
    std::vector<double> gp(net.num_params(), 0.0), gx(x.size(), 0.0);
    net.accumulate_backward(cache, g, gp, gx);
    auto ok = [](double a, double b) { return std::abs(a - b) <= std::max(1e-6, 1e-4 * std::max(std::abs(a), std::abs(b))); };
    const double h = 1e-5;
    for (std::size_t i = 0; i < net.num_params(); ++i) {
      const double orig = net.params()[i];
      net.mutable_params()[i] = orig + h;
      const double fp = objective(x);
      net.mutable_params()[i] = orig - h;
      const double fm = objective(x);
      net.mutable_params()[i] = orig;
      bad += !ok(gp[i], (fp - fm) / (2 * h));
      ++coords;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      bad += !ok(gx[i], (objective(xp) - objective(xm)) / (2 * h));
      ++coords;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0, fmt("20 nets, %zu coordinates, %zu outside 1e-4 rel / 1e-6 abs; %.2fs", coords, bad, secs)};
}

Outcome indicator_oracle() {
  using namespace reference;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(104);
  IndicatorConfig cfg;
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto b = random_bars(rng, 70 + rng.below(200));
    bad += mismatches(sma(b.c, 30), naive_sma(b.c, 30));
    bad += mismatches(macd(b.c, cfg), naive_macd(b.c, 12, 26));
    auto bands = bollinger(b.c, 20, 2.0);
    auto ref = naive_bands(b.c, 20, 2.0);
    bad += mismatches(bands.upper, ref.first) + mismatches(bands.lower, ref.second);
    bad += mismatches(rsi(b.c, 14), naive_rsi(b.c, 14));
    bad += mismatches(cci(b.h, b.l, b.c, 14), naive_cci(b.h, b.l, b.c, 14));
    bad += mismatches(dx(b.h, b.l, b.c, 14), naive_dx(b.h, b.l, b.c, 14));
  }
  // Sentinels on flat and one-sided markets.
  std::size_t sentinel = 0;
  const std::vector<double> flat(40, 10.0), up{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16},
      down(up.rbegin(), up.rend());
  auto r = rsi(flat, 14), c = cci(flat, flat, flat, 14), d = dx(flat, flat, flat, 14);
  auto m = macd(flat, cfg);
  auto bb = bollinger(flat, 20, 2.0);
  for (std::size_t t = 14; t < flat.size(); ++t) sentinel += r[t] != 50.0 || d[t] != 0.0;
  for (std::size_t t = 13; t < flat.size(); ++t) sentinel += c[t] != 0.0;
  for (std::size_t t = 25; t < flat.size(); ++t) sentinel += m[t] != 0.0;
  for (std::size_t t = 19; t < flat.size(); ++t) sentinel += bb.upper[t] != 10.0 || bb.lower[t] != 10.0;
  sentinel += rsi(up, 14)[15] != 100.0;
  sentinel += rsi(down, 14)[15] != 0.0;
  const double secs = seconds_since(t0);
  return {bad + sentinel == 0 && secs < 10.0,
          fmt("100 series: %zu mismatches at 1e-9, %zu sentinel failures; %.2fs", bad, sentinel, secs)};
}

Outcome metrics_oracle(const std::string& fixtures) {
  const auto oracle = nlohmann::json::parse(read_text_file(fixtures + "/metrics_oracle.json"));
  const auto returns = load_returns_csv(fixtures + "/metrics_returns.csv");
  const auto rep = compute_metrics(returns);
  std::size_t bad = returns.size() == 10 ? 0 : 1;
  double worst = 0;
  for (auto m : kAllMetrics) {
    const double want = oracle.at(metric_key(m)).get<double>();
    const double err = rep[m] ? std::abs(*rep[m] - want) / std::max(1.0, std::abs(want)) : INFINITY;
    worst = std::max(worst, err);
    bad += !(err <= 1e-9);
  }
  std::size_t degen = 0;
  std::vector<double> flat(50, 0.002), rising;
  for (int i = 0; i < 50; ++i) rising.push_back(0.001 + 1e-5 * i);
  for (const auto& series : {flat, rising, std::vector<double>(50, 0.0)}) {
    const auto d = compute_metrics(series);
    for (auto m : kAllMetrics) degen += d[m] && !std::isfinite(*d[m]);
    degen += nlohmann::json::parse(d.to_json()).dump().find("NaN") != std::string::npos;
  }
  const auto f = compute_metrics(flat), r = compute_metrics(rising);
  degen += !f.degenerate(Metric::kSharpe) || !f.degenerate(Metric::kSortino) || !f.degenerate(Metric::kOmega) ||
           !f.degenerate(Metric::kCalmar);
  degen += !r.degenerate(Metric::kOmega) || !r.degenerate(Metric::kCalmar) || !r.degenerate(Metric::kSortino);
  return {bad + degen == 0, fmt("10 metrics, worst relative error %.2e; %zu degenerate-case failures", worst, degen)};
}

Outcome min_variance() {
  auto diag = min_variance_from_covariance(std::vector<double>{1, 0, 0, 4}, 2).weights;
  const double diag_err = std::max(std::abs(diag[0] - 0.8), std::abs(diag[1] - 0.2));
  Rng rng(106);
  double worst = -INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> b(9), cov(9, 0.0);
    for (auto& x : b) x = 0.02 * rng.normal();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) cov[i * 3 + j] += b[i * 3 + k] * b[j * 3 + k];
    auto quad = [&](double w0, double w1, double w2) {
      const double w[3]{w0, w1, w2};
      double s = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += w[i] * cov[i * 3 + j] * w[j];
      return s;
    };
    double grid = INFINITY;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; i + j <= 100; ++j) grid = std::min(grid, quad(i / 100.0, j / 100.0, (100 - i - j) / 100.0));
    const auto res = min_variance_from_covariance(cov, 3);
    worst = std::max(worst, res.objective - grid);
  }
  return {diag_err <= 1e-6 && worst <= 1e-6,
          fmt("diag(1,4) error %.2e; 50 random 3-asset cases, worst excess over grid %.2e", diag_err, worst)};
}

// Two assets, one drifting up and one down, identical ESG.
Outcome learning_sanity(Algorithm algo) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t hits = 0, interior_optima = 0;
  std::string weights;
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    SynthSpec spec;
    spec.assets = {{"UP", 0.002, 0.002, 5, 5, 5, 0}, {"DN", -0.002, 0.002, 5, 5, 5, 0}};
    auto panel = compute_features(std::make_shared<const AlignedDataset>(synth_market(spec, 650, seed)),
                                  IndicatorConfig{});
    EnvConfig ec;
    ec.regulate = false;
    ec.esg_in_state = false;
    PortfolioEnv env(panel, panel->usable_start(), 640, ec);

    // Best constant-weight book over the same window, by brute force.
    const auto& ds = panel->dataset();
    std::size_t best = 0;
    double best_value = -1;
    for (std::size_t k = 0; k <= 100; ++k) {
      const double w = k / 100.0;
      double v = 1;
      for (std::size_t d = env.first_day(); d < env.last_day(); ++d)
        v *= 1 + w * (ds.bar(d + 1, 0).close / ds.bar(d, 0).close - 1) +
             (1 - w) * (ds.bar(d + 1, 1).close / ds.bar(d, 1).close - 1);
      if (v > best_value) best_value = v, best = k;
    }
    interior_optima += best != 100;

    AgentHyper h = AgentHyper::defaults(algo);
    h.seed = seed;
    h.total_timesteps = 50000;
    if (algo == Algorithm::kA2C) {
      h.learning_rate = 7e-4;
      h.normalize_advantage = false;
      h.gae_lambda = 0.0;
    }
    const auto trained = train(env, h);
    const auto ep = evaluate(trained.policy, env);
    double w = 0;
    for (const auto& wt : ep.weights) w += wt[0];
    w /= static_cast<double>(ep.weights.size());
    hits += w >= 0.7;
    weights += fmt("%s%.3f", weights.empty() ? "" : " ", w);
  }
  const double secs = seconds_since(t0);
  return {hits >= 4 && interior_optima == 0 && secs < 900.0,
          fmt("%s: %zu/5 seeds with mean weight >= 0.7 on the rising asset [%s], constant-weight optimum at the "
              "corner in %zu/5; %.1fs",
              to_string(algo), hits, weights.c_str(), 5 - interior_optima, secs)};
}

// Five assets, equal drift, ESG unrelated to returns; regulated vs free.
Outcome directional_esg() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  const double esg[5]{3, 9, 2, 8, 5};
  const char* names[5]{"A", "B", "C", "D", "E"};
  for (int i = 0; i < 5; ++i) spec.assets.push_back({names[i], 0.0003, 0.01, esg[i], esg[i], esg[i], 0});
  spec.market_factor = 0.5;
  std::size_t wins = 0;
  double sharpe[2]{0, 0};
  std::string detail;
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    auto panel = compute_features(std::make_shared<const AlignedDataset>(synth_market(spec, 1000, 1000 + seed)),
                                  IndicatorConfig{});
    double phi[2];
    for (int reg = 0; reg < 2; ++reg) {
      EnvConfig ec;
      ec.regulate = reg == 1;
      ec.lambda = 10.0;
      PortfolioEnv train_env(panel, panel->usable_start(), 500, ec);
      AgentHyper h = AgentHyper::defaults(Algorithm::kPPO);
      h.seed = seed;
      const auto trained = train(train_env, h);
      PortfolioEnv trade_env(panel, 500, 999, ec, trained.policy.obs_stats);
      const auto ep = evaluate(trained.policy, trade_env);
      phi[reg] = ep.mean_phi();
      sharpe[reg] += compute_metrics(ep.raw_returns)[Metric::kSharpe].value_or(0.0) / 5.0;
    }
    wins += phi[1] > phi[0];
    detail += fmt("%s%.2f/%.2f", detail.empty() ? "" : " ", phi[1], phi[0]);
  }
  const double gap = std::abs(sharpe[1] - sharpe[0]);
  return {wins >= 4 && gap <= 0.5,
          fmt("ppo, lambda 10: regulated phi > free phi in %zu/5 seeds [reg/free %s]; mean Sharpe reg %.3f free "
              "%.3f, gap %.3f; %.1fs",
              wins, detail.c_str(), sharpe[1], sharpe[0], gap, seconds_since(t0))};
}

Outcome equal_weight_neutrality() {
  SynthSpec spec;
  const double esg[6]{1, 9.5, 4, 7, 0.5, 6};
  for (int i = 0; i < 6; ++i) spec.assets.push_back({"S" + std::to_string(i), 0.0005 * (i - 2), 0.015, esg[i], esg[i], esg[i], 0.002});
  auto panel = compute_features(std::make_shared<const AlignedDataset>(synth_market(spec, 300, 9)), IndicatorConfig{});
  std::size_t mismatched = 0, steps = 0;
  for (double lambda : {1.0, 10.0}) {
    EnvConfig reg, free;
    reg.lambda = free.lambda = lambda;
    free.regulate = false;
    PortfolioEnv a(panel, panel->usable_start(), 299, reg), b(panel, panel->usable_start(), 299, free);
    a.reset();
    b.reset();
    const std::vector<double> hold(6, 0.0);
    while (!a.done()) {
      const auto x = a.step(hold), y = b.step(hold);
      mismatched += x.reward != y.reward || x.info.phi != x.info.psi || y.info.phi != y.info.psi ||
                    x.info.regulated_return != x.info.raw_return;
      ++steps;
    }
    mismatched += !b.done();
  }
  return {mismatched == 0 && steps > 0, fmt("%zu steps, %zu non-identical", steps, mismatched)};
}

Outcome reproducibility(const std::string& cli, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all(out + "/repro");
  fs::create_directories(out + "/repro");
  nlohmann::json cfg{
      {"data",
       {{"synth",
         {{"days", 300},
          {"seed", 17},
          {"assets",
           {{{"ticker", "GRN"}, {"drift", 0.0004}, {"volatility", 0.012}, {"e", 8}, {"s", 7}, {"g", 9}},
            {{"ticker", "MID"}, {"drift", 0.0003}, {"volatility", 0.01}, {"e", 5}, {"s", 5}, {"g", 5}},
            {{"ticker", "BRN"}, {"drift", 0.0005}, {"volatility", 0.015}, {"e", 2}, {"s", 3}, {"g", 1}}}}}}}},
      {"train_end", "2009-09-30"},
      {"trade_end", "2009-12-31"},
      {"agent",
       {{"algorithms", {"a2c", "ppo"}},
        {"total_timesteps", 1024},
        {"hidden", {16, 16}},
        {"ppo", {{"rollout_length", 256}, {"batch_size", 64}, {"epochs", 2}}}}},
      {"seeds", {1, 2}},
      {"output_dir", "unused"}};
  const std::string config = out + "/repro/config.json";
  write_text_file(config, cfg.dump(2));
  setenv("ESGRL_LOG", "warn", 0);
  int rc = 0;
  for (const char* run : {"first", "second"}) {
    const std::string cmd = "\"" + cli + "\" run \"" + config + "\" --out \"" + out + "/repro/" + run + "\"" +
                            (std::string(run) == "second" ? " --parallel 2" : "") + " > /dev/null";
    rc |= std::system(cmd.c_str());
  }
  if (rc != 0) return {false, fmt("esgrl run exited with status %d", rc)};
  std::size_t differ = 0;
  for (const char* f : {"summary.csv", "summary.json"}) {
    differ += read_text_file(out + "/repro/first/" + f) != read_text_file(out + "/repro/second/" + f);
  }
  const auto size = fs::file_size(out + "/repro/first/summary.csv");
  return {differ == 0, fmt("two runs (serial, --parallel 2): %zu of 2 summary files differ; summary.csv %ju bytes; %.1fs",
                           differ, static_cast<std::uintmax_t>(size), seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance-out";
  std::vector<int> only;
  app.add_option("--out", out, "Scratch directory");
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reward-shaping algebra", shaping_algebra},
      {"worked shaping values", shaping_values},
      {"gradient correctness", gradient_check},
      {"indicator oracle equivalence", indicator_oracle},
      {"metrics oracle", [] { return metrics_oracle(ESGRL_FIXTURES); }},
      {"min-variance optimality",  min_variance},
      {"learning sanity", [] {
         auto a = learning_sanity(Algorithm::kA2C), p = learning_sanity(Algorithm::kPPO);
         return Outcome{a.pass && p.pass, a.detail + " | " + p.detail};
       }},
      {"directional ESG reproduction", directional_esg},
      {"equal-weight neutrality", equal_weight_neutrality},
      {"end-to-end reproducibility", [&] { return reproducibility(ESGRL_CLI, out); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %-30s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

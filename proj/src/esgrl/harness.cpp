#include "esgrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "esgrl/error.hpp"

namespace esgrl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collects every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& where, const std::string& msg) {
    errors.push_back(where.empty() ? msg : where + ": " + msg);
  }

  bool object(const json& j, const std::string& where) {
    if (j.is_object()) return true;
    error(where, "expected an object");
    return false;
  }

  void keys(const json& j, const std::string& where, const std::vector<std::string_view>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        error(join(where, it.key()), "unknown key");
    }
  }

  static std::string join(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
  }

  void get(const json& j, const std::string& where, const char* key, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) return error(join(where, key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) error(join(where, key), "must be finite");
  }

  void get(const json& j, const std::string& where, const char* key, bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_boolean()) return error(join(where, key), "expected true or false");
    out = v.get<bool>();
  }

  void get(const json& j, const std::string& where, const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) return error(join(where, key), "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void get(const json& j, const std::string& where, const char* key, std::uint64_t& out, bool) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) return error(join(where, key), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get(const json& j, const std::string& where, const char* key, std::string& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string()) return error(join(where, key), "expected a string");
    out = v.get<std::string>();
  }

  void get(const json& j, const std::string& where, const char* key, Date& out) {
    std::string text;
    if (!j.contains(key)) return;
    get(j, where, key, text);
    if (!j.at(key).is_string()) return;
    if (auto d = Date::try_parse(text)) out = *d;
    else error(join(where, key), "expected a YYYY-MM-DD date, got '" + text + "'");
  }

  template <class Fn>
  void check(const std::string& where, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      error(where, e.what());
    }
  }
};

void read_indicators(Reader& rd, const json& j, IndicatorConfig& c) {
  const std::string w = "indicators";
  if (!rd.object(j, w)) return;
  rd.keys(j, w,
          {"macd_fast", "macd_slow", "macd_signal", "boll_window", "boll_k", "rsi_window", "cci_window",
           "dx_window", "sma_windows", "boll_output"});
  rd.get(j, w, "macd_fast", c.macd_fast);
  rd.get(j, w, "macd_slow", c.macd_slow);
  rd.get(j, w, "macd_signal", c.macd_signal);
  rd.get(j, w, "boll_window", c.boll_window);
  rd.get(j, w, "boll_k", c.boll_k);
  rd.get(j, w, "rsi_window", c.rsi_window);
  rd.get(j, w, "cci_window", c.cci_window);
  rd.get(j, w, "dx_window", c.dx_window);
  if (j.contains("sma_windows")) {
    const auto& v = j.at("sma_windows");
    if (!v.is_array()) {
      rd.error("indicators.sma_windows", "expected an array of integers");
    } else {
      c.sma_windows.clear();
      for (const auto& x : v) {
        if (x.is_number_unsigned()) c.sma_windows.push_back(x.get<std::size_t>());
        else rd.error("indicators.sma_windows", "expected non-negative integers");
      }
    }
  }
  std::string bo;
  rd.get(j, w, "boll_output", bo);
  if (bo == "upper_lower") c.boll_output = BollingerOutput::kUpperLower;
  else if (bo == "bandwidth") c.boll_output = BollingerOutput::kBandwidth;
  else if (!bo.empty()) rd.error("indicators.boll_output", "expected upper_lower or bandwidth");
  rd.check(w, [&] { c.validate(); });
}

void read_env(Reader& rd, const json& j, EnvConfig& c, bool with_cell = false) {
  const std::string w = "env";
  if (!rd.object(j, w)) return;
  if (with_cell) {
    rd.keys(j, w,
            {"lambda", "transaction_cost", "include_weights_in_obs", "normalize_obs", "obs_clip",
             "regulation_affects_value", "esg_field", "regulate", "esg_in_state"});
    rd.get(j, w, "regulate", c.regulate);
    rd.get(j, w, "esg_in_state", c.esg_in_state);
  } else {
    rd.keys(j, w,
            {"lambda", "transaction_cost", "include_weights_in_obs", "normalize_obs", "obs_clip",
             "regulation_affects_value", "esg_field"});
  }
  rd.get(j, w, "lambda", c.lambda);
  rd.get(j, w, "transaction_cost", c.transaction_cost);
  rd.get(j, w, "include_weights_in_obs", c.include_weights_in_obs);
  rd.get(j, w, "normalize_obs", c.normalize_obs);
  rd.get(j, w, "obs_clip", c.obs_clip);
  rd.get(j, w, "regulation_affects_value", c.regulation_affects_value);
  std::string field;
  rd.get(j, w, "esg_field", field);
  if (!field.empty()) rd.check("env.esg_field", [&] { c.esg_field = esg_field_from_string(field); });
  rd.check(w, [&] { c.validate(); });
}

const std::vector<std::string_view> kAgentKeys{
    "gamma",         "gae_lambda",  "learning_rate", "entropy_coef",        "clip_epsilon",
    "batch_size",    "epochs",      "rollout_length", "total_timesteps",    "value_coef",
    "max_grad_norm", "normalize_advantage", "hidden", "initial_log_std"};

void read_agent_fields(Reader& rd, const json& j, const std::string& w, AgentHyper& h) {
  rd.get(j, w, "gamma", h.gamma);
  rd.get(j, w, "gae_lambda", h.gae_lambda);
  rd.get(j, w, "learning_rate", h.learning_rate);
  rd.get(j, w, "entropy_coef", h.entropy_coef);
  rd.get(j, w, "clip_epsilon", h.clip_epsilon);
  rd.get(j, w, "batch_size", h.batch_size);
  rd.get(j, w, "epochs", h.epochs);
  rd.get(j, w, "rollout_length", h.rollout_length);
  rd.get(j, w, "total_timesteps", h.total_timesteps);
  rd.get(j, w, "value_coef", h.value_coef);
  rd.get(j, w, "max_grad_norm", h.max_grad_norm);
  rd.get(j, w, "normalize_advantage", h.normalize_advantage);
  rd.get(j, w, "initial_log_std", h.initial_log_std);
  if (j.contains("hidden")) {
    const auto& v = j.at("hidden");
    if (!v.is_array()) {
      rd.error(Reader::join(w, "hidden"), "expected an array of integers");
    } else {
      h.hidden.clear();
      for (const auto& x : v) {
        if (x.is_number_unsigned()) h.hidden.push_back(x.get<std::size_t>());
        else rd.error(Reader::join(w, "hidden"), "expected positive integers");
      }
    }
  }
}

// "agent": shared overrides plus optional per-algorithm blocks
// {"a2c": {...}, "ppo": {...}}; "algorithms" picks which to run.
std::vector<AgentHyper> read_agents(Reader& rd, const json& j) {
  const std::string w = "agent";
  std::vector<std::string> names{"a2c"};
  if (!rd.object(j, w)) return {};
  std::vector<std::string_view> allowed(kAgentKeys.begin(), kAgentKeys.end());
  for (auto k : {"algorithms", "a2c", "ppo"}) allowed.push_back(k);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      rd.error(Reader::join(w, it.key()), "unknown key");
  }
  if (j.contains("algorithms")) {
    const auto& v = j.at("algorithms");
    names.clear();
    if (!v.is_array() || v.empty()) rd.error("agent.algorithms", "expected a non-empty array of names");
    else
      for (const auto& x : v) names.push_back(x.is_string() ? x.get<std::string>() : std::string("?"));
  }
  std::vector<AgentHyper> out;
  for (const auto& name : names) {
    Algorithm algo{};
    try {
      algo = algorithm_from_string(name);
    } catch (const Error& e) {
      rd.error("agent.algorithms", e.what());
      continue;
    }
    if (std::any_of(out.begin(), out.end(), [&](const AgentHyper& h) { return h.algorithm == algo; })) {
      rd.error("agent.algorithms", "duplicate algorithm " + name);
      continue;
    }
    AgentHyper h = AgentHyper::defaults(algo);
    read_agent_fields(rd, j, w, h);
    const std::string key = to_string(algo);
    if (j.contains(key) && rd.object(j.at(key), Reader::join(w, key))) {
      rd.keys(j.at(key), Reader::join(w, key), kAgentKeys);
      read_agent_fields(rd, j.at(key), Reader::join(w, key), h);
    }
    rd.check(Reader::join(w, key), [&] { h.validate(); });
    out.push_back(std::move(h));
  }
  for (auto k : {"a2c", "ppo"}) {
    if (j.contains(k) && std::find(names.begin(), names.end(), k) == names.end())
      rd.error(Reader::join(w, k), "settings for an algorithm that is not in agent.algorithms");
  }
  return out;
}

SynthSource read_synth(Reader& rd, const json& j, const std::string& w) {
  SynthSource s;
  if (!rd.object(j, w)) return s;
  rd.keys(j, w, {"days", "seed", "start", "initial_price", "market_factor", "assets"});
  rd.get(j, w, "days", s.days);
  rd.get(j, w, "seed", s.seed, true);
  rd.get(j, w, "start", s.spec.start);
  rd.get(j, w, "initial_price", s.spec.initial_price);
  rd.get(j, w, "market_factor", s.spec.market_factor);
  if (!j.contains("days")) rd.error(Reader::join(w, "days"), "required");
  if (!j.contains("assets") || !j.at("assets").is_array() || j.at("assets").empty()) {
    rd.error(Reader::join(w, "assets"), "expected a non-empty array of assets");
    return s;
  }
  std::size_t i = 0;
  for (const auto& a : j.at("assets")) {
    const std::string aw = w + ".assets[" + std::to_string(i++) + "]";
    if (!rd.object(a, aw)) continue;
    rd.keys(a, aw, {"ticker", "drift", "volatility", "e", "s", "g", "esg_slope"});
    SynthAsset asset;
    rd.get(a, aw, "ticker", asset.ticker);
    if (!a.contains("ticker")) rd.error(Reader::join(aw, "ticker"), "required");
    rd.get(a, aw, "drift", asset.drift);
    rd.get(a, aw, "volatility", asset.volatility);
    rd.get(a, aw, "e", asset.e);
    rd.get(a, aw, "s", asset.s);
    rd.get(a, aw, "g", asset.g);
    rd.get(a, aw, "esg_slope", asset.esg_slope);
    s.spec.assets.push_back(std::move(asset));
  }
  if (rd.errors.empty()) {
    rd.check(w, [&] { (void)synth_market(s.spec, std::max(s.days, synth_min_days()), s.seed); });
    if (s.days < synth_min_days())
      rd.error(Reader::join(w, "days"), "must be >= " + std::to_string(synth_min_days()));
  }
  return s;
}

json synth_to_json(const SynthSource& s) {
  json assets = json::array();
  for (const auto& a : s.spec.assets) {
    assets.push_back({{"ticker", a.ticker},
                      {"drift", a.drift},
                      {"volatility", a.volatility},
                      {"e", a.e},
                      {"s", a.s},
                      {"g", a.g},
                      {"esg_slope", a.esg_slope}});
  }
  return {{"days", s.days},
          {"seed", s.seed},
          {"start", s.spec.start.to_string()},
          {"initial_price", s.spec.initial_price},
          {"market_factor", s.spec.market_factor},
          {"assets", assets}};
}

json agent_fields_json(const AgentHyper& h) {
  return {{"gamma", h.gamma},
          {"gae_lambda", h.gae_lambda},
          {"learning_rate", h.learning_rate},
          {"entropy_coef", h.entropy_coef},
          {"clip_epsilon", h.clip_epsilon},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs},
          {"rollout_length", h.rollout_length},
          {"total_timesteps", h.total_timesteps},
          {"value_coef", h.value_coef},
          {"max_grad_norm", h.max_grad_norm},
          {"normalize_advantage", h.normalize_advantage},
          {"hidden", h.hidden},
          {"initial_log_std", h.initial_log_std}};
}

json to_json_value(const ExperimentConfig& c, bool for_hash) {
  json data;
  if (c.data.synth) {
    data["synth"] = synth_to_json(*c.data.synth);
  } else {
    data["ohlcv"] = c.data.ohlcv_path;
    data["esg"] = c.data.esg_path;
    if (!c.data.tickers.empty()) data["tickers"] = c.data.tickers;
  }
  const auto& ic = c.indicators;
  json ind{{"macd_fast", ic.macd_fast},     {"macd_slow", ic.macd_slow},   {"macd_signal", ic.macd_signal},
           {"boll_window", ic.boll_window}, {"boll_k", ic.boll_k},         {"rsi_window", ic.rsi_window},
           {"cci_window", ic.cci_window},   {"dx_window", ic.dx_window},   {"sma_windows", ic.sma_windows},
           {"boll_output", ic.boll_output == BollingerOutput::kUpperLower ? "upper_lower" : "bandwidth"}};
  const auto& e = c.env;
  json env{{"lambda", e.lambda},
           {"transaction_cost", e.transaction_cost},
           {"include_weights_in_obs", e.include_weights_in_obs},
           {"normalize_obs", e.normalize_obs},
           {"obs_clip", e.obs_clip},
           {"regulation_affects_value", e.regulation_affects_value},
           {"esg_field", to_string(e.esg_field)}};
  json agent;
  json algos = json::array();
  for (const auto& h : c.agents) {
    algos.push_back(to_string(h.algorithm));
    agent[to_string(h.algorithm)] = agent_fields_json(h);
  }
  agent["algorithms"] = algos;
  json baselines = json::array();
  for (const auto& b : c.baselines)
    baselines.push_back({{"kind", to_string(b.kind)}, {"lookback", b.lookback}, {"rebalance", b.rebalance}});
  json grid = json::array();
  for (const auto& g : c.grid) grid.push_back({{"regulate", g.regulate}, {"esg_in_state", g.esg_in_state}});
  json out{{"data", data},
           {"train_end", c.train_end.to_string()},
           {"trade_end", c.trade_end.to_string()},
           {"indicators", ind},
           {"env", env},
           {"agent", agent},
           {"baselines", baselines},
           {"seeds", c.seeds},
           {"grid", grid},
           {"metrics",
            {{"periods_per_year", c.metrics.periods_per_year},
             {"var_cutoff", c.metrics.var_cutoff},
             {"var_method", c.metrics.var_method == VarMethod::kEmpirical ? "empirical" : "gaussian"}}}};
  if (!for_hash) {
    out["output_dir"] = c.output_dir;
    out["parallel"] = c.parallel;
  }
  return out;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("esgrl");
    logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("ESGRL_LOG")) {
      auto parsed = spdlog::level::from_str(lvl);
      // from_str maps unknown names to off; only accept known ones.
      if (parsed != spdlog::level::off || std::string_view(lvl) == "off") spdlog::set_level(parsed);
      else spdlog::warn("ESGRL_LOG='{}' not recognized, using info", lvl);
    }
  });
}

std::string GridCell::id() const {
  return std::string(regulate ? "regulated" : "free") + (esg_in_state ? "-esg" : "-noesg");
}

std::string ExperimentConfig::to_json() const { return to_json_value(*this, false).dump(2); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json_value(*this, true).dump()); }

ExperimentConfig parse_config(std::string_view text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  Reader rd;
  ExperimentConfig c;
  if (!rd.object(j, "config")) fail(ErrorKind::kValidation, rd.errors.front());
  rd.keys(j, "",
          {"data", "train_end", "trade_end", "indicators", "env", "agent", "baselines", "seeds", "grid", "metrics",
           "output_dir", "parallel"});

  if (!j.contains("data")) {
    rd.error("data", "required");
  } else if (rd.object(j.at("data"), "data")) {
    const auto& d = j.at("data");
    rd.keys(d, "data", {"ohlcv", "esg", "tickers", "synth"});
    if (d.contains("synth")) {
      if (d.contains("ohlcv") || d.contains("esg") || d.contains("tickers"))
        rd.error("data", "give either synth or ohlcv/esg paths, not both");
      Reader sub;
      c.data.synth = read_synth(sub, d.at("synth"), "data.synth");
      rd.errors.insert(rd.errors.end(), sub.errors.begin(), sub.errors.end());
    } else {
      rd.get(d, "data", "ohlcv", c.data.ohlcv_path);
      rd.get(d, "data", "esg", c.data.esg_path);
      if (c.data.ohlcv_path.empty()) rd.error("data.ohlcv", "required (or data.synth)");
      if (c.data.esg_path.empty()) rd.error("data.esg", "required (or data.synth)");
      c.data.ohlcv_path = resolve(base_dir, c.data.ohlcv_path);
      c.data.esg_path = resolve(base_dir, c.data.esg_path);
      for (const auto* p : {&c.data.ohlcv_path, &c.data.esg_path}) {
        if (!p->empty() && !fs::exists(*p)) rd.error("data", "file not found: " + *p);
      }
      if (d.contains("tickers")) {
        const auto& t = d.at("tickers");
        if (!t.is_array()) rd.error("data.tickers", "expected an array of strings");
        else
          for (const auto& x : t) {
            if (x.is_string()) c.data.tickers.push_back(x.get<std::string>());
            else rd.error("data.tickers", "expected strings");
          }
      }
    }
  }

  for (const char* k : {"train_end", "trade_end"}) {
    if (!j.contains(k)) rd.error(k, "required");
  }
  rd.get(j, "", "train_end", c.train_end);
  rd.get(j, "", "trade_end", c.trade_end);
  if (j.contains("train_end") && j.contains("trade_end") && !(c.train_end < c.trade_end))
    rd.error("trade_end", "must come after train_end");

  if (j.contains("indicators")) read_indicators(rd, j.at("indicators"), c.indicators);
  if (j.contains("env")) read_env(rd, j.at("env"), c.env);
  c.agents = j.contains("agent") ? read_agents(rd, j.at("agent")) : std::vector<AgentHyper>{AgentHyper{}};

  if (j.contains("baselines")) {
    const auto& b = j.at("baselines");
    if (!b.is_array()) rd.error("baselines", "expected an array");
    else {
      std::size_t i = 0;
      for (const auto& x : b) {
        const std::string w = "baselines[" + std::to_string(i++) + "]";
        if (!rd.object(x, w)) continue;
        rd.keys(x, w, {"kind", "lookback", "rebalance"});
        BaselineSpec spec;
        std::string kind;
        rd.get(x, w, "kind", kind);
        rd.check(w + ".kind", [&] { spec.kind = baseline_kind_from_string(kind); });
        rd.get(x, w, "lookback", spec.lookback);
        rd.get(x, w, "rebalance", spec.rebalance);
        rd.check(w, [&] { spec.validate(); });
        if (std::any_of(c.baselines.begin(), c.baselines.end(),
                        [&](const BaselineSpec& o) { return o.kind == spec.kind; }))
          rd.error(w, "duplicate baseline kind");
        c.baselines.push_back(spec);
      }
    }
  } else {
    c.baselines = {BaselineSpec{BaselineKind::kStratified}, BaselineSpec{BaselineKind::kMinVariance}};
  }
  if (std::none_of(c.baselines.begin(), c.baselines.end(),
                   [](const BaselineSpec& b) { return b.kind == BaselineKind::kStratified; }))
    c.baselines.insert(c.baselines.begin(), BaselineSpec{BaselineKind::kStratified});

  if (!j.contains("seeds")) {
    rd.error("seeds", "required (a non-empty list of integers)");
  } else if (!j.at("seeds").is_array() || j.at("seeds").empty()) {
    rd.error("seeds", "expected a non-empty array of integers");
  } else {
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) {
        rd.error("seeds", "expected non-negative integers");
        continue;
      }
      const auto v = s.get<std::uint64_t>();
      if (std::find(c.seeds.begin(), c.seeds.end(), v) != c.seeds.end())
        rd.error("seeds", "duplicate seed " + std::to_string(v));
      c.seeds.push_back(v);
    }
  }

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (!g.is_array() || g.empty()) rd.error("grid", "expected a non-empty array of cells");
    else {
      std::size_t i = 0;
      for (const auto& x : g) {
        const std::string w = "grid[" + std::to_string(i++) + "]";
        if (!rd.object(x, w)) continue;
        rd.keys(x, w, {"regulate", "esg_in_state"});
        if (!x.contains("regulate") || !x.contains("esg_in_state"))
          rd.error(w, "needs both regulate and esg_in_state");
        GridCell cell;
        rd.get(x, w, "regulate", cell.regulate);
        rd.get(x, w, "esg_in_state", cell.esg_in_state);
        if (std::find(c.grid.begin(), c.grid.end(), cell) != c.grid.end()) rd.error(w, "duplicate cell");
        c.grid.push_back(cell);
      }
    }
  } else {
    c.grid = {{true, true}, {true, false}, {false, true}, {false, false}};
  }

  if (j.contains("metrics") && rd.object(j.at("metrics"), "metrics")) {
    const auto& m = j.at("metrics");
    rd.keys(m, "metrics", {"periods_per_year", "var_cutoff", "var_method"});
    rd.get(m, "metrics", "periods_per_year", c.metrics.periods_per_year);
    rd.get(m, "metrics", "var_cutoff", c.metrics.var_cutoff);
    std::string method;
    rd.get(m, "metrics", "var_method", method);
    if (method == "gaussian") c.metrics.var_method = VarMethod::kGaussian;
    else if (!method.empty() && method != "empirical")
      rd.error("metrics.var_method", "expected empirical or gaussian");
    if (!(c.metrics.periods_per_year > 0)) rd.error("metrics.periods_per_year", "must be > 0");
    if (!(c.metrics.var_cutoff > 0 && c.metrics.var_cutoff < 1)) rd.error("metrics.var_cutoff", "must lie in (0, 1)");
    if (c.metrics.var_method == VarMethod::kGaussian && c.metrics.var_cutoff != 0.05)
      rd.error("metrics.var_cutoff", "gaussian VaR supports 0.05 only");
  }

  rd.get(j, "", "output_dir", c.output_dir);
  if (c.output_dir.empty()) rd.error("output_dir", "must not be empty");
  c.output_dir = resolve(base_dir, c.output_dir);
  rd.get(j, "", "parallel", c.parallel);
  if (c.parallel < 1) rd.error("parallel", "must be >= 1");

  if (!rd.errors.empty()) {
    std::string msg;
    for (const auto& e : rd.errors) msg += (msg.empty() ? "" : "\n") + e;
    fail(ErrorKind::kValidation, msg);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string base = fs::path(path).parent_path().string();
  return parse_config(read_text_file(path), base.empty() ? "." : base);
}

std::vector<std::string> config_errors(const std::string& path) {
  try {
    (void)load_config(path);
    return {};
  } catch (const Error& e) {
    std::vector<std::string> out;
    std::string_view msg = e.what();
    while (!msg.empty()) {
      auto nl = msg.find('\n');
      out.emplace_back(msg.substr(0, nl));
      if (nl == msg.npos) break;
      msg.remove_prefix(nl + 1);
    }
    return out;
  }
}

SynthSource parse_synth_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("synth spec is not valid JSON: ") + e.what());
  }
  Reader rd;
  auto s = read_synth(rd, j, "synth");
  if (!rd.errors.empty()) {
    std::string msg;
    for (const auto& e : rd.errors) msg += (msg.empty() ? "" : "\n") + e;
    fail(ErrorKind::kValidation, msg);
  }
  return s;
}

EnvConfig parse_env_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("env settings are not valid JSON: ") + e.what());
  }
  Reader rd;
  EnvConfig c;
  read_env(rd, j, c, true);
  if (!rd.errors.empty()) {
    std::string msg;
    for (const auto& e : rd.errors) msg += (msg.empty() ? "" : "\n") + e;
    fail(ErrorKind::kValidation, msg);
  }
  return c;
}

AlignedDataset load_dataset(const DataSource& src) {
  if (src.synth) return synth_market(src.synth->spec, src.synth->days, src.synth->seed);
  return align_and_fill(load_ohlcv(src.ohlcv_path, src.tickers), load_esg(src.esg_path));
}

std::vector<RunRecord> pooled_view(const std::vector<RunRecord>& records) {
  std::vector<RunRecord> out;
  for (const auto& r : records) {
    if (r.algorithm.empty()) continue;
    RunRecord p = r;
    p.cell = "all-" + r.cell.substr(r.cell.find('-') + 1);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct Task {
  std::string cell;
  AgentHyper hyper;
  GridCell grid;
};

void write_run_files(const RunRecord& rec, const std::string& dir) {
  fs::create_directories(dir);
  write_text_file(dir + "/trace.csv", rec.episode.trace_csv());
  write_text_file(dir + "/weights.csv", rec.episode.weights_csv());
  write_text_file(dir + "/equity.csv", rec.episode.equity_csv());
  write_text_file(dir + "/metrics.json", rec.metrics.to_json() + "\n");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  init_logging();
  const auto t_start = std::chrono::steady_clock::now();
  auto ds = std::make_shared<const AlignedDataset>(load_dataset(cfg.data));
  const auto panel = compute_features(ds, cfg.indicators);
  const DatasetSplit sp = split(*ds, cfg.train_end, cfg.trade_end);
  const std::size_t trade_begin = sp.trade_begin;
  const std::size_t trade_last = trade_begin + sp.trade.num_days() - 1;
  const std::size_t train_first = panel->usable_start();
  require(trade_begin >= train_first + 2, ErrorKind::kValidation,
          "training window after the indicator warm-up is too short: train_end must be at least 2 days past " +
              ds->calendar()[train_first].to_string());
  require(trade_last > trade_begin, ErrorKind::kValidation, "trade period needs at least 2 days");

  ExperimentResult res;
  res.run_dir = cfg.output_dir;
  fs::create_directories(cfg.output_dir);
  spdlog::info("dataset: {} assets x {} days, train {}..{}, trade {}..{}", ds->num_assets(), ds->num_days(),
               ds->calendar()[train_first].to_string(), ds->calendar()[trade_begin - 1].to_string(),
               ds->calendar()[trade_begin].to_string(), ds->calendar()[trade_last].to_string());

  std::vector<Task> tasks;
  for (const auto& hyper : cfg.agents) {
    for (const auto& g : cfg.grid) {
      for (auto seed : cfg.seeds) {
        Task t{std::string(to_string(hyper.algorithm)) + "-" + g.id(), hyper, g};
        t.hyper.seed = seed;
        tasks.push_back(std::move(t));
      }
    }
  }

  std::vector<RunRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      RunRecord& rec = records[i];
      rec.cell = t.cell;
      rec.algorithm = to_string(t.hyper.algorithm);
      rec.seed = t.hyper.seed;
      const std::string dir = cfg.output_dir + "/runs/" + t.cell + "/seed-" + std::to_string(rec.seed);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        EnvConfig ec = cfg.env;
        ec.regulate = t.grid.regulate;
        ec.esg_in_state = t.grid.esg_in_state;
        PortfolioEnv train_env(panel, train_first, trade_begin - 1, ec);
        auto trained = train(train_env, t.hyper);
        PortfolioEnv trade_env(panel, trade_begin, trade_last, ec, trained.policy.obs_stats);
        rec.episode = evaluate(trained.policy, trade_env);
        rec.metrics = compute_metrics(rec.episode.value_returns(), cfg.metrics);
        write_run_files(rec, dir);
        rec.train_log_path = dir + "/train_log.csv";
        rec.checkpoint_path = dir + "/policy.ckpt";
        write_text_file(rec.train_log_path, trained.log_csv());
        trained.policy.save(rec.checkpoint_path);
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        spdlog::error("run {} seed {} failed: {}", t.cell, rec.seed, e.what());
      }
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (rec.ok)
        spdlog::info("run {} seed {} done in {:.1f}s, final value {:.4f}", t.cell, rec.seed, rec.wall_seconds,
                     rec.episode.final_value());
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(cfg.parallel, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < nthreads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (const auto& spec : cfg.baselines) {
    RunRecord rec;
    rec.cell = "baseline-" + std::string(to_string(spec.kind));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.episode = run_baseline(*ds, trade_begin, trade_last, spec, cfg.env);
      rec.metrics = compute_metrics(rec.episode.value_returns(), cfg.metrics);
      write_run_files(rec, cfg.output_dir + "/runs/" + rec.cell);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
      spdlog::error("baseline {} failed: {}", rec.cell, e.what());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(std::move(rec));
  }

  res.failures = static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const RunRecord& r) {
    return !r.ok;
  }));
  std::vector<RunRecord> view = records;
  if (cfg.agents.size() > 1) {
    auto pooled = pooled_view(records);
    view.insert(view.end(), pooled.begin(), pooled.end());
  }
  if (std::any_of(view.begin(), view.end(), [](const RunRecord& r) { return r.ok; })) {
    res.summary = aggregate(view);
    emit_report(view, res.summary, cfg.output_dir);
  }

  json runs = json::array();
  for (const auto& r : records) {
    json jr{{"cell", r.cell},
            {"seed", r.seed},
            {"status", r.ok ? "ok" : "failed"},
            {"wall_seconds", r.wall_seconds}};
    if (!r.algorithm.empty()) jr["algorithm"] = r.algorithm;
    if (!r.ok) jr["error"] = r.error;
    if (r.ok && !r.train_log_path.empty()) {
      jr["train_log"] = fs::relative(r.train_log_path, cfg.output_dir).string();
      jr["checkpoint"] = fs::relative(r.checkpoint_path, cfg.output_dir).string();
    }
    runs.push_back(std::move(jr));
  }
  json manifest{{"format", "esgrl-manifest v1"},
                {"config_hash", hex64(cfg.hash())},
                {"config", to_json_value(cfg, false)},
                {"seeds", cfg.seeds},
                {"dataset_fingerprint", hex64(ds->fingerprint())},
                {"train_window", {ds->calendar()[train_first].to_string(), ds->calendar()[trade_begin - 1].to_string()}},
                {"trade_window", {ds->calendar()[trade_begin].to_string(), ds->calendar()[trade_last].to_string()}},
                {"pooled", cfg.agents.size() > 1},
                {"runs", runs},
                {"failures", res.failures},
                {"wall_seconds",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count()}};
  write_text_file(cfg.output_dir + "/manifest.json", manifest.dump(2) + "\n");
  res.records = std::move(records);
  spdlog::info("experiment finished: {} runs, {} failed, report in {}", res.records.size(), res.failures,
               cfg.output_dir);
  return res;
}

}  // namespace esgrl

#include "esgrl/esgrl.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "esgrl/analytics.hpp"
#include "esgrl/env.hpp"
#include "esgrl/error.hpp"
#include "esgrl/harness.hpp"
#include "esgrl/indicators.hpp"
#include "esgrl/marketdata.hpp"

struct esgrl_dataset {
  std::shared_ptr<const esgrl::AlignedDataset> data;
};

struct esgrl_env {
  std::unique_ptr<esgrl::PortfolioEnv> env;
};

namespace {

thread_local std::string g_last_error;

esgrl_status status_of(esgrl::ErrorKind kind) {
  using esgrl::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidArgument: return ESGRL_E_INVALID_ARGUMENT;
    case ErrorKind::kParse: return ESGRL_E_PARSE;
    case ErrorKind::kValidation: return ESGRL_E_VALIDATION;
    case ErrorKind::kNotFound: return ESGRL_E_NOT_FOUND;
    case ErrorKind::kIo: return ESGRL_E_IO;
    case ErrorKind::kState: return ESGRL_E_STATE;
    case ErrorKind::kNumeric: return ESGRL_E_NUMERIC;
    case ErrorKind::kConvergence: return ESGRL_E_CONVERGENCE;
  }
  return ESGRL_E_INTERNAL;
}

template <class Fn>
esgrl_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return ESGRL_OK;
  } catch (const esgrl::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ESGRL_E_INTERNAL;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  esgrl::require(p != nullptr, esgrl::ErrorKind::kInvalidArgument, std::string(what) + " must not be NULL");
}

esgrl::MetricsOptions metric_options(double periods_per_year, const char* var_method) {
  esgrl::MetricsOptions opts;
  if (periods_per_year > 0) opts.periods_per_year = periods_per_year;
  if (var_method && std::strcmp(var_method, "gaussian") == 0) opts.var_method = esgrl::VarMethod::kGaussian;
  else if (var_method && std::strcmp(var_method, "empirical") != 0)
    esgrl::fail(esgrl::ErrorKind::kInvalidArgument, std::string("unknown VaR method '") + var_method + "'");
  return opts;
}

}  // namespace

extern "C" {

const char* esgrl_last_error(void) { return g_last_error.c_str(); }

const char* esgrl_status_name(esgrl_status status) {
  switch (status) {
    case ESGRL_OK: return "ok";
    case ESGRL_E_INVALID_ARGUMENT: return "invalid_argument";
    case ESGRL_E_PARSE: return "parse";
    case ESGRL_E_VALIDATION: return "validation";
    case ESGRL_E_NOT_FOUND: return "not_found";
    case ESGRL_E_IO: return "io";
    case ESGRL_E_STATE: return "state";
    case ESGRL_E_NUMERIC: return "numeric";
    case ESGRL_E_CONVERGENCE: return "convergence";
    case ESGRL_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* esgrl_version(void) { return "0.1.0"; }

void esgrl_free_string(char* s) { std::free(s); }

esgrl_status esgrl_validate_config(const char* config_path, char** errors) {
  if (errors) *errors = nullptr;
  return guarded([&] {
    need(config_path, "config_path");
    const auto list = esgrl::config_errors(config_path);
    if (list.empty()) return;
    std::string joined;
    for (const auto& e : list) joined += e + "\n";
    if (errors) *errors = dup(joined);
    // Re-raise with the original kind (parse vs validation vs io).
    (void)esgrl::load_config(config_path);
  });
}

esgrl_status esgrl_run_experiment(const char* config_path, const char* out_dir, int parallel, char** run_dir) {
  if (run_dir) *run_dir = nullptr;
  return guarded([&] {
    need(config_path, "config_path");
    esgrl::init_logging();
    auto cfg = esgrl::load_config(config_path);
    if (out_dir) cfg.output_dir = out_dir;
    if (parallel > 0) cfg.parallel = static_cast<std::size_t>(parallel);
    const auto res = esgrl::run_experiment(cfg);
    if (run_dir) *run_dir = dup(res.run_dir);
    esgrl::require(res.failures < res.records.size(), esgrl::ErrorKind::kState,
                   "every run failed; see " + res.run_dir + "/manifest.json");
  });
}

esgrl_status esgrl_report(const char* run_dir, char** table) {
  if (table) *table = nullptr;
  return guarded([&] {
    need(run_dir, "run_dir");
    const auto text = esgrl::report_run_dir(run_dir);
    if (table) *table = dup(text);
  });
}

esgrl_status esgrl_synth(const char* spec_path, const char* out_csv, char** esg_path) {
  if (esg_path) *esg_path = nullptr;
  return guarded([&] {
    need(spec_path, "spec_path");
    need(out_csv, "out_csv");
    const auto src = esgrl::parse_synth_spec(esgrl::read_text_file(spec_path));
    const auto ds = esgrl::synth_market(src.spec, src.days, src.seed);
    std::filesystem::path out(out_csv);
    const std::string esg = (out.parent_path() / (out.stem().string() + "_esg.csv")).string();
    esgrl::write_text_file(out_csv, ds.to_ohlcv_csv());
    esgrl::write_text_file(esg, ds.to_esg_csv());
    if (esg_path) *esg_path = dup(esg);
  });
}

esgrl_status esgrl_metrics(const double* returns, size_t n, double periods_per_year, const char* var_method,
                           char** json) {
  if (json) *json = nullptr;
  return guarded([&] {
    need(returns, "returns");
    need(json, "json");
    const auto rep = esgrl::compute_metrics({returns, n}, metric_options(periods_per_year, var_method));
    *json = dup(rep.to_json());
  });
}

esgrl_status esgrl_metrics_file(const char* returns_csv, double periods_per_year, const char* var_method,
                                char** json) {
  if (json) *json = nullptr;
  return guarded([&] {
    need(returns_csv, "returns_csv");
    need(json, "json");
    const auto r = esgrl::load_returns_csv(returns_csv);
    *json = dup(esgrl::compute_metrics(r, metric_options(periods_per_year, var_method)).to_json());
  });
}

esgrl_status esgrl_regulate(double raw_return, double phi, double psi, double lambda, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = esgrl::regulate(raw_return, phi, psi, lambda);
  });
}

esgrl_status esgrl_dataset_load(const char* ohlcv_csv, const char* esg_csv, esgrl_dataset** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(ohlcv_csv, "ohlcv_csv");
    need(esg_csv, "esg_csv");
    need(out, "out");
    auto ds = esgrl::align_and_fill(esgrl::load_ohlcv(ohlcv_csv), esgrl::load_esg(esg_csv));
    *out = new esgrl_dataset{std::make_shared<const esgrl::AlignedDataset>(std::move(ds))};
  });
}

esgrl_status esgrl_dataset_synth(const char* spec_json, esgrl_dataset** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    const auto src = esgrl::parse_synth_spec(spec_json);
    auto ds = esgrl::synth_market(src.spec, src.days, src.seed);
    *out = new esgrl_dataset{std::make_shared<const esgrl::AlignedDataset>(std::move(ds))};
  });
}

esgrl_status esgrl_dataset_save(const esgrl_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "ds");
    need(path, "path");
    esgrl::write_text_file(path, ds->data->serialize());
  });
}

size_t esgrl_dataset_num_days(const esgrl_dataset* ds) { return ds ? ds->data->num_days() : 0; }
size_t esgrl_dataset_num_assets(const esgrl_dataset* ds) { return ds ? ds->data->num_assets() : 0; }
void esgrl_dataset_free(esgrl_dataset* ds) { delete ds; }

esgrl_status esgrl_env_create(const esgrl_dataset* ds, const char* env_json, size_t first_day, size_t last_day,
                              esgrl_env** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(ds, "ds");
    need(out, "out");
    const auto cfg = env_json ? esgrl::parse_env_config(env_json) : esgrl::EnvConfig{};
    auto panel = esgrl::compute_features(ds->data, esgrl::IndicatorConfig{});
    if (first_day == 0) first_day = panel->usable_start();
    auto env = std::make_unique<esgrl::PortfolioEnv>(panel, first_day, last_day, cfg);
    *out = new esgrl_env{std::move(env)};
  });
}

size_t esgrl_env_obs_dim(const esgrl_env* env) { return env ? env->env->obs_dim() : 0; }
size_t esgrl_env_action_dim(const esgrl_env* env) { return env ? env->env->action_dim() : 0; }

esgrl_status esgrl_env_reset(esgrl_env* env, double* obs, size_t obs_len) {
  return guarded([&] {
    need(env, "env");
    need(obs, "obs");
    esgrl::require(obs_len == env->env->obs_dim(), esgrl::ErrorKind::kInvalidArgument,
                   "obs buffer length does not match the observation dimension");
    const auto o = env->env->reset();
    std::copy(o.begin(), o.end(), obs);
  });
}

esgrl_status esgrl_env_step(esgrl_env* env, const double* action, size_t action_len, double* obs, size_t obs_len,
                            double* reward, int* done, esgrl_step_info* info) {
  return guarded([&] {
    need(env, "env");
    need(action, "action");
    need(obs, "obs");
    need(reward, "reward");
    need(done, "done");
    esgrl::require(obs_len == env->env->obs_dim(), esgrl::ErrorKind::kInvalidArgument,
                   "obs buffer length does not match the observation dimension");
    const auto s = env->env->step({action, action_len});
    std::copy(s.observation.begin(), s.observation.end(), obs);
    *reward = s.reward;
    *done = s.done ? 1 : 0;
    if (info) {
      *info = esgrl_step_info{s.info.raw_return, s.info.regulated_return, s.info.phi,
                              s.info.psi,        s.info.turnover,         s.info.cost};
    }
  });
}

void esgrl_env_free(esgrl_env* env) { delete env; }

}  // extern "C"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "esgrl/esgrl.h"

namespace {

const char* kSynth = R"({"days": 90, "seed": 4, "assets": [
  {"ticker": "AAA", "drift": 0.001, "volatility": 0.01, "e": 8, "s": 8, "g": 8},
  {"ticker": "BBB", "drift": 0.0, "volatility": 0.01, "e": 2, "s": 2, "g": 2}]})";

std::string take(char* s) {
  std::string out = s ? s : "";
  esgrl_free_string(s);
  return out;
}

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("esgrl-capi-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("status names and last error") {
  CHECK(std::string(esgrl_status_name(ESGRL_OK)) == "ok");
  CHECK(std::strlen(esgrl_version()) > 0);
  double out = 0;
  CHECK(esgrl_regulate(0.01, 8, 6, 1, &out) == ESGRL_OK);
  CHECK(out == 0.015);
  CHECK(std::string(esgrl_last_error()).empty());
  CHECK(esgrl_regulate(-0.02, 3, 6, 1, &out) == ESGRL_OK);
  CHECK(out == -0.03);
  CHECK(esgrl_regulate(0.01, 11, 6, 1, &out) == ESGRL_E_INVALID_ARGUMENT);
  CHECK(std::strlen(esgrl_last_error()) > 0);
  CHECK(esgrl_regulate(0.01, 8, 6, 1, nullptr) == ESGRL_E_INVALID_ARGUMENT);
}

TEST_CASE("metrics through the C API") {
  const double r[] = {0.1, -0.1};
  char* json = nullptr;
  REQUIRE(esgrl_metrics(r, 2, 252, nullptr, &json) == ESGRL_OK);
  const auto text = take(json);
  CHECK(text.find("\"cumulative_return\"") != std::string::npos);
  CHECK(esgrl_metrics(r, 1, 252, nullptr, &json) == ESGRL_E_INVALID_ARGUMENT);
  CHECK(esgrl_metrics(r, 2, 252, "median", &json) != ESGRL_OK);
  CHECK(esgrl_metrics_file(ESGRL_FIXTURES "/metrics_returns.csv", 252, "gaussian", &json) == ESGRL_OK);
  CHECK(take(json).find("\"daily_var\"") != std::string::npos);
  CHECK(esgrl_metrics_file("/nonexistent/returns.csv", 252, nullptr, &json) == ESGRL_E_IO);
}

TEST_CASE("dataset and environment handles") {
  esgrl_dataset* ds = nullptr;
  REQUIRE(esgrl_dataset_synth(kSynth, &ds) == ESGRL_OK);
  CHECK(esgrl_dataset_num_days(ds) == 90);
  CHECK(esgrl_dataset_num_assets(ds) == 2);
  CHECK(esgrl_dataset_save(ds, scratch("ds.csv").c_str()) == ESGRL_OK);

  esgrl_env* env = nullptr;
  REQUIRE(esgrl_env_create(ds, R"({"lambda": 2, "regulate": true})", 0, 89, &env) == ESGRL_OK);
  const size_t od = esgrl_env_obs_dim(env), ad = esgrl_env_action_dim(env);
  CHECK(ad == 2);
  std::vector<double> obs(od), action{0.0, 0.0};
  int done = 0, steps = 0;
  double reward = 0, value = 1;
  CHECK(esgrl_env_step(env, action.data(), ad, obs.data(), od, &reward, &done, nullptr) == ESGRL_E_STATE);
  CHECK(esgrl_env_step(env, action.data(), ad, obs.data(), od, nullptr, &done, nullptr) == ESGRL_E_INVALID_ARGUMENT);
  CHECK(esgrl_env_reset(env, obs.data(), od - 1) == ESGRL_E_INVALID_ARGUMENT);
  REQUIRE(esgrl_env_reset(env, obs.data(), od) == ESGRL_OK);
  for (double x : obs) CHECK(std::isfinite(x));

  esgrl_step_info info{};
  while (!done) {
    REQUIRE(esgrl_env_step(env, action.data(), ad, obs.data(), od, &reward, &done, &info) == ESGRL_OK);
    CHECK(info.phi == info.psi);
    CHECK(reward == info.raw_return);
    value *= 1 + info.raw_return;
    ++steps;
  }
  CHECK(steps == 89 - 59);
  CHECK(value > 0);
  CHECK(esgrl_env_step(env, action.data(), ad, obs.data(), od, &reward, &done, &info) == ESGRL_E_STATE);
  esgrl_env_free(env);

  CHECK(esgrl_env_create(ds, R"({"lambda": -1})", 0, 89, &env) == ESGRL_E_VALIDATION);
  CHECK(env == nullptr);
  esgrl_dataset_free(ds);
  esgrl_dataset_free(nullptr);
  esgrl_env_free(nullptr);

  CHECK(esgrl_dataset_synth("{", &ds) == ESGRL_E_PARSE);
  CHECK(esgrl_dataset_load("/nonexistent.csv", "/nonexistent_esg.csv", &ds) == ESGRL_E_IO);
}

TEST_CASE("synth, load and validate") {
  const auto spec = scratch("spec.json"), out = scratch("market.csv");
  std::ofstream(spec) << kSynth;
  char* esg = nullptr;
  REQUIRE(esgrl_synth(spec.c_str(), out.c_str(), &esg) == ESGRL_OK);
  const auto esg_path = take(esg);
  CHECK(std::filesystem::exists(esg_path));

  esgrl_dataset* ds = nullptr;
  REQUIRE(esgrl_dataset_load(out.c_str(), esg_path.c_str(), &ds) == ESGRL_OK);
  CHECK(esgrl_dataset_num_days(ds) == 90);
  esgrl_dataset_free(ds);

  const auto cfg = scratch("bad.json");
  std::ofstream(cfg) << R"({"seeds": [], "bogus": 1})";
  char* errors = nullptr;
  CHECK(esgrl_validate_config(cfg.c_str(), &errors) == ESGRL_E_VALIDATION);
  const auto listed = take(errors);
  CHECK(listed.find("bogus") != std::string::npos);
  CHECK(listed.find("seeds") != std::string::npos);
  CHECK(esgrl_report(scratch("no-run").c_str(), &errors) == ESGRL_E_NOT_FOUND);
  std::filesystem::remove_all(spec.parent_path());
}

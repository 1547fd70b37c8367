#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "esgrl/esgrl.h"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

int exit_code(esgrl_status s) {
  switch (s) {
    case ESGRL_OK: return kOk;
    case ESGRL_E_VALIDATION:
    case ESGRL_E_PARSE:
    case ESGRL_E_INVALID_ARGUMENT: return kValidationFailure;
    default: return kRuntimeFailure;
  }
}

int report_error(const char* what, esgrl_status s) {
  std::fprintf(stderr, "esgrl %s: %s error: %s\n", what, esgrl_status_name(s), esgrl_last_error());
  return exit_code(s);
}

void print_owned(char* s) {
  if (!s) return;
  std::fputs(s, stdout);
  esgrl_free_string(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ESG-regulated portfolio RL laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", esgrl_version());

  std::string config, out_dir, run_dir, spec, out_csv, returns_csv, var_method = "empirical";
  int parallel = 0;
  double periods = 252.0;

  auto* validate = app.add_subcommand("validate", "Check a config file and list every problem");
  validate->add_option("config", config, "Experiment config (JSON)")->required();

  auto* run = app.add_subcommand("run", "Train, evaluate and report every grid cell and seed");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* report = app.add_subcommand("report", "Rebuild summary tables and charts of a run directory");
  report->add_option("run-dir", run_dir, "Directory written by `esgrl run`")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic market as OHLCV and ESG CSV files");
  synth->add_option("spec", spec, "Synthetic market spec (JSON)")->required();
  synth->add_option("--out", out_csv, "OHLCV CSV path; ESG goes to <stem>_esg.csv")->required();

  auto* metrics = app.add_subcommand("metrics", "Risk-performance metrics of a daily returns CSV");
  metrics->add_option("returns", returns_csv, "CSV with one return per row (last column)")->required();
  metrics->add_option("--periods-per-year", periods, "Annualization factor")->check(CLI::PositiveNumber);
  metrics->add_option("--var", var_method, "VaR method")->check(CLI::IsMember({"empirical", "gaussian"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidationFailure;
  }

  if (*validate) {
    char* errors = nullptr;
    const auto s = esgrl_validate_config(config.c_str(), &errors);
    if (s == ESGRL_OK) {
      std::printf("%s: ok\n", config.c_str());
      return kOk;
    }
    if (errors) {
      std::fprintf(stderr, "%s: invalid\n%s", config.c_str(), errors);
      esgrl_free_string(errors);
    } else {
      std::fprintf(stderr, "%s: %s\n", config.c_str(), esgrl_last_error());
    }
    return kValidationFailure;
  }
  if (*run) {
    char* dir = nullptr;
    const auto s = esgrl_run_experiment(config.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), parallel, &dir);
    if (s != ESGRL_OK) {
      esgrl_free_string(dir);
      return report_error("run", s);
    }
    std::ifstream table(std::string(dir) + "/summary.txt");
    esgrl_free_string(dir);
    std::cout << table.rdbuf();
    return kOk;
  }
  if (*report) {
    char* table = nullptr;
    const auto s = esgrl_report(run_dir.c_str(), &table);
    if (s != ESGRL_OK) return report_error("report", s);
    print_owned(table);
    return kOk;
  }
  if (*synth) {
    char* esg = nullptr;
    const auto s = esgrl_synth(spec.c_str(), out_csv.c_str(), &esg);
    if (s != ESGRL_OK) return report_error("synth", s);
    std::printf("wrote %s and %s\n", out_csv.c_str(), esg);
    esgrl_free_string(esg);
    return kOk;
  }
  if (*metrics) {
    char* json = nullptr;
    const auto s = esgrl_metrics_file(returns_csv.c_str(), periods, var_method.c_str(), &json);
    if (s != ESGRL_OK) return report_error("metrics", s);
    print_owned(json);
    std::printf("\n");
    return kOk;
  }
  return kValidationFailure;
}

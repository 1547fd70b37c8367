#ifndef ESGRL_HARNESS_HPP_
#define ESGRL_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "esgrl/agents.hpp"
#include "esgrl/analytics.hpp"
#include "esgrl/env.hpp"
#include "esgrl/indicators.hpp"
#include "esgrl/marketdata.hpp"

namespace esgrl {

// Reads ESGRL_LOG (trace|debug|info|warn|error|off, default info) once.
void init_logging();

struct SynthSource {
  SynthSpec spec;
  std::size_t days = 0;
  std::uint64_t seed = 0;
};

struct DataSource {
  // Either both CSV paths or a synthetic market.
  std::string ohlcv_path;
  std::string esg_path;
  std::vector<std::string> tickers;  // optional filter
  std::optional<SynthSource> synth;
};

struct GridCell {
  bool regulate = true;
  bool esg_in_state = true;

  // e.g. "regulated-esg", "free-noesg"
  std::string id() const;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct ExperimentConfig {
  DataSource data;
  Date train_end;
  Date trade_end;
  IndicatorConfig indicators;
  EnvConfig env;
  std::vector<AgentHyper> agents;  // one per algorithm, seed filled per run
  std::vector<BaselineSpec> baselines;
  std::vector<std::uint64_t> seeds;
  std::vector<GridCell> grid;
  MetricsOptions metrics;
  std::string output_dir = "runs";
  std::size_t parallel = 1;

  // Fully resolved JSON (defaults filled in); accepted back by parse_config.
  std::string to_json() const;
  // Hash of everything that affects results (not output_dir or parallel).
  std::uint64_t hash() const;
};

// Throws kValidation whose message lists every problem, one per line.
// Relative data paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
// Empty when the file is valid.
std::vector<std::string> config_errors(const std::string& path);

SynthSource parse_synth_spec(std::string_view json_text);
// An env block that may also carry "regulate" and "esg_in_state".
EnvConfig parse_env_config(std::string_view json_text);

AlignedDataset load_dataset(const DataSource& src);

struct RunRecord {
  std::string cell;
  std::string algorithm;  // empty for baselines
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EpisodeResult episode;
  MetricsReport metrics;
  std::string train_log_path;
  std::string checkpoint_path;
  double wall_seconds = 0.0;
};

struct SummaryRow {
  std::string cell;
  Metric metric = Metric::kAnnualReturn;
  double mean = 0.0;
  double stddev = 0.0;  // sample std; 0 when n == 1
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;  // degenerate values left out

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;  // grouped by cell, metrics in kAllMetrics order

  const SummaryRow* find(std::string_view cell, Metric m) const;
  std::vector<std::string> cells() const;

  // `cell,metric,mean,std,min,max,n,excluded`
  std::string to_csv() const;
  static SummaryTable from_csv(std::string_view text);
  std::string to_json() const;
  // Metrics as rows, cells as columns, "mean ± std".
  std::string to_text() const;

  friend bool operator==(const SummaryTable&, const SummaryTable&) = default;
};

// Successful records only; cells keep first-seen order. Throws on empty input.
SummaryTable aggregate(const std::vector<RunRecord>& records);

// Adds "all-<grid cell>" records pooling every algorithm.
std::vector<RunRecord> pooled_view(const std::vector<RunRecord>& records);

// `cell,algorithm,seed,status,<metric keys...>`
std::string runs_csv(const std::vector<RunRecord>& records);
// Successful rows of runs_csv back into records (metrics only).
std::vector<RunRecord> records_from_runs_csv(std::string_view text);

struct ExperimentResult {
  std::string run_dir;
  std::vector<RunRecord> records;  // grid runs, then baselines
  SummaryTable summary;
  std::size_t failures = 0;
};

// Runs every (algorithm x grid cell x seed) plus the baselines and writes
// the report bundle under cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes summary.csv, summary.json, runs.csv, summary.txt and equity.svg.
void emit_report(const std::vector<RunRecord>& records, const SummaryTable& table, const std::string& out_dir);

// Rebuilds the report files of an existing run directory; returns the text table.
std::string report_run_dir(const std::string& run_dir);

// `cumulative return vs date` chart: mean equity curve per cell.
std::string equity_svg(const std::vector<RunRecord>& records);

// One column of returns, optional header, optional leading date column.
std::vector<double> load_returns_csv(const std::string& path);

}  // namespace esgrl

#endif  // ESGRL_HARNESS_HPP_

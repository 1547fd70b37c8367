#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "esgrl/error.hpp"
#include "esgrl/harness.hpp"

namespace esgrl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> f;
  std::size_t p = 0;
  while (true) {
    auto c = line.find(',', p);
    f.emplace_back(line.substr(p, c == line.npos ? line.npos : c - p));
    if (c == line.npos) break;
    p = c + 1;
  }
  return f;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  fail(ErrorKind::kParse, where + ": bad number '" + s + "'");
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

const SummaryRow* SummaryTable::find(std::string_view cell, Metric m) const {
  for (const auto& r : rows)
    if (r.cell == cell && r.metric == m) return &r;
  return nullptr;
}

std::vector<std::string> SummaryTable::cells() const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.cell) == out.end()) out.push_back(r.cell);
  return out;
}

std::string SummaryTable::to_csv() const {
  std::string out = "cell,metric,mean,std,min,max,n,excluded\n";
  for (const auto& r : rows) {
    out += r.cell + "," + metric_key(r.metric) + ",";
    if (r.n > 0) out += fmt(r.mean) + "," + fmt(r.stddev) + "," + fmt(r.min) + "," + fmt(r.max);
    else out += ",,,";
    out += "," + std::to_string(r.n) + "," + std::to_string(r.excluded) + "\n";
  }
  return out;
}

SummaryTable SummaryTable::from_csv(std::string_view text) {
  SummaryTable t;
  auto lines = lines_of(text);
  require(!lines.empty() && lines[0] == "cell,metric,mean,std,min,max,n,excluded", ErrorKind::kParse,
          "summary CSV: unexpected header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "summary CSV line " + std::to_string(i + 1);
    auto f = split_line(lines[i]);
    require(f.size() == 8, ErrorKind::kParse, where + ": expected 8 fields");
    SummaryRow r;
    r.cell = f[0];
    auto m = metric_from_key(f[1]);
    require(m.has_value(), ErrorKind::kParse, where + ": unknown metric '" + f[1] + "'");
    r.metric = *m;
    r.n = static_cast<std::size_t>(parse_double(f[6], where));
    r.excluded = static_cast<std::size_t>(parse_double(f[7], where));
    if (r.n > 0) {
      r.mean = parse_double(f[2], where);
      r.stddev = parse_double(f[3], where);
      r.min = parse_double(f[4], where);
      r.max = parse_double(f[5], where);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string SummaryTable::to_json() const {
  json cells_json = json::object();
  for (const auto& cell : cells()) {
    json metrics = json::object();
    for (const auto& r : rows) {
      if (r.cell != cell) continue;
      json jr{{"n", r.n}, {"excluded", r.excluded}};
      if (r.n > 0) {
        jr["mean"] = r.mean;
        jr["std"] = r.stddev;
        jr["min"] = r.min;
        jr["max"] = r.max;
      }
      metrics[metric_key(r.metric)] = jr;
    }
    cells_json[cell] = metrics;
  }
  return json{{"cells", cells_json}}.dump(2);
}

std::string SummaryTable::to_text() const {
  const auto cs = cells();
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Metric"};
  header.insert(header.end(), cs.begin(), cs.end());
  grid.push_back(header);
  for (auto m : kAllMetrics) {
    std::vector<std::string> row{metric_label(m)};
    for (const auto& c : cs) {
      const auto* r = find(c, m);
      if (!r || r->n == 0) row.push_back("undefined");
      else if (r->n == 1) row.push_back(fixed(r->mean, 4));
      else row.push_back(fixed(r->mean, 4) + " ± " + fixed(r->stddev, 3));
      if (r && r->excluded > 0) row.back() += " (" + std::to_string(r->excluded) + " undef)";
    }
    grid.push_back(std::move(row));
  }
  auto width = [](const std::string& s) {
    // Count code points so the ± sign takes one column.
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> w(header.size(), 0);
  for (const auto& row : grid)
    for (std::size_t k = 0; k < row.size(); ++k) w[k] = std::max(w[k], width(row[k]));
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t k = 0; k < grid[i].size(); ++k) {
      const auto& s = grid[i][k];
      if (k) out += "  ";
      if (k == 0) out += s + std::string(w[k] - width(s), ' ');
      else out += std::string(w[k] - width(s), ' ') + s;
    }
    out += "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto x : w) total += x;
      out += std::string(total + 2 * (w.size() - 1), '-') + "\n";
    }
  }
  return out;
}

SummaryTable aggregate(const std::vector<RunRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> by_cell;
  for (const auto& r : records) {
    if (!r.ok) continue;
    if (!by_cell.count(r.cell)) order.push_back(r.cell);
    by_cell[r.cell].push_back(&r);
  }
  require(!order.empty(), ErrorKind::kInvalidArgument, "aggregate: no successful records");
  SummaryTable t;
  for (const auto& cell : order) {
    for (auto m : kAllMetrics) {
      SummaryRow row;
      row.cell = cell;
      row.metric = m;
      std::vector<double> xs;
      for (const auto* r : by_cell[cell]) {
        if (r->metrics[m]) xs.push_back(*r->metrics[m]);
        else ++row.excluded;
      }
      row.n = xs.size();
      if (!xs.empty()) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        row.mean = sum / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - row.mean) * (x - row.mean);
        row.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        row.min = *std::min_element(xs.begin(), xs.end());
        row.max = *std::max_element(xs.begin(), xs.end());
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::string out = "cell,algorithm,seed,status," + MetricsReport::csv_header() + "\n";
  for (const auto& r : records) {
    out += r.cell + "," + r.algorithm + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed") + ",";
    out += r.ok ? r.metrics.csv_row() : std::string(kMetricCount - 1, ',');
    out += "\n";
  }
  return out;
}

std::vector<RunRecord> records_from_runs_csv(std::string_view text) {
  auto lines = lines_of(text);
  require(!lines.empty() && lines[0] == "cell,algorithm,seed,status," + MetricsReport::csv_header(),
          ErrorKind::kParse, "runs CSV: unexpected header");
  std::vector<RunRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "runs CSV line " + std::to_string(i + 1);
    auto f = split_line(lines[i]);
    require(f.size() == 4 + kMetricCount, ErrorKind::kParse, where + ": wrong field count");
    if (f[3] != "ok") continue;
    RunRecord r;
    r.cell = f[0];
    r.algorithm = f[1];
    r.seed = static_cast<std::uint64_t>(std::stoull(f[2]));
    r.ok = true;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
      if (!f[4 + k].empty()) r.metrics[kAllMetrics[k]] = parse_double(f[4 + k], where);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string equity_svg(const std::vector<RunRecord>& records) {
  // Mean cumulative-return curve per cell over its successful runs.
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> sum;
  std::map<std::string, std::size_t> count;
  for (const auto& r : records) {
    if (!r.ok || r.cell.rfind("all-", 0) == 0) continue;
    auto& s = sum[r.cell];
    if (!count[r.cell]++) order.push_back(r.cell);
    if (s.size() < r.episode.steps() + 1) s.resize(r.episode.steps() + 1, 0.0);
    for (std::size_t i = 0; i < r.episode.steps(); ++i) s[i + 1] += r.episode.values[i] - 1.0;
  }
  constexpr double W = 800, H = 450, L = 70, R = 220, T = 30, B = 50;
  double lo = 0.0, hi = 0.0;
  std::size_t len = 1;
  for (auto& [cell, s] : sum) {
    for (auto& v : s) v /= static_cast<double>(count[cell]);
    for (double v : s) lo = std::min(lo, v), hi = std::max(hi, v);
    len = std::max(len, s.size());
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto x_of = [&](std::size_t i) { return L + (W - L - R) * static_cast<double>(i) / std::max<double>(1, len - 1); };
  auto y_of = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };

  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79"};
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">Cumulative return</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << fixed(y_of(v) + 4, 1)
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fixed(v, 3) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">trading day</text>\n";
  std::size_t colour = 0;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& cell = order[c];
    const bool stratified = cell == "baseline-stratified";
    const std::string stroke = stratified ? "#d62728" : kPalette[colour++ % 10];
    const auto& s = sum[cell];
    o << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\""
      << (cell.rfind("baseline-", 0) == 0 && !stratified ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.size(); ++i) o << (i ? " " : "") << fixed(x_of(i), 2) << "," << fixed(y_of(s[i]), 2);
    o << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(c);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << xml_escape(cell) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_report(const std::vector<RunRecord>& records, const SummaryTable& table, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorKind::kIo, "cannot create report directory '" + out_dir + "'");
  write_text_file(out_dir + "/summary.csv", table.to_csv());
  write_text_file(out_dir + "/summary.json", table.to_json() + "\n");
  write_text_file(out_dir + "/summary.txt", table.to_text());
  write_text_file(out_dir + "/runs.csv", runs_csv(records));
  write_text_file(out_dir + "/equity.svg", equity_svg(records));
}

std::string report_run_dir(const std::string& run_dir) {
  const std::string manifest_path = run_dir + "/manifest.json";
  require(fs::exists(manifest_path), ErrorKind::kNotFound, "no manifest.json in '" + run_dir + "'");
  json m;
  try {
    m = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("manifest.json: ") + e.what());
  }
  MetricsOptions opts;
  try {
    const auto& jm = m.at("config").at("metrics");
    opts.periods_per_year = jm.at("periods_per_year").get<double>();
    opts.var_cutoff = jm.at("var_cutoff").get<double>();
    opts.var_method = jm.at("var_method").get<std::string>() == "gaussian" ? VarMethod::kGaussian
                                                                          : VarMethod::kEmpirical;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("manifest.json: bad metrics settings: ") + e.what());
  }

  std::vector<RunRecord> records;
  for (const auto& jr : m.at("runs")) {
    RunRecord r;
    r.cell = jr.at("cell").get<std::string>();
    r.algorithm = jr.value("algorithm", std::string());
    r.seed = jr.at("seed").get<std::uint64_t>();
    r.ok = jr.at("status").get<std::string>() == "ok";
    r.error = jr.value("error", std::string());
    if (r.ok) {
      const std::string dir = run_dir + "/runs/" + r.cell + (r.algorithm.empty() ? "" : "/seed-" + std::to_string(r.seed));
      r.episode = EpisodeResult::from_trace_csv(read_text_file(dir + "/trace.csv"));
      const auto equity = read_text_file(dir + "/equity.csv");
      const auto eq = lines_of(equity);
      require(eq.size() >= 2, ErrorKind::kParse, dir + "/equity.csv: missing rows");
      r.episode.start_date = Date::parse(split_line(eq[1])[0]);
      r.metrics = compute_metrics(r.episode.value_returns(), opts);
    }
    records.push_back(std::move(r));
  }
  if (m.value("pooled", false)) {
    auto pooled = pooled_view(records);
    records.insert(records.end(), pooled.begin(), pooled.end());
  }
  const auto table = aggregate(records);
  emit_report(records, table, run_dir);
  return table.to_text();
}

std::vector<double> load_returns_csv(const std::string& path) {
  const auto text = read_text_file(path);
  std::vector<double> out;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    auto f = split_line(line);
    const std::string& last = f.back();
    char* end = nullptr;
    const double v = std::strtod(last.c_str(), &end);
    if (end == last.c_str() || *end != '\0') {
      require(lineno == 1, ErrorKind::kParse,
              path + " line " + std::to_string(lineno) + ": bad return value '" + last + "'");
      continue;  // header
    }
    out.push_back(v);
  }
  require(!out.empty(), ErrorKind::kParse, path + ": no returns found");
  return out;
}

}  // namespace esgrl

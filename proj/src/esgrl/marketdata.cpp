#include "esgrl/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "esgrl/error.hpp"
#include "esgrl/indicators.hpp"
#include "esgrl/rng.hpp"

namespace esgrl {
namespace {

constexpr double kEsgMax = 10.0;
constexpr std::string_view kDatasetMagic = "esgrl-dataset v1";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Yields (1-based line number, line) for every non-empty line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++lineno;
    line = trim(line);
    if (!line.empty()) fn(lineno, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

double parse_number(std::string_view field, std::size_t lineno, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": invalid " + what + " '" +
                                std::string(field) + "'");
  }
  return v;
}

Date parse_date_field(std::string_view field, std::size_t lineno) {
  auto d = Date::try_parse(field);
  if (!d) fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": invalid date '" + std::string(field) + "'");
  return *d;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_header(std::string_view got, std::string_view want, const char* what) {
  if (got != want) {
    fail(ErrorKind::kParse, std::string("line 1: ") + what + " header must be '" + std::string(want) +
                                "', got '" + std::string(got) + "'");
  }
}

}  // namespace

EsgRecord EsgRecord::from_scores(Date date, double e, double s, double g) {
  return EsgRecord{date, e, s, g, (e + s + g) / 3.0};
}

double esg_value(const EsgRecord& rec, EsgField field) {
  switch (field) {
    case EsgField::kMean: return rec.mean;
    case EsgField::kEnvironmental: return rec.e;
    case EsgField::kSocial: return rec.s;
    case EsgField::kGovernance: return rec.g;
  }
  return rec.mean;
}

EsgField esg_field_from_string(std::string_view name) {
  if (name == "mean") return EsgField::kMean;
  if (name == "e") return EsgField::kEnvironmental;
  if (name == "s") return EsgField::kSocial;
  if (name == "g") return EsgField::kGovernance;
  fail(ErrorKind::kValidation, "unknown esg field '" + std::string(name) + "' (mean|e|s|g)");
}

const char* to_string(EsgField field) {
  switch (field) {
    case EsgField::kMean: return "mean";
    case EsgField::kEnvironmental: return "e";
    case EsgField::kSocial: return "s";
    case EsgField::kGovernance: return "g";
  }
  return "mean";
}

void validate_bar(const OhlcvBar& bar, const std::string& ticker) {
  auto where = [&] { return ticker + " on " + bar.date.to_string(); };
  if (!(bar.open > 0 && bar.high > 0 && bar.low > 0 && bar.close > 0)) {
    fail(ErrorKind::kValidation, "non-positive price for " + where());
  }
  if (!(bar.low <= bar.high)) fail(ErrorKind::kValidation, "high < low for " + where());
  if (!(bar.low <= bar.open && bar.open <= bar.high)) {
    fail(ErrorKind::kValidation, "open outside [low, high] for " + where());
  }
  if (!(bar.low <= bar.close && bar.close <= bar.high)) {
    fail(ErrorKind::kValidation, "close outside [low, high] for " + where());
  }
  if (!(bar.volume >= 0)) fail(ErrorKind::kValidation, "negative volume for " + where());
}

MarketTable parse_ohlcv(std::string_view csv_text, const std::vector<std::string>& ticker_filter) {
  std::map<std::string, std::vector<OhlcvBar>> by_ticker;
  bool header_seen = false;
  for_each_line(csv_text, [&](std::size_t lineno, std::string_view line) {
    if (!header_seen) {
      check_header(line, "date,ticker,open,high,low,close,volume", "OHLCV");
      header_seen = true;
      return;
    }
    auto f = split_fields(line);
    if (f.size() != 7) {
      fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": expected 7 fields, got " +
                                  std::to_string(f.size()));
    }
    if (f[1].empty()) fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": empty ticker");
    OhlcvBar bar{parse_date_field(f[0], lineno), parse_number(f[2], lineno, "open"),
                 parse_number(f[3], lineno, "high"),  parse_number(f[4], lineno, "low"),
                 parse_number(f[5], lineno, "close"), parse_number(f[6], lineno, "volume")};
    std::string ticker(f[1]);
    validate_bar(bar, ticker);
    by_ticker[ticker].push_back(bar);
  });
  if (!header_seen) fail(ErrorKind::kParse, "empty OHLCV file");

  MarketTable table;
  auto add = [&](const std::string& ticker, std::vector<OhlcvBar> bars) {
    std::stable_sort(bars.begin(), bars.end(),
                     [](const OhlcvBar& a, const OhlcvBar& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < bars.size(); ++i) {
      if (bars[i].date == bars[i - 1].date) {
        fail(ErrorKind::kValidation, "duplicate bar for " + ticker + " on " + bars[i].date.to_string());
      }
    }
    table.tickers.push_back(ticker);
    table.series.push_back(std::move(bars));
  };
  if (ticker_filter.empty()) {
    for (auto& [ticker, bars] : by_ticker) add(ticker, std::move(bars));
  } else {
    for (const auto& ticker : ticker_filter) {
      auto it = by_ticker.find(ticker);
      if (it == by_ticker.end()) fail(ErrorKind::kNotFound, "ticker '" + ticker + "' not present in OHLCV data");
      add(ticker, it->second);
    }
  }
  if (table.tickers.empty()) fail(ErrorKind::kValidation, "OHLCV file has no rows");
  return table;
}

MarketTable load_ohlcv(const std::string& path, const std::vector<std::string>& ticker_filter) {
  return parse_ohlcv(read_text_file(path), ticker_filter);
}

EsgTable parse_esg(std::string_view csv_text) {
  std::map<std::string, std::vector<EsgRecord>> by_ticker;
  bool header_seen = false;
  for_each_line(csv_text, [&](std::size_t lineno, std::string_view line) {
    if (!header_seen) {
      check_header(line, "date,ticker,e,s,g", "ESG");
      header_seen = true;
      return;
    }
    auto f = split_fields(line);
    if (f.size() != 5) {
      fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": expected 5 fields, got " +
                                  std::to_string(f.size()));
    }
    if (f[1].empty()) fail(ErrorKind::kParse, "line " + std::to_string(lineno) + ": empty ticker");
    Date date = parse_date_field(f[0], lineno);
    double scores[3];
    const char* names[3] = {"e", "s", "g"};
    for (int k = 0; k < 3; ++k) {
      scores[k] = parse_number(f[2 + k], lineno, names[k]);
      if (scores[k] < 0.0 || scores[k] > kEsgMax) {
        fail(ErrorKind::kValidation, "line " + std::to_string(lineno) + ": " + names[k] + " score " +
                                         fmt_double(scores[k]) + " for " + std::string(f[1]) +
                                         " outside [0, 10]");
      }
    }
    by_ticker[std::string(f[1])].push_back(EsgRecord::from_scores(date, scores[0], scores[1], scores[2]));
  });
  if (by_ticker.empty()) fail(ErrorKind::kValidation, "ESG file has no records");

  EsgTable table;
  for (auto& [ticker, recs] : by_ticker) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const EsgRecord& a, const EsgRecord& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (recs[i].date == recs[i - 1].date) {
        fail(ErrorKind::kValidation, "duplicate ESG record for " + ticker + " on " + recs[i].date.to_string());
      }
    }
    table.tickers.push_back(ticker);
    table.records.push_back(std::move(recs));
  }
  return table;
}

EsgTable load_esg(const std::string& path) { return parse_esg(read_text_file(path)); }

AlignedDataset::AlignedDataset(std::vector<std::string> tickers, std::vector<Date> calendar,
                               std::vector<OhlcvBar> bars, std::vector<EsgRecord> esg,
                               std::vector<std::uint8_t> esg_observed)
    : tickers_(std::move(tickers)),
      calendar_(std::move(calendar)),
      bars_(std::move(bars)),
      esg_(std::move(esg)),
      esg_observed_(std::move(esg_observed)) {
  const std::size_t cells = tickers_.size() * calendar_.size();
  require(!tickers_.empty(), ErrorKind::kValidation, "dataset has no assets");
  require(bars_.size() == cells && esg_.size() == cells && esg_observed_.size() == cells,
          ErrorKind::kValidation, "dataset panel is not dense");
  for (std::size_t t = 1; t < calendar_.size(); ++t) {
    require(calendar_[t - 1] < calendar_[t], ErrorKind::kValidation, "calendar not strictly increasing");
  }
  for (std::size_t t = 0; t < calendar_.size(); ++t) {
    for (std::size_t a = 0; a < tickers_.size(); ++a) {
      const auto& b = bar(t, a);
      require(b.date == calendar_[t], ErrorKind::kValidation, "bar date does not match calendar");
      validate_bar(b, tickers_[a]);
    }
  }
}

std::vector<double> AlignedDataset::closes(std::size_t asset) const {
  std::vector<double> out(num_days());
  for (std::size_t t = 0; t < num_days(); ++t) out[t] = bar(t, asset).close;
  return out;
}

std::optional<std::size_t> AlignedDataset::last_index_at_or_before(Date date) const {
  auto it = std::upper_bound(calendar_.begin(), calendar_.end(), date);
  if (it == calendar_.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - calendar_.begin()) - 1;
}

AlignedDataset AlignedDataset::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= num_days(), ErrorKind::kInvalidArgument, "slice out of range");
  const std::size_t A = num_assets();
  return AlignedDataset(
      tickers_, {calendar_.begin() + begin, calendar_.begin() + end},
      {bars_.begin() + begin * A, bars_.begin() + end * A},
      {esg_.begin() + begin * A, esg_.begin() + end * A},
      {esg_observed_.begin() + begin * A, esg_observed_.begin() + end * A});
}

MarketTable AlignedDataset::to_market_table() const {
  MarketTable t;
  t.tickers = tickers_;
  t.series.resize(num_assets());
  for (std::size_t a = 0; a < num_assets(); ++a)
    for (std::size_t d = 0; d < num_days(); ++d) t.series[a].push_back(bar(d, a));
  return t;
}

EsgTable AlignedDataset::to_esg_table() const {
  EsgTable t;
  t.tickers = tickers_;
  t.records.resize(num_assets());
  for (std::size_t a = 0; a < num_assets(); ++a) {
    for (std::size_t d = 0; d < num_days(); ++d) {
      EsgRecord rec = esg(d, a);
      rec.date = calendar_[d];
      t.records[a].push_back(rec);
    }
  }
  return t;
}

bool AlignedDataset::same_values(const AlignedDataset& other) const {
  if (tickers_ != other.tickers_ || calendar_ != other.calendar_ || bars_ != other.bars_) return false;
  for (std::size_t i = 0; i < esg_.size(); ++i) {
    const auto &x = esg_[i], &y = other.esg_[i];
    if (x.e != y.e || x.s != y.s || x.g != y.g || x.mean != y.mean) return false;
  }
  return true;
}

std::string AlignedDataset::serialize() const {
  std::string out;
  out += kDatasetMagic;
  out += "\ntickers";
  for (const auto& t : tickers_) out += "," + t;
  out += "\ndays," + std::to_string(num_days()) + "\n";
  out += "date,ticker,open,high,low,close,volume,e,s,g,esg_mean,esg_observed\n";
  for (std::size_t d = 0; d < num_days(); ++d) {
    for (std::size_t a = 0; a < num_assets(); ++a) {
      const auto& b = bar(d, a);
      const auto& r = esg(d, a);
      out += calendar_[d].to_string() + "," + tickers_[a] + "," + fmt_double(b.open) + "," +
             fmt_double(b.high) + "," + fmt_double(b.low) + "," + fmt_double(b.close) + "," +
             fmt_double(b.volume) + "," + fmt_double(r.e) + "," + fmt_double(r.s) + "," +
             fmt_double(r.g) + "," + fmt_double(r.mean) + "," + (esg_observed(d, a) ? "1" : "0") + "\n";
    }
  }
  return out;
}

AlignedDataset AlignedDataset::deserialize(std::string_view text) {
  std::vector<std::string_view> lines;
  for_each_line(text, [&](std::size_t, std::string_view line) { lines.push_back(line); });
  require(lines.size() >= 4 && lines[0] == kDatasetMagic, ErrorKind::kParse,
          "not an esgrl-dataset v1 document");
  auto tick_fields = split_fields(lines[1]);
  require(tick_fields.size() >= 2 && tick_fields[0] == "tickers", ErrorKind::kParse, "line 2: expected tickers");
  std::vector<std::string> tickers(tick_fields.begin() + 1, tick_fields.end());
  auto day_fields = split_fields(lines[2]);
  require(day_fields.size() == 2 && day_fields[0] == "days", ErrorKind::kParse, "line 3: expected days");
  const auto T = static_cast<std::size_t>(parse_number(day_fields[1], 3, "day count"));
  const std::size_t A = tickers.size();
  require(lines.size() == 4 + T * A, ErrorKind::kParse, "dataset row count mismatch");

  std::vector<Date> calendar;
  std::vector<OhlcvBar> bars;
  std::vector<EsgRecord> esg;
  std::vector<std::uint8_t> observed;
  for (std::size_t i = 0; i < T * A; ++i) {
    const std::size_t lineno = 5 + i;
    auto f = split_fields(lines[4 + i]);
    require(f.size() == 12, ErrorKind::kParse, "line " + std::to_string(lineno) + ": expected 12 fields");
    Date date = parse_date_field(f[0], lineno);
    require(f[1] == tickers[i % A], ErrorKind::kParse, "line " + std::to_string(lineno) + ": ticker out of order");
    if (i % A == 0) calendar.push_back(date);
    bars.push_back({date, parse_number(f[2], lineno, "open"), parse_number(f[3], lineno, "high"),
                    parse_number(f[4], lineno, "low"), parse_number(f[5], lineno, "close"),
                    parse_number(f[6], lineno, "volume")});
    EsgRecord rec{date, parse_number(f[7], lineno, "e"), parse_number(f[8], lineno, "s"),
                  parse_number(f[9], lineno, "g"), parse_number(f[10], lineno, "esg_mean")};
    require(std::abs(rec.mean - (rec.e + rec.s + rec.g) / 3.0) <= 1e-12, ErrorKind::kValidation,
            "line " + std::to_string(lineno) + ": esg_mean inconsistent with e, s, g");
    esg.push_back(rec);
    observed.push_back(f[11] == "1" ? 1 : 0);
  }
  return AlignedDataset(std::move(tickers), std::move(calendar), std::move(bars), std::move(esg),
                        std::move(observed));
}

std::uint64_t AlignedDataset::fingerprint() const { return fnv1a(serialize()); }

std::string AlignedDataset::to_ohlcv_csv() const {
  std::string out = "date,ticker,open,high,low,close,volume\n";
  for (std::size_t d = 0; d < num_days(); ++d) {
    for (std::size_t a = 0; a < num_assets(); ++a) {
      const auto& b = bar(d, a);
      out += calendar_[d].to_string() + "," + tickers_[a] + "," + fmt_double(b.open) + "," +
             fmt_double(b.high) + "," + fmt_double(b.low) + "," + fmt_double(b.close) + "," +
             fmt_double(b.volume) + "\n";
    }
  }
  return out;
}

std::string AlignedDataset::to_esg_csv(bool monthly_only) const {
  std::string out = "date,ticker,e,s,g\n";
  for (std::size_t d = 0; d < num_days(); ++d) {
    if (monthly_only && d > 0 && calendar_[d].month() == calendar_[d - 1].month()) continue;
    for (std::size_t a = 0; a < num_assets(); ++a) {
      if (!esg_observed(d, a)) continue;
      const auto& r = esg(d, a);
      out += calendar_[d].to_string() + "," + tickers_[a] + "," + fmt_double(r.e) + "," +
             fmt_double(r.s) + "," + fmt_double(r.g) + "\n";
    }
  }
  return out;
}

AlignedDataset align_and_fill(const MarketTable& market, const EsgTable& esg) {
  require(!market.tickers.empty(), ErrorKind::kValidation, "market table is empty");
  std::vector<std::string> missing;
  std::vector<const std::vector<EsgRecord>*> esg_for(market.tickers.size(), nullptr);
  for (std::size_t a = 0; a < market.tickers.size(); ++a) {
    auto it = std::find(esg.tickers.begin(), esg.tickers.end(), market.tickers[a]);
    if (it == esg.tickers.end() || esg.records[it - esg.tickers.begin()].empty()) {
      missing.push_back(market.tickers[a]);
    } else {
      esg_for[a] = &esg.records[it - esg.tickers.begin()];
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& t : missing) list += (list.empty() ? "" : ", ") + t;
    fail(ErrorKind::kValidation, "no ESG records for: " + list);
  }

  std::vector<Date> calendar;
  for (const auto& b : market.series[0]) calendar.push_back(b.date);
  for (std::size_t a = 1; a < market.series.size(); ++a) {
    std::vector<Date> dates, merged;
    for (const auto& b : market.series[a]) dates.push_back(b.date);
    std::set_intersection(calendar.begin(), calendar.end(), dates.begin(), dates.end(),
                          std::back_inserter(merged));
    calendar = std::move(merged);
  }
  require(!calendar.empty(), ErrorKind::kValidation, "tickers share no common trading days");

  const std::size_t A = market.tickers.size();
  std::vector<OhlcvBar> bars(calendar.size() * A);
  std::vector<EsgRecord> esg_cells(calendar.size() * A);
  std::vector<std::uint8_t> observed(calendar.size() * A, 0);
  for (std::size_t a = 0; a < A; ++a) {
    const auto& series = market.series[a];
    const auto& recs = *esg_for[a];
    std::size_t si = 0;
    for (std::size_t d = 0; d < calendar.size(); ++d) {
      while (series[si].date < calendar[d]) ++si;
      bars[d * A + a] = series[si];

      auto next = std::lower_bound(recs.begin(), recs.end(), calendar[d],
                                   [](const EsgRecord& r, Date day) { return r.date < day; });
      const EsgRecord* chosen = nullptr;
      if (next != recs.end() && next->date == calendar[d]) {
        chosen = &*next;
        observed[d * A + a] = 1;
      } else if (next == recs.end()) {
        chosen = &recs.back();
      } else if (next == recs.begin()) {
        chosen = &*next;
      } else {
        const auto& prev = *(next - 1);
        const long before = calendar[d].days_since_epoch() - prev.date.days_since_epoch();
        const long after = next->date.days_since_epoch() - calendar[d].days_since_epoch();
        chosen = after < before ? &*next : &prev;
      }
      EsgRecord cell = *chosen;
      cell.date = calendar[d];
      esg_cells[d * A + a] = cell;
    }
  }
  return AlignedDataset(market.tickers, std::move(calendar), std::move(bars), std::move(esg_cells),
                        std::move(observed));
}

DatasetSplit split(const AlignedDataset& ds, Date train_end, Date trade_end) {
  require(ds.num_days() > 0, ErrorKind::kValidation, "cannot split an empty dataset");
  require(train_end < trade_end, ErrorKind::kValidation,
          "train_end " + train_end.to_string() + " must precede trade_end " + trade_end.to_string());
  const Date first = ds.calendar().front(), last = ds.calendar().back();
  require(train_end >= first && train_end <= last, ErrorKind::kValidation,
          "train_end " + train_end.to_string() + " outside calendar [" + first.to_string() + ", " +
              last.to_string() + "]");
  require(trade_end <= last, ErrorKind::kValidation,
          "trade_end " + trade_end.to_string() + " beyond calendar end " + last.to_string());
  const std::size_t train_count = *ds.last_index_at_or_before(train_end) + 1;
  const std::size_t trade_count = *ds.last_index_at_or_before(trade_end) + 1;
  require(trade_count > train_count, ErrorKind::kValidation,
          "trade period after " + train_end.to_string() + " is empty");
  return DatasetSplit{ds.slice(0, train_count), ds.slice(train_count, trade_count), train_count};
}

std::size_t synth_min_days() { return IndicatorConfig{}.warmup_start() + 2; }

AlignedDataset synth_market(const SynthSpec& spec, std::size_t days, std::uint64_t seed) {
  require(!spec.assets.empty(), ErrorKind::kValidation, "synthetic market needs at least one asset");
  require(days >= synth_min_days(), ErrorKind::kValidation,
          "synthetic market needs at least " + std::to_string(synth_min_days()) +
              " days to cover the indicator warm-up");
  require(std::isfinite(spec.initial_price) && spec.initial_price > 0, ErrorKind::kValidation,
          "initial price must be positive");
  require(spec.market_factor >= 0.0 && spec.market_factor <= 1.0, ErrorKind::kValidation,
          "market_factor must lie in [0, 1]");
  std::vector<std::string> tickers;
  for (const auto& a : spec.assets) {
    require(!a.ticker.empty(), ErrorKind::kValidation, "synthetic asset without ticker");
    require(std::find(tickers.begin(), tickers.end(), a.ticker) == tickers.end(), ErrorKind::kValidation,
            "duplicate synthetic ticker " + a.ticker);
    require(std::isfinite(a.drift) && std::isfinite(a.volatility) && a.volatility >= 0.0 &&
                std::isfinite(a.esg_slope),
            ErrorKind::kValidation, "drift/volatility of " + a.ticker + " must be finite, volatility >= 0");
    for (double score : {a.e, a.s, a.g}) {
      require(score >= 0.0 && score <= kEsgMax, ErrorKind::kValidation,
              "ESG score of " + a.ticker + " outside [0, 10]");
    }
    tickers.push_back(a.ticker);
  }

  std::vector<Date> calendar;
  Date d = spec.start;
  while (calendar.size() < days) {
    if (!d.is_weekend()) calendar.push_back(d);
    d = d.plus_days(1);
  }

  const std::size_t A = spec.assets.size();
  Rng rng(seed);
  std::vector<double> prev_close(A, spec.initial_price);
  std::vector<OhlcvBar> bars(days * A);
  std::vector<EsgRecord> esg(days * A);
  const double common = std::sqrt(spec.market_factor);
  const double idio = std::sqrt(1.0 - spec.market_factor);
  for (std::size_t t = 0; t < days; ++t) {
    const double market_shock = rng.normal();
    for (std::size_t a = 0; a < A; ++a) {
      const auto& asset = spec.assets[a];
      const double eps = rng.normal();
      const double wick_up = std::abs(rng.normal());
      const double wick_down = std::abs(rng.normal());
      const double vol_draw = rng.uniform();
      const double z = common * market_shock + idio * eps;
      const double open = prev_close[a];
      const double close = t == 0 ? open : open * std::exp(asset.drift + asset.volatility * z);
      const double high = std::max(open, close) * (1.0 + 0.5 * asset.volatility * wick_up);
      const double low = std::min(open, close) * std::exp(-0.5 * asset.volatility * wick_down);
      bars[t * A + a] = OhlcvBar{calendar[t], open, high, low, close, 1.0e6 * (1.0 + 0.2 * vol_draw)};
      prev_close[a] = close;

      auto score = [&](double base) {
        return std::clamp(base + asset.esg_slope * static_cast<double>(t), 0.0, kEsgMax);
      };
      esg[t * A + a] = EsgRecord::from_scores(calendar[t], score(asset.e), score(asset.s), score(asset.g));
    }
  }
  return AlignedDataset(std::move(tickers), std::move(calendar), std::move(bars), std::move(esg),
                        std::vector<std::uint8_t>(days * A, 1));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace esgrl

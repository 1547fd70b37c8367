#ifndef ESGRL_MARKETDATA_HPP_
#define ESGRL_MARKETDATA_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "esgrl/date.hpp"

namespace esgrl {

struct OhlcvBar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const OhlcvBar&, const OhlcvBar&) = default;
};

struct EsgRecord {
  Date date;
  double e = 0.0;
  double s = 0.0;
  double g = 0.0;
  double mean = 0.0;

  static EsgRecord from_scores(Date date, double e, double s, double g);
  friend bool operator==(const EsgRecord&, const EsgRecord&) = default;
};

// Which ESG score drives portfolio ESG accounting.
enum class EsgField { kMean, kEnvironmental, kSocial, kGovernance };

double esg_value(const EsgRecord& rec, EsgField field);
EsgField esg_field_from_string(std::string_view name);
const char* to_string(EsgField field);

// Throws kValidation naming ticker and date when the bar is inconsistent.
void validate_bar(const OhlcvBar& bar, const std::string& ticker);

struct MarketTable {
  std::vector<std::string> tickers;
  std::vector<std::vector<OhlcvBar>> series;  // parallel to tickers, date-sorted
};

struct EsgTable {
  std::vector<std::string> tickers;
  std::vector<std::vector<EsgRecord>> records;  // parallel to tickers, date-sorted
};

// CSV `date,ticker,open,high,low,close,volume`. Tickers come out in
// lexicographic order, or in filter order when a filter is given.
MarketTable parse_ohlcv(std::string_view csv_text,
                        const std::vector<std::string>& ticker_filter = {});
MarketTable load_ohlcv(const std::string& path,
                       const std::vector<std::string>& ticker_filter = {});

// CSV `date,ticker,e,s,g`.
EsgTable parse_esg(std::string_view csv_text);
EsgTable load_esg(const std::string& path);

// Dense (day x asset) panel on a shared trading calendar. Immutable once
// built.
class AlignedDataset {
 public:
  AlignedDataset() = default;
  AlignedDataset(std::vector<std::string> tickers, std::vector<Date> calendar,
                 std::vector<OhlcvBar> bars, std::vector<EsgRecord> esg,
                 std::vector<std::uint8_t> esg_observed);

  std::size_t num_days() const { return calendar_.size(); }
  std::size_t num_assets() const { return tickers_.size(); }
  const std::vector<std::string>& tickers() const { return tickers_; }
  const std::vector<Date>& calendar() const { return calendar_; }

  const OhlcvBar& bar(std::size_t day, std::size_t asset) const {
    return bars_[day * tickers_.size() + asset];
  }
  const EsgRecord& esg(std::size_t day, std::size_t asset) const {
    return esg_[day * tickers_.size() + asset];
  }
  bool esg_observed(std::size_t day, std::size_t asset) const {
    return esg_observed_[day * tickers_.size() + asset] != 0;
  }
  std::vector<double> closes(std::size_t asset) const;

  // Index of the last calendar day <= date, if any.
  std::optional<std::size_t> last_index_at_or_before(Date date) const;

  // Days [begin, end).
  AlignedDataset slice(std::size_t begin, std::size_t end) const;

  MarketTable to_market_table() const;
  // One record per calendar day, filled values included.
  EsgTable to_esg_table() const;

  // Same calendar, prices and ESG values; provenance flags are ignored.
  bool same_values(const AlignedDataset& other) const;

  // `esgrl-dataset v1` columnar text.
  std::string serialize() const;
  static AlignedDataset deserialize(std::string_view text);

  // FNV-1a over the serialized form.
  std::uint64_t fingerprint() const;

  // OHLCV rows in the ingestion CSV schema.
  std::string to_ohlcv_csv() const;
  // Observed ESG rows only; monthly_only keeps the first trading day of
  // each month, mimicking sparse vendor data.
  std::string to_esg_csv(bool monthly_only = false) const;

 private:
  std::vector<std::string> tickers_;
  std::vector<Date> calendar_;
  std::vector<OhlcvBar> bars_;
  std::vector<EsgRecord> esg_;
  std::vector<std::uint8_t> esg_observed_;
};

// Calendar = intersection of trading days; ESG per day = nearest record,
// ties going to the earlier record.
AlignedDataset align_and_fill(const MarketTable& market, const EsgTable& esg);

struct DatasetSplit {
  AlignedDataset train;
  AlignedDataset trade;
  std::size_t trade_begin = 0;  // index of the first trade day in the source
};

// train = days <= train_end, trade = days in (train_end, trade_end].
DatasetSplit split(const AlignedDataset& ds, Date train_end, Date trade_end);

struct SynthAsset {
  std::string ticker;
  double drift = 0.0;       // mean daily log return
  double volatility = 0.0;  // daily log-return std
  double e = 5.0;
  double s = 5.0;
  double g = 5.0;
  double esg_slope = 0.0;   // score change per day, applied to e, s and g
};

struct SynthSpec {
  std::vector<SynthAsset> assets;
  Date start = Date(2009, 1, 2);
  double initial_price = 100.0;
  // Share of each daily shock variance coming from a common market factor.
  double market_factor = 0.0;
};

// Smallest `days` accepted by synth_market: enough for the default indicator
// warm-up plus a two-day usable range.
std::size_t synth_min_days();

// Geometric random walk on business days. Bit-identical for equal inputs.
AlignedDataset synth_market(const SynthSpec& spec, std::size_t days, std::uint64_t seed);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace esgrl

#endif  // ESGRL_MARKETDATA_HPP_

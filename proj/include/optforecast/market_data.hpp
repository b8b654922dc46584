#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace optforecast::market_data {

/// Calendar day as days since 1970-01-01, printed/parsed as YYYY-MM-DD.
struct Date {
  std::int32_t days = 0;

  static Date parse(std::string_view iso);
  std::string to_string() const;
  auto operator<=>(const Date&) const = default;
};

/// One trading day of a single option contract and its underlying.
struct QuoteRecord {
  Date date;
  double option_bid = 0;   // ub
  double option_ask = 0;   // ua
  double stock_bid = 0;    // sb
  double stock_ask = 0;    // sa
  double strike = 0;       // K
  double implied_vol = 0;  // sigma
  double rate = 0;         // r

  double option_mid() const { return 0.5 * (option_bid + option_ask); }
  double stock_mid() const { return 0.5 * (stock_bid + stock_ask); }
  bool operator==(const QuoteRecord&) const = default;
};

/// Throws ValidationError naming the first violated field. `row` is carried
/// into the error for file-level reporting.
void validate(const QuoteRecord& rec, std::size_t row = 0);

/// Strictly increasing dates, every record valid.
void validate_series(std::span<const QuoteRecord> records);

inline constexpr const char* kCsvHeader =
    "date,option_bid,option_ask,stock_bid,stock_ask,strike,implied_vol,rate";

/// Reads the quote CSV. Lines starting with '#' before the header are
/// ignored. Output is sorted by date and validated.
std::vector<QuoteRecord> load_csv(const std::filesystem::path& path);
std::vector<QuoteRecord> parse_csv(std::string_view text);

/// Writes the quote CSV; `comment` (without '#') becomes the first line when
/// non-empty. Numbers use shortest round-trip formatting.
void write_csv(const std::filesystem::path& path, std::span<const QuoteRecord> records,
               const std::string& comment = {});
std::string format_csv(std::span<const QuoteRecord> records, const std::string& comment = {});

struct SyntheticSpec {
  double s0 = 100.0;
  double sigma = 0.2;
  double r = 0.0;
  double mu = 0.0;
  int n_days = 252;
  std::uint64_t seed = 0;
  double spread_bp = 10.0;
  // Contract: strike and fixed residual maturity used to price the option.
  std::optional<double> strike;  // defaults to s0
  double maturity = 0.5;
  // When set, option bid/ask are bs_call at the stock bid/ask instead of a
  // multiplicative spread around the option mid.
  bool exact_edges = false;
  Date start = Date::parse("2020-01-01");
};

inline constexpr double kTradingDaysPerYear = 252.0;

void validate(const SyntheticSpec& spec);

/// Exact GBM stock path (dt = 1/252) priced with bs_call. One record per
/// trading day, dates on consecutive weekdays.
std::vector<QuoteRecord> generate_gbm(const SyntheticSpec& spec);

/// "# seed=<u64> generator=<id>" without the leading '#'.
std::string synthetic_comment(const SyntheticSpec& spec);

inline constexpr int kFeatureCount = 13;
inline constexpr int kWindowLength = 10;

using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

/// Feature layout, 0-based:
///  0 QRM estimate, 1 sigma, 2-3 option bid/ask, 4-5 stock bid/ask, 6 strike,
///  7 option mid, 8 stock mid, 9 option-mid 1-day return,
///  10 stock-mid 1-day return, 11 moneyness s_mid/K, 12 remaining series fraction.
enum Feature : int {
  kEstimate = 0,
  kSigma,
  kOptionBid,
  kOptionAsk,
  kStockBid,
  kStockAsk,
  kStrike,
  kOptionMid,
  kStockMid,
  kOptionReturn,
  kStockReturn,
  kMoneyness,
  kTimeFraction,
};

struct SequenceSample {
  std::array<FeatureVector, kWindowLength> window;
  int label = 0;             // 1 when the option mid rises after the window
  std::size_t end_day = 0;   // index of the window's last day in the source series
};

/// Per-feature z-score fitted on training windows only.
struct FeatureScaler {
  FeatureVector mean = FeatureVector::Zero();
  FeatureVector scale = FeatureVector::Ones();

  FeatureVector apply(const FeatureVector& x) const {
    return (x - mean).cwiseQuotient(scale);
  }
};

struct SequenceDataset {
  std::vector<SequenceSample> samples;
  FeatureScaler scaler;
  std::size_t train_count = 0;  // leading samples used to fit the scaler
};

/// Raw (unscaled) per-day features. `estimates[k]` is the QRM estimate made on
/// day k; a missing value falls back to that day's option mid.
std::vector<FeatureVector> day_features(std::span<const QuoteRecord> records,
                                        std::span<const std::optional<double>> estimates);

/// Every stride-1 window of 10 days whose following day has a different
/// option mid. The scaler is fitted on the first `train_fraction` of samples
/// (chronological) and applied to all of them.
SequenceDataset build_sequences(std::span<const QuoteRecord> records,
                                std::span<const std::optional<double>> estimates,
                                double train_fraction = 0.8);

}  // namespace optforecast::market_data

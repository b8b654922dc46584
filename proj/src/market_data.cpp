#include "optforecast/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "optforecast/bs_core.hpp"
#include "optforecast/error.hpp"
#include "optforecast/rng.hpp"

namespace optforecast::market_data {

namespace {

namespace chr = std::chrono;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, std::size_t row, const char* field) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ValidationError("row " + std::to_string(row) + ": cannot parse " + field + " '" +
                              std::string(text) + "'",
                          row, field);
  return value;
}

constexpr const char* kFields[] = {"date",      "option_bid", "option_ask",  "stock_bid",
                                   "stock_ask", "strike",     "implied_vol", "rate"};

}  // namespace

Date Date::parse(std::string_view iso) {
  iso = trim(iso);
  int y = 0;
  unsigned m = 0, d = 0;
  const bool shape_ok = iso.size() == 10 && iso[4] == '-' && iso[7] == '-';
  auto num = [&](std::size_t off, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(iso.data() + off, iso.data() + off + len, out);
    return ec == std::errc() && p == iso.data() + off + len;
  };
  if (!shape_ok || !num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d))
    throw ValidationError("invalid date '" + std::string(iso) + "' (expected YYYY-MM-DD)", 0,
                          "date");
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw ValidationError("invalid date '" + std::string(iso) + "'", 0, "date");
  return Date{static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
}

std::string Date::to_string() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

void validate(const QuoteRecord& rec, std::size_t row) {
  auto fail = [&](const char* field, const std::string& why) {
    std::string where = row ? "row " + std::to_string(row) + ": " : std::string{};
    throw ValidationError(where + field + " " + why, row, field);
  };
  const double values[] = {rec.option_bid, rec.option_ask, rec.stock_bid, rec.stock_ask,
                           rec.strike,     rec.implied_vol, rec.rate};
  for (std::size_t i = 0; i < std::size(values); ++i)
    if (!std::isfinite(values[i])) fail(kFields[i + 1], "is not finite");
  if (rec.option_bid < 0) fail("option_bid", "must be >= 0");
  if (rec.option_ask < rec.option_bid) fail("option_ask", "must be >= option_bid");
  if (!(rec.stock_bid > 0)) fail("stock_bid", "must be > 0");
  if (rec.stock_ask < rec.stock_bid) fail("stock_ask", "must be >= stock_bid");
  if (!(rec.strike > 0)) fail("strike", "must be > 0");
  if (rec.implied_vol < 0) fail("implied_vol", "must be >= 0");
}

void validate_series(std::span<const QuoteRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate(records[i], i + 1);
    if (i > 0 && !(records[i - 1].date < records[i].date)) {
      const bool dup = records[i - 1].date == records[i].date;
      throw ValidationError("row " + std::to_string(i + 1) + ": " +
                                (dup ? "duplicate date " : "date out of order ") +
                                records[i].date.to_string(),
                            i + 1, "date");
    }
  }
}

std::vector<QuoteRecord> parse_csv(std::string_view text) {
  std::vector<QuoteRecord> out;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!have_header) {
      if (line.front() == '#') continue;
      if (line != kCsvHeader)
        throw ValidationError("line " + std::to_string(line_no) + ": expected header '" +
                              kCsvHeader + "'");
      have_header = true;
      continue;
    }
    ++row;
    const auto cols = split(line, ',');
    if (cols.size() != 8)
      throw ValidationError("row " + std::to_string(row) + ": expected 8 columns, got " +
                                std::to_string(cols.size()),
                            row);
    QuoteRecord rec;
    try {
      rec.date = Date::parse(cols[0]);
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what(), row, "date");
    }
    rec.option_bid = parse_number(cols[1], row, kFields[1]);
    rec.option_ask = parse_number(cols[2], row, kFields[2]);
    rec.stock_bid = parse_number(cols[3], row, kFields[3]);
    rec.stock_ask = parse_number(cols[4], row, kFields[4]);
    rec.strike = parse_number(cols[5], row, kFields[5]);
    rec.implied_vol = parse_number(cols[6], row, kFields[6]);
    rec.rate = parse_number(cols[7], row, kFields[7]);
    validate(rec, row);
    out.push_back(rec);
  }
  if (!have_header) throw ValidationError("empty quote file (no header)");
  if (out.empty()) throw ValidationError("quote file has no data rows");

  std::stable_sort(out.begin(), out.end(),
                   [](const QuoteRecord& a, const QuoteRecord& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i - 1].date == out[i].date)
      throw ValidationError("duplicate date " + out[i].date.to_string(), 0, "date");
  return out;
}

std::vector<QuoteRecord> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.row(), e.field());
  }
}

std::string format_csv(std::span<const QuoteRecord> records, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += kCsvHeader;
  out += '\n';
  for (const auto& r : records) {
    out += r.date.to_string();
    for (double v : {r.option_bid, r.option_ask, r.stock_bid, r.stock_ask, r.strike,
                     r.implied_vol, r.rate}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, std::span<const QuoteRecord> records,
               const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_csv(records, comment);
  if (!out) throw IoError("write failed: " + path.string());
}

void validate(const SyntheticSpec& spec) {
  auto bad = [](const char* field, const char* why) {
    throw ValidationError(std::string("synthetic spec: ") + field + " " + why, 0, field);
  };
  if (!(spec.s0 > 0) || !std::isfinite(spec.s0)) bad("s0", "must be > 0");
  if (!(spec.sigma >= 0) || !std::isfinite(spec.sigma)) bad("sigma", "must be >= 0");
  if (!std::isfinite(spec.r)) bad("r", "must be finite");
  if (!std::isfinite(spec.mu)) bad("mu", "must be finite");
  if (spec.n_days < 12) bad("n_days", "must be >= 12");
  if (!(spec.spread_bp >= 0) || spec.spread_bp >= 20000) bad("spread_bp", "must be in [0, 20000)");
  if (spec.strike && !(*spec.strike > 0)) bad("strike", "must be > 0");
  if (!(spec.maturity >= 0) || !std::isfinite(spec.maturity)) bad("maturity", "must be >= 0");
}

std::string synthetic_comment(const SyntheticSpec& spec) {
  return "seed=" + std::to_string(spec.seed) + " generator=" + kRngId;
}

std::vector<QuoteRecord> generate_gbm(const SyntheticSpec& spec) {
  validate(spec);
  const double dt = 1.0 / kTradingDaysPerYear;
  const double drift = (spec.mu - 0.5 * spec.sigma * spec.sigma) * dt;
  const double diffusion = spec.sigma * std::sqrt(dt);
  const double strike = spec.strike.value_or(spec.s0);
  const double half_spread = 0.5 * spec.spread_bp * 1e-4;

  auto price = [&](double s) {
    return bs::bs_call(bs::BsInputs<double>{s, spec.maturity, strike, spec.sigma, spec.r});
  };

  Rng rng(spec.seed);
  std::vector<QuoteRecord> out;
  out.reserve(static_cast<std::size_t>(spec.n_days));

  chr::sys_days day{chr::days{spec.start.days}};
  auto skip_weekend = [](chr::sys_days d) {
    while (chr::weekday{d} == chr::Saturday || chr::weekday{d} == chr::Sunday) d += chr::days{1};
    return d;
  };
  day = skip_weekend(day);

  double s = spec.s0;
  for (int k = 0; k < spec.n_days; ++k) {
    if (k > 0) {
      s *= std::exp(drift + diffusion * rng.normal());
      day = skip_weekend(day + chr::days{1});
    }
    QuoteRecord rec;
    rec.date = Date{static_cast<std::int32_t>(day.time_since_epoch().count())};
    rec.stock_bid = s * (1.0 - half_spread);
    rec.stock_ask = s * (1.0 + half_spread);
    if (spec.exact_edges) {
      rec.option_bid = price(rec.stock_bid);
      rec.option_ask = price(rec.stock_ask);
    } else {
      const double mid = price(s);
      rec.option_bid = mid * (1.0 - half_spread);
      rec.option_ask = mid * (1.0 + half_spread);
    }
    rec.strike = strike;
    rec.implied_vol = spec.sigma;
    rec.rate = spec.r;
    out.push_back(rec);
  }
  return out;
}

std::vector<FeatureVector> day_features(std::span<const QuoteRecord> records,
                                        std::span<const std::optional<double>> estimates) {
  if (records.size() != estimates.size())
    throw ValidationError("build_sequences: " + std::to_string(records.size()) +
                          " records but " + std::to_string(estimates.size()) + " estimates");
  const std::size_t n = records.size();
  std::vector<FeatureVector> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = records[k];
    FeatureVector& f = out[k];
    f[kEstimate] = estimates[k].value_or(r.option_mid());
    f[kSigma] = r.implied_vol;
    f[kOptionBid] = r.option_bid;
    f[kOptionAsk] = r.option_ask;
    f[kStockBid] = r.stock_bid;
    f[kStockAsk] = r.stock_ask;
    f[kStrike] = r.strike;
    f[kOptionMid] = r.option_mid();
    f[kStockMid] = r.stock_mid();
    f[kOptionReturn] = 0.0;
    f[kStockReturn] = 0.0;
    if (k > 0) {
      const double prev_opt = records[k - 1].option_mid();
      if (prev_opt > 0) f[kOptionReturn] = r.option_mid() / prev_opt - 1.0;
      f[kStockReturn] = r.stock_mid() / records[k - 1].stock_mid() - 1.0;
    }
    f[kMoneyness] = r.stock_mid() / r.strike;
    f[kTimeFraction] = n > 1 ? static_cast<double>(n - 1 - k) / static_cast<double>(n - 1) : 0.0;
  }
  return out;
}

SequenceDataset build_sequences(std::span<const QuoteRecord> records,
                                std::span<const std::optional<double>> estimates,
                                double train_fraction) {
  if (records.size() != estimates.size())
    throw ValidationError("build_sequences: alignment error, " + std::to_string(records.size()) +
                          " records vs " + std::to_string(estimates.size()) + " estimates");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ValidationError("build_sequences: train_fraction must be in (0, 1]");
  const auto features = day_features(records, estimates);

  SequenceDataset ds;
  const std::size_t n = records.size();
  for (std::size_t start = 0; start + kWindowLength < n; ++start) {
    const std::size_t last = start + kWindowLength - 1;
    const double before = records[last].option_mid();
    const double after = records[last + 1].option_mid();
    if (after == before) continue;
    SequenceSample sample;
    for (int t = 0; t < kWindowLength; ++t) sample.window[t] = features[start + t];
    sample.label = after > before ? 1 : 0;
    sample.end_day = last;
    ds.samples.push_back(sample);
  }
  if (ds.samples.empty()) return ds;

  ds.train_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(train_fraction * ds.samples.size())));
  FeatureVector sum = FeatureVector::Zero();
  FeatureVector sum_sq = FeatureVector::Zero();
  double count = 0;
  for (std::size_t i = 0; i < ds.train_count; ++i)
    for (const auto& f : ds.samples[i].window) {
      sum += f;
      count += 1;
    }
  ds.scaler.mean = sum / count;
  for (std::size_t i = 0; i < ds.train_count; ++i)
    for (const auto& f : ds.samples[i].window)
      sum_sq += (f - ds.scaler.mean).cwiseAbs2();
  for (int j = 0; j < kFeatureCount; ++j) {
    const double sd = std::sqrt(sum_sq[j] / count);
    ds.scaler.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(ds.scaler.mean[j])) ? sd : 1.0;
  }
  // Zero-variance columns: centered value is ~0 and scale stays 1.
  for (auto& s : ds.samples)
    for (auto& f : s.window) f = ds.scaler.apply(f);
  return ds;
}

}  // namespace optforecast::market_data

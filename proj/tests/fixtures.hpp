#pragma once

// Shared constructions for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "optforecast/lstm.hpp"
#include "optforecast/market_data.hpp"
#include "optforecast/rng.hpp"

namespace fixture {

using optforecast::market_data::SequenceSample;

inline SequenceSample random_window(optforecast::Rng& rng) {
  SequenceSample s;
  for (auto& f : s.window)
    for (int j = 0; j < f.size(); ++j) f[j] = rng.normal();
  return s;
}

// Label is 1 when feature 9 averages positive over the window.
inline std::vector<SequenceSample> separable_dataset(int n, std::uint64_t seed) {
  optforecast::Rng rng(seed);
  std::vector<SequenceSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SequenceSample s = random_window(rng);
    double sum = 0;
    for (const auto& f : s.window) sum += f[9];
    s.label = sum > 0;
    s.end_day = static_cast<std::size_t>(i);
    out.push_back(s);
  }
  return out;
}

inline std::vector<SequenceSample> permuted_labels(std::vector<SequenceSample> data,
                                                   std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& s : data) labels.push_back(s.label);
  optforecast::Rng rng(seed);
  rng.shuffle(std::span<int>(labels));
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = labels[i];
  return data;
}

struct GradientAudit {
  double max_relative_error = 0;
  Eigen::Index worst_index = -1;
};

// Centered differences of the loss evaluated in long double, compared
// against the analytic double-precision gradient. The relative error uses
// max(|analytic|, |numeric|, floor) in the denominator so parameters with a
// vanishing gradient are judged on absolute error.
inline GradientAudit audit_gradient(std::uint64_t seed, int hidden = 4, double eps = 1e-5,
                                    double floor = 1e-8) {
  using namespace optforecast;
  const auto params = lstm::initialize(market_data::kFeatureCount, hidden, seed);
  Rng rng(derive_seed(seed, 1));
  SequenceSample sample = random_window(rng);
  sample.label = static_cast<int>(rng.below(2));
  const auto window = lstm::window_matrix<double>(sample);
  const auto cache = lstm::forward(params, window);
  const auto grad = lstm::backward(params, cache, sample.label);

  auto wide = params.cast<long double>();
  const auto wide_window = lstm::window_matrix<long double>(sample);
  auto loss_at = [&](long double v, Eigen::Index i) {
    const long double saved = wide.values()[i];
    wide.values()[i] = v;
    const long double l = lstm::loss(lstm::forward(wide, wide_window).prob, sample.label);
    wide.values()[i] = saved;
    return l;
  };
  GradientAudit audit;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const long double x = wide.values()[i];
    const long double h = eps;
    const double numeric = static_cast<double>((loss_at(x + h, i) - loss_at(x - h, i)) / (2 * h));
    const double analytic = grad.values()[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
    const double rel = std::abs(numeric - analytic) / denom;
    if (rel > audit.max_relative_error) {
      audit.max_relative_error = rel;
      audit.worst_index = i;
    }
  }
  return audit;
}

}  // namespace fixture

#include "optforecast/binomial.hpp"
#include "optforecast/trading.hpp"

namespace fixture {

// Expected wealth by walking all 2^k up/down paths.
inline double binomial_by_paths(const optforecast::binomial::BinomialSpec& s) {
  double total = 0;
  const std::uint64_t paths = std::uint64_t{1} << s.days;
  for (std::uint64_t mask = 0; mask < paths; ++mask) {
    double wealth = s.capital, prob = 1;
    for (int d = 0; d < s.days; ++d) {
      const bool up = (mask >> d) & 1U;
      wealth *= up ? s.ror : s.rol;
      prob *= up ? s.p : 1 - s.p;
    }
    total += wealth * prob;
  }
  return total;
}

inline optforecast::binomial::BinomialSpec random_binomial_spec(optforecast::Rng& rng, int max_days) {
  optforecast::binomial::BinomialSpec s;
  s.p = rng.uniform(0.05, 0.95);
  s.rol = rng.uniform(0.3, 1.2);
  s.ror = s.rol * rng.uniform(1.0, 3.0);
  s.capital = rng.uniform(0.5, 10.0);
  s.days = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_days) + 1));
  return s;
}

// Flat stock and a constant option mid quoted `spread_bp` wide.
inline std::vector<optforecast::market_data::QuoteRecord> constant_mid_series(int n, double spread_bp) {
  std::vector<optforecast::market_data::QuoteRecord> out;
  for (int k = 0; k < n; ++k) {
    optforecast::market_data::QuoteRecord r;
    r.date = optforecast::market_data::Date{18000 + k};
    r.option_bid = 10.0 * (1 - spread_bp / 2e4);
    r.option_ask = 10.0 * (1 + spread_bp / 2e4);
    r.stock_bid = r.stock_ask = 100;
    r.strike = 100;
    r.implied_vol = 0.2;
    out.push_back(r);
  }
  return out;
}

// Running the backtest on every prefix must not change earlier decisions.
inline bool no_lookahead_holds(std::span<const optforecast::market_data::QuoteRecord> recs,
                               std::span<const std::optional<double>> signals,
                               optforecast::trading::SignalMode mode) {
  using namespace optforecast::trading;
  const auto full = backtest(recs, signals, mode);
  for (std::size_t m = 2; m < recs.size(); ++m) {
    const auto part = backtest(recs.first(m), signals.first(m), mode);
    for (std::size_t k = 0; k + 1 < m; ++k) {
      if (part.trades[k].action != full.trades[k].action) return false;
      if (part.trades[k].pnl != full.trades[k].pnl) return false;
    }
    if (part.trades[m - 1].action != Action::abstain) return false;
  }
  return true;
}

inline bool equity_sum_holds(const optforecast::trading::BacktestResult& r) {
  double sum = 0;
  std::size_t trades = 0;
  if (r.equity_curve.size() != r.trades.size()) return false;
  for (std::size_t k = 0; k < r.trades.size(); ++k) {
    sum += r.trades[k].pnl;
    if (r.trades[k].action == optforecast::trading::Action::buy) ++trades;
    if (std::abs(r.equity_curve[k] - sum) > 1e-9 * (1 + std::abs(sum))) return false;
  }
  return trades == r.n_trades && std::abs(r.final_pnl() - sum) <= 1e-9 * (1 + std::abs(sum));
}

}  // namespace fixture

#include <filesystem>
#include <fstream>
#include <sstream>

#include "optforecast/cli.hpp"

namespace fixture {

namespace fs = std::filesystem;

inline fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("optforecast_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int run_cli(const std::vector<std::string>& args, std::string* out = nullptr,
               std::string* err = nullptr) {
  std::ostringstream o, e;
  const int code = optforecast::cli::run(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

inline const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> cmds{"synth", "qrm", "train", "backtest"};
  return cmds;
}

inline const std::vector<std::string>& pipeline_artifacts() {
  static const std::vector<std::string> files{"synth.csv",         "qrm.csv",         "model.json",
                                              "train_history.csv", "predictions.csv", "backtest.csv",
                                              "backtest.json"};
  return files;
}

// synth -> qrm -> train -> backtest into `dir`; returns the first nonzero exit code.
inline int run_pipeline(const fs::path& dir, int days = 120, int epochs = 5) {
  const std::string d = dir.string();
  const std::string data = (dir / "synth.csv").string();
  const std::vector<std::vector<std::string>> steps{
      {"synth", "--s0", "100", "--days", std::to_string(days), "--seed", "11", "--out-dir", d},
      {"qrm", "--input", data, "--out-dir", d},
      {"train", "--input", data, "--qrm", (dir / "qrm.csv").string(), "--hidden", "8", "--epochs",
       std::to_string(epochs), "--seed", "3", "--out-dir", d},
      {"backtest", "--input", data, "--signals", (dir / "qrm.csv").string(), "--mode", "qrm",
       "--out-dir", d},
  };
  for (const auto& s : steps)
    if (int code = run_cli(s); code != 0) return code;
  return 0;
}

// Replays every manifest in `from` into `to`.
inline int replay_pipeline(const fs::path& from, const fs::path& to) {
  for (const auto& c : pipeline_commands())
    if (int code = run_cli({"replay", (from / (c + ".manifest.json")).string(), "--out-dir", to.string()});
        code != 0)
      return code;
  return 0;
}

inline std::vector<std::string> differing_artifacts(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diff;
  for (const auto& f : pipeline_artifacts())
    if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) diff.push_back(f);
  return diff;
}

}  // namespace fixture

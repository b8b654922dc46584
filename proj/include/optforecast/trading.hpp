#pragma once

// Threshold strategy: buy one contract at today's ask when the forecast
// EST(tau) is at least the payable price REAL(0) = ask, sell at the next
// day's bid. No shorting, no compounding.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "optforecast/market_data.hpp"

namespace optforecast::trading {

enum class Action { buy, abstain };

/// Buy iff est >= real0. real0 must be positive.
Action decide(double est, double real0);

enum class SignalMode { qrm, classifier };

inline constexpr double kClassifierThreshold = 0.5;

struct TradeDecision {
  market_data::Date date;
  Action action = Action::abstain;
  double est = 0;    // forecast (qrm) or probability (classifier); 0 when absent
  double real0 = 0;  // ask (qrm) or the 0.5 threshold (classifier)
  double pnl = 0;    // realized next-day P&L, 0 on abstain
};

struct BacktestResult {
  std::vector<TradeDecision> trades;  // one per day
  std::vector<double> equity_curve;   // cumulative P&L per day
  std::size_t n_trades = 0;
  double hit_rate = 0;  // profitable trades / trades (0 without trades)

  double final_pnl() const { return equity_curve.empty() ? 0.0 : equity_curve.back(); }
  /// {"final_pnl", "n_trades", "hit_rate"}.
  std::string summary_json() const;
};

/// One decision per day; missing signals abstain and the last day never
/// opens a trade. A buy on day k books bid(k+1) - ask(k).
BacktestResult backtest(std::span<const market_data::QuoteRecord> records,
                        std::span<const std::optional<double>> signals, SignalMode mode);

/// CSV `date,cumulative_pnl,trade_pnl,action`, one row per day.
std::string plot_csv(const BacktestResult& result);
void emit_plot_data(const BacktestResult& result, const std::filesystem::path& path);

struct PlotRow {
  std::string date;
  double cumulative_pnl = 0;
  double trade_pnl = 0;
  std::string action;
};
std::vector<PlotRow> parse_plot_csv(std::string_view text);

}  // namespace optforecast::trading

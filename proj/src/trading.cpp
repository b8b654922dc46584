#include "optforecast/trading.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "optforecast/error.hpp"

namespace optforecast::trading {

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const char* action_name(Action a) { return a == Action::buy ? "buy" : "abstain"; }

}  // namespace

Action decide(double est, double real0) {
  if (!std::isfinite(est) || !std::isfinite(real0))
    throw DomainError("decide: non-finite input");
  if (!(real0 > 0)) throw DomainError("decide: REAL(0) must be positive");
  return est >= real0 ? Action::buy : Action::abstain;
}

BacktestResult backtest(std::span<const market_data::QuoteRecord> records,
                        std::span<const std::optional<double>> signals, SignalMode mode) {
  if (records.size() != signals.size())
    throw ValidationError("backtest: " + std::to_string(signals.size()) + " signals for " +
                          std::to_string(records.size()) + " days");
  if (records.size() < 2) throw ValidationError("backtest: need at least 2 days");

  BacktestResult out;
  out.trades.reserve(records.size());
  out.equity_curve.reserve(records.size());
  std::size_t wins = 0;
  double equity = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    TradeDecision d;
    d.date = records[k].date;
    d.real0 = mode == SignalMode::qrm ? records[k].option_ask : kClassifierThreshold;
    const bool last = k + 1 == records.size();
    if (signals[k]) {
      d.est = *signals[k];
      if (!last) d.action = decide(d.est, d.real0);
    }
    if (d.action == Action::buy) {
      d.pnl = records[k + 1].option_bid - records[k].option_ask;
      ++out.n_trades;
      if (d.pnl > 0) ++wins;
    }
    equity += d.pnl;
    out.equity_curve.push_back(equity);
    out.trades.push_back(d);
  }
  out.hit_rate = out.n_trades ? static_cast<double>(wins) / static_cast<double>(out.n_trades) : 0.0;
  return out;
}

std::string BacktestResult::summary_json() const {
  nlohmann::ordered_json j;
  j["final_pnl"] = final_pnl();
  j["n_trades"] = n_trades;
  j["hit_rate"] = hit_rate;
  return j.dump(1);
}

std::string plot_csv(const BacktestResult& result) {
  std::string out = "date,cumulative_pnl,trade_pnl,action\n";
  for (std::size_t k = 0; k < result.trades.size(); ++k) {
    const auto& t = result.trades[k];
    out += t.date.to_string() + ',' + num(result.equity_curve[k]) + ',' + num(t.pnl) + ',' +
           action_name(t.action) + '\n';
  }
  return out;
}

void emit_plot_data(const BacktestResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << plot_csv(result);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<PlotRow> parse_plot_csv(std::string_view text) {
  std::vector<PlotRow> rows;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    PlotRow row;
    std::string_view fields[4];
    for (int i = 0; i < 4; ++i) {
      const auto comma = line.find(',');
      if ((comma == std::string_view::npos) != (i == 3))
        throw ValidationError("plot csv: expected 4 columns");
      fields[i] = line.substr(0, comma);
      line = comma == std::string_view::npos ? std::string_view{} : line.substr(comma + 1);
    }
    row.date = std::string(fields[0]);
    auto parse = [](std::string_view s) {
      double v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError("plot csv: bad number");
      return v;
    };
    row.cumulative_pnl = parse(fields[1]);
    row.trade_pnl = parse(fields[2]);
    row.action = std::string(fields[3]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace optforecast::trading

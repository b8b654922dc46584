// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "fixtures.hpp"
#include "optforecast/binomial.hpp"
#include "optforecast/bs_core.hpp"
#include "optforecast/fusion.hpp"
#include "optforecast/lstm.hpp"
#include "optforecast/qrm.hpp"
#include "optforecast/trading.hpp"

using namespace optforecast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome ac1_fusion() {
  const double p = fusion::joint_precision(0.56, 0.59);
  return {std::abs(p - 0.647) <= 5e-4, fmt("joint_precision(0.56, 0.59) = %.6f", p)};
}

Outcome ac2_binomial_one_day() {
  const double e = binomial::expected_wealth({0.56, 2.0, 0.5, 1.0, 1});
  const double t = binomial::enumerate_tree({0.56, 2.0, 0.5, 1.0, 1}).expectation;
  return {std::abs(e - 1.34) <= 1e-12 && std::abs(t - 1.34) <= 1e-12,
          fmt("closed form %.15f, tree %.15f", e, t)};
}

Outcome ac3_binomial_oracles() {
  Rng rng(20240601);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto s = fixture::random_binomial_spec(rng, 12);
    const double paths = fixture::binomial_by_paths(s);
    worst = std::max({worst, std::abs(binomial::enumerate_tree(s).expectation - paths) / paths,
                      std::abs(binomial::expected_wealth(s) - paths) / paths});
  }
  return {worst <= 1e-9, fmt("max relative disagreement %.3e over 100 specs", worst)};
}

Outcome ac4_martingale() {
  const auto m = binomial::martingale_check({2.0 / 3.0, 2.0, 0.5, 1.0, 1});
  return {std::abs(m.per_step_growth - 1.5) <= 1e-12 && !m.is_martingale,
          fmt("growth %.15f, is_martingale = ", m.per_step_growth) + (m.is_martingale ? "true" : "false")};
}

Outcome ac5_gradient() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    worst = std::max(worst, fixture::audit_gradient(seed).max_relative_error);
  return {worst <= 1e-4, fmt("max relative error %.3e over 5 seeds", worst)};
}

Outcome ac6_learning() {
  lstm::TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 30;
  cfg.seed = 1;
  const auto data = fixture::separable_dataset(2000, 77);
  const auto res = lstm::train(data, cfg);
  const double sep = lstm::evaluate(res.params, std::span(data).subspan(res.train_count)).accuracy;
  const auto shuffled = fixture::permuted_labels(data, 5);
  const auto res2 = lstm::train(shuffled, cfg);
  const double perm = lstm::evaluate(res2.params, std::span(shuffled).subspan(res2.train_count)).accuracy;
  return {sep >= 0.90 && perm >= 0.4 && perm <= 0.6,
          fmt("separable val accuracy %.4f, permuted %.4f", sep, perm)};
}

Outcome ac7_qrm_recovery() {
  market_data::SyntheticSpec spec;
  spec.sigma = 0.2;
  spec.n_days = 250;
  spec.seed = 1;
  spec.exact_edges = true;
  const auto recs = market_data::generate_gbm(spec);
  const auto ms = qrm::estimate_series(recs, qrm::QrmConfig{});
  double err = 0, persistence = 0;
  int n = 0;
  for (std::size_t k = 1; k + 1 < recs.size(); ++k) {
    const double truth = bs::bs_call(bs::BsInputs<double>{recs[k + 1].stock_mid(), spec.maturity,
                                                          spec.s0, spec.sigma, spec.r});
    err += std::abs(ms[k]->est - truth) / truth;
    persistence += std::abs(recs[k].option_mid() - truth) / truth;
    ++n;
  }
  err /= n;
  persistence /= n;

  market_data::SyntheticSpec flat = spec;
  flat.sigma = 0;
  flat.n_days = 12;
  const auto frecs = market_data::generate_gbm(flat);
  const auto fm = qrm::solve_qrm(std::span(frecs).last(2), qrm::QrmConfig{});
  const double gap = std::abs(fm.est - frecs.back().option_mid());
  return {err <= 0.03 && gap <= 1e-10,
          fmt("mean relative error %.4f (limit 0.03; today's mid as forecast: %.4f), sigma=0 gap %.2e",
              err, persistence, gap)};
}

Outcome ac8_well_posed() {
  market_data::SyntheticSpec spec;
  spec.seed = 2;
  spec.n_days = 40;
  const auto recs = market_data::generate_gbm(spec);
  Rng rng(8);
  bool spd = true;
  int max_iter = 0;
  bool converged = true;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const auto window = std::span(recs).subspan(k - 1, 2);
    const auto sys = qrm::assemble_system(window, qrm::QrmConfig{});
    const auto n = sys.normal_matrix();
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd v(sys.unknown_count());
      for (auto& x : v) x = rng.normal();
      spd = spd && v.dot(n * v) > 0;
    }
    try {
      max_iter = std::max(max_iter, qrm::solve_qrm(window, qrm::QrmConfig{}).iterations);
    } catch (const ConvergenceError&) {
      converged = false;
    }
  }
  return {spd && converged && max_iter <= 5000,
          std::string("Rayleigh quotients ") + (spd ? "all > 0" : "NOT all > 0") +
              fmt(", max CG iterations %.0f at tol 1e-10", max_iter)};
}

Outcome ac9_bs_bounds() {
  Rng rng(99);
  int bound_violations = 0, payoff_violations = 0;
  for (int i = 0; i < 100000; ++i) {
    bs::BsInputs<double> in{rng.uniform(1, 200), rng.uniform(0, 3), rng.uniform(1, 200),
                            rng.uniform(0.01, 1.0), rng.uniform(0, 0.1)};
    const double c = bs::bs_call(in);
    const double lower = std::max(in.s - in.K * std::exp(-in.r * in.tau), 0.0);
    if (c < lower - 1e-12 * in.s || c > in.s + 1e-12 * in.s) ++bound_violations;
    in.tau = 1e-12;
    const double near_expiry = bs::bs_call(in);
    if (std::abs(near_expiry - bs::payoff(in.s, in.K)) > 1e-6 * std::max(in.s, in.K))
      ++payoff_violations;
    in.tau = 0;
    if (bs::bs_call(in) != bs::payoff(in.s, in.K)) ++payoff_violations;
  }
  return {bound_violations == 0 && payoff_violations == 0,
          fmt("bound violations %.0f, payoff-limit violations %.0f over 1e5 inputs",
              bound_violations, payoff_violations)};
}

Outcome ac10_backtest() {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    market_data::SyntheticSpec spec;
    spec.seed = derive_seed(31, seed);
    spec.n_days = 20;
    const auto recs = market_data::generate_gbm(spec);
    const auto est = qrm::estimates_of(qrm::estimate_series(recs, qrm::QrmConfig{}));
    if (!fixture::no_lookahead_holds(recs, est, trading::SignalMode::qrm) ||
        !fixture::equity_sum_holds(trading::backtest(recs, est, trading::SignalMode::qrm)))
      ++failures;
  }
  const auto wide = fixture::constant_mid_series(30, 200);
  const double spread = wide[0].option_ask - wide[0].option_bid;
  const std::vector<std::optional<double>> always(wide.size(), 1.0);
  const auto r = trading::backtest(wide, always, trading::SignalMode::classifier);
  bool exact = r.n_trades == wide.size() - 1;
  for (std::size_t k = 0; k + 1 < wide.size(); ++k) exact = exact && r.trades[k].pnl == -spread;
  return {failures == 0 && exact,
          fmt("%.0f of 100 series failed; wide-spread P&L per trade ", failures) +
              (exact ? "equals -spread exactly" : "DIFFERS from -spread")};
}

Outcome ac11_determinism() {
  const auto a = fixture::fresh_dir("acceptance_run");
  const auto b = fixture::fresh_dir("acceptance_replay");
  if (int code = fixture::run_pipeline(a, 250, 30); code != 0)
    return {false, fmt("pipeline exited with %.0f", code)};
  if (int code = fixture::replay_pipeline(a, b); code != 0)
    return {false, fmt("replay exited with %.0f", code)};
  const auto diff = fixture::differing_artifacts(a, b);
  std::string detail = fmt("%.0f artifacts compared", static_cast<double>(fixture::pipeline_artifacts().size()));
  for (const auto& f : diff) detail += ", differs: " + f;
  return {diff.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 fusion formula", ac1_fusion},
      {"AC2 binomial one-day expectation", ac2_binomial_one_day},
      {"AC3 binomial oracle equivalence", ac3_binomial_oracles},
      {"AC4 martingale diagnostic", ac4_martingale},
      {"AC5 LSTM gradient audit", ac5_gradient},
      {"AC6 LSTM learning sanity", ac6_learning},
      {"AC7 QRM oracle recovery", ac7_qrm_recovery},
      {"AC8 QRM well-posedness", ac8_well_posed},
      {"AC9 Black-Scholes bounds", ac9_bs_bounds},
      {"AC10 backtest accounting", ac10_backtest},
      {"AC11 end-to-end determinism", ac11_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

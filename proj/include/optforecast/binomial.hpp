#pragma once

// Binomial wealth model: each trading day the portfolio is multiplied by
// `ror` with probability p (the model precision) and by `rol` otherwise.
// After k days wealth is C * ror^j * rol^(k-j) with probability
// C(k, j) p^j (1-p)^(k-j), and the expectation is C * (p ror + (1-p) rol)^k.

#include <span>
#include <string>
#include <vector>

namespace optforecast::binomial {

struct BinomialSpec {
  double p = 0.56;
  double ror = 2.0;
  double rol = 0.5;  // independent down multiplier; 1/ror by convention
  double capital = 1.0;
  int days = 1;
};

/// p in (0, 1), ror >= rol > 0, capital > 0, days >= 0.
void validate(const BinomialSpec& spec);

inline constexpr int kMaxEnumerationDays = 30;

struct Outcome {
  double wealth = 0;
  double probability = 0;
  int up_moves = 0;
};

struct WealthDistribution {
  std::vector<Outcome> outcomes;  // ascending wealth, days + 1 entries
  double expectation = 0;

  /// CSV `wealth,probability`, ascending by wealth.
  std::string to_csv() const;
};

/// p * ror + (1 - p) * rol.
double per_step_growth(const BinomialSpec& spec);

double expected_wealth(const BinomialSpec& spec);

/// Recombining lattice; throws DomainError for days > 30.
WealthDistribution enumerate_tree(const BinomialSpec& spec);

struct MartingaleCheck {
  bool is_martingale = false;
  double per_step_growth = 0;
};

/// Martingale iff |growth - 1| <= 1e-12.
MartingaleCheck martingale_check(const BinomialSpec& spec);

/// Wald's identity for the log-wealth random walk:
/// E[ln(W_N / C)] = E[N] * (p ln ror + (1-p) ln rol).
double wald_log_expectation(const BinomialSpec& spec, double expected_days);

/// sum(predicted) / sum(today).
double estimate_ror(std::span<const double> today, std::span<const double> predicted);

/// {"expectation", "growth", "is_martingale", "wald_log_expectation"}.
std::string summary_json(const BinomialSpec& spec, double expected_days);

}  // namespace optforecast::binomial

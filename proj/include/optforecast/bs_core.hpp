#pragma once

// Closed-form Black-Scholes call pricing.
//
// Phi is evaluated as 0.5 * erfc(-x / sqrt(2)) using the C library erfc
// (approximation id "libm-erfc"); absolute error is at the level of the
// scalar's epsilon, well inside 1e-12 for double.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "optforecast/error.hpp"

namespace optforecast::bs {

inline constexpr const char* kNormalCdfId = "libm-erfc";

template <typename Scalar>
struct BsInputs {
  Scalar s;      // spot
  Scalar tau;    // years to maturity, T - t
  Scalar K;      // strike
  Scalar sigma;  // volatility; 0 selects the deterministic limit
  Scalar r = Scalar(0);
};

template <typename Scalar>
void validate(const BsInputs<Scalar>& in) {
  using std::isfinite;
  if (!isfinite(in.s) || !isfinite(in.tau) || !isfinite(in.K) || !isfinite(in.sigma) ||
      !isfinite(in.r))
    throw DomainError("bs_call: non-finite input");
  if (!(in.s > 0)) throw DomainError("bs_call: spot must be positive");
  if (!(in.K > 0)) throw DomainError("bs_call: strike must be positive");
  if (in.tau < 0) throw DomainError("bs_call: negative time to maturity");
  if (in.sigma < 0) throw DomainError("bs_call: negative volatility");
}

template <typename Scalar>
Scalar payoff(Scalar s, Scalar K) {
  if (!(s > 0) || !(K > 0)) throw DomainError("payoff: s and K must be positive");
  return std::max(s - K, Scalar(0));
}

template <typename Scalar>
Scalar std_normal_cdf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

template <typename Scalar>
Scalar std_normal_pdf(Scalar x) {
  using std::exp;
  return exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

/// theta_plus / theta_minus: [ln(s/K) + (r +- sigma^2/2) tau] / (sigma sqrt(tau)).
template <typename Scalar>
std::pair<Scalar, Scalar> theta_pm(const BsInputs<Scalar>& in) {
  using std::log;
  using std::sqrt;
  const Scalar vol = in.sigma * sqrt(in.tau);
  const Scalar base = log(in.s / in.K) + in.r * in.tau;
  const Scalar half_var = Scalar(0.5) * in.sigma * in.sigma * in.tau;
  return {(base + half_var) / vol, (base - half_var) / vol};
}

template <typename Scalar>
Scalar bs_call(const BsInputs<Scalar>& in) {
  using std::exp;
  validate(in);
  if (in.tau == 0) return payoff(in.s, in.K);
  const Scalar discounted_strike = exp(-in.r * in.tau) * in.K;
  if (in.sigma == 0) return std::max(in.s - discounted_strike, Scalar(0));
  const auto [plus, minus] = theta_pm(in);
  const Scalar price =
      in.s * std_normal_cdf(plus) - discounted_strike * std_normal_cdf(minus);
  // Clamp rounding excursions outside the no-arbitrage band.
  return std::clamp(price, std::max(in.s - discounted_strike, Scalar(0)), in.s);
}

}  // namespace optforecast::bs

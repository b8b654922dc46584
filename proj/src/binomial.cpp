#include "optforecast/binomial.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "optforecast/error.hpp"

namespace optforecast::binomial {

void validate(const BinomialSpec& s) {
  if (!(s.p > 0.0 && s.p < 1.0)) throw ValidationError("binomial: p must be in (0, 1)", 0, "p");
  if (!(s.rol > 0.0) || !std::isfinite(s.rol)) throw ValidationError("binomial: rol must be > 0", 0, "rol");
  if (!(s.ror >= s.rol) || !std::isfinite(s.ror))
    throw ValidationError("binomial: ror must be >= rol", 0, "ror");
  if (!(s.capital > 0.0) || !std::isfinite(s.capital))
    throw ValidationError("binomial: capital must be > 0", 0, "capital");
  if (s.days < 0) throw ValidationError("binomial: days must be >= 0", 0, "days");
}

double per_step_growth(const BinomialSpec& s) { return s.p * s.ror + (1.0 - s.p) * s.rol; }

double expected_wealth(const BinomialSpec& spec) {
  validate(spec);
  return spec.capital * std::pow(per_step_growth(spec), spec.days);
}

WealthDistribution enumerate_tree(const BinomialSpec& spec) {
  validate(spec);
  if (spec.days > kMaxEnumerationDays)
    throw DomainError("enumerate_tree: " + std::to_string(spec.days) + " days exceeds " +
                      std::to_string(kMaxEnumerationDays) + "; use expected_wealth");
  const int k = spec.days;
  WealthDistribution dist;
  dist.outcomes.reserve(static_cast<std::size_t>(k) + 1);
  double binom = 1.0;  // C(k, j), exact in double for k <= 30
  for (int j = 0; j <= k; ++j) {
    if (j > 0) binom = binom * (k - j + 1) / j;
    Outcome o;
    o.up_moves = j;
    o.wealth = spec.capital * std::pow(spec.ror, j) * std::pow(spec.rol, k - j);
    o.probability = binom * std::pow(spec.p, j) * std::pow(1.0 - spec.p, k - j);
    dist.outcomes.push_back(o);
  }
  for (const auto& o : dist.outcomes) dist.expectation += o.wealth * o.probability;
  return dist;
}

MartingaleCheck martingale_check(const BinomialSpec& spec) {
  validate(spec);
  MartingaleCheck out;
  out.per_step_growth = per_step_growth(spec);
  out.is_martingale = std::abs(out.per_step_growth - 1.0) <= 1e-12;
  return out;
}

double wald_log_expectation(const BinomialSpec& spec, double expected_days) {
  validate(spec);
  if (!(expected_days > 0) || !std::isfinite(expected_days))
    throw DomainError("wald_log_expectation: expected_days must be > 0");
  return expected_days * (spec.p * std::log(spec.ror) + (1.0 - spec.p) * std::log(spec.rol));
}

double estimate_ror(std::span<const double> today, std::span<const double> predicted) {
  if (today.size() != predicted.size() || today.empty())
    throw DomainError("estimate_ror: need equal, nonzero numbers of positions");
  double now = 0, next = 0;
  for (double v : today) now += v;
  for (double v : predicted) next += v;
  if (!(now > 0)) throw DomainError("estimate_ror: today's total value must be positive");
  return next / now;
}

std::string WealthDistribution::to_csv() const {
  std::string out = "wealth,probability\n";
  char buf[64];
  for (const auto& o : outcomes) {
    auto [e1, ec1] = std::to_chars(buf, buf + sizeof buf, o.wealth);
    out.append(buf, e1);
    out += ',';
    auto [e2, ec2] = std::to_chars(buf, buf + sizeof buf, o.probability);
    out.append(buf, e2);
    out += '\n';
  }
  return out;
}

std::string summary_json(const BinomialSpec& spec, double expected_days) {
  const auto check = martingale_check(spec);
  nlohmann::ordered_json j;
  j["expectation"] = expected_wealth(spec);
  j["growth"] = check.per_step_growth;
  j["is_martingale"] = check.is_martingale;
  j["wald_log_expectation"] = wald_log_expectation(spec, expected_days);
  return j.dump(1);
}

}  // namespace optforecast::binomial

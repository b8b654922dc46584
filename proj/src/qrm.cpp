#include "optforecast/qrm.hpp"

#include <cmath>
#include <vector>

#include <json.hpp>

#include "optforecast/cg.hpp"
#include "optforecast/error.hpp"

namespace optforecast::qrm {

using market_data::QuoteRecord;

void validate(const QrmConfig& c) {
  auto bad = [](const std::string& what) { throw ValidationError("qrm config: " + what); };
  if (c.n_s < 3 || c.n_s % 2 == 0) bad("n_s must be odd and >= 3");
  if (c.n_tau < 3 || c.n_tau % 2 == 0) bad("n_tau must be odd and >= 3");
  if (!(c.beta > 0) || !std::isfinite(c.beta)) bad("beta must be > 0");
  if (!(c.horizon > 0) || !std::isfinite(c.horizon)) bad("horizon must be > 0");
  if (!(c.cg_tol > 0)) bad("cg_tol must be > 0");
  if (c.cg_max_iter <= 0) bad("cg_max_iter must be > 0");
}

Eigen::SparseMatrix<double> QrmSystem::normal_matrix() const {
  Eigen::SparseMatrix<double> identity(unknown_count(), unknown_count());
  identity.setIdentity();
  Eigen::SparseMatrix<double> n = Eigen::SparseMatrix<double>(pde.transpose()) * pde;
  n += beta * identity;
  return n;
}

Eigen::VectorXd QrmSystem::data_unknowns() const {
  Eigen::VectorXd f(unknown_count());
  for (int j = 1; j < n_tau(); ++j)
    for (int i = 1; i < n_s() - 1; ++i) f[unknown_index(i, j)] = data(i, j);
  return f;
}

Eigen::MatrixXd QrmSystem::embed(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd u = data;
  for (int j = 1; j < n_tau(); ++j)
    for (int i = 1; i < n_s() - 1; ++i) u(i, j) = x[unknown_index(i, j)];
  return u;
}

double QrmSystem::pde_misfit(const Eigen::VectorXd& x) const {
  return (pde * x - pde_rhs).squaredNorm();
}

double QrmSystem::functional(const Eigen::VectorXd& x) const {
  return pde_misfit(x) + beta * (x - data_unknowns()).squaredNorm();
}

QrmSystem assemble_system(std::span<const QuoteRecord> records, const QrmConfig& config) {
  validate(config);
  if (records.size() < 2)
    throw ValidationError("qrm: insufficient history, need 2 consecutive quotes");
  const QuoteRecord& prev = records[records.size() - 2];
  const QuoteRecord& today = records[records.size() - 1];
  market_data::validate(prev);
  market_data::validate(today);
  if (!(today.stock_ask > today.stock_bid))
    throw ValidationError("qrm: collapsed grid, stock bid equals ask on " +
                              today.date.to_string(),
                          0, "stock_ask");

  const int n_s = config.n_s;
  const int n_tau = config.n_tau;
  const double height = 2.0 * config.horizon;  // years
  const double day = 1.0 / market_data::kTradingDaysPerYear;
  const double s_mid = today.stock_mid();

  QrmSystem sys;
  sys.beta = config.beta;
  sys.s_values = Eigen::VectorXd::LinSpaced(n_s, today.stock_bid, today.stock_ask);
  sys.tau_values = Eigen::VectorXd::LinSpaced(n_tau, 0.0, height);

  // Data surface: edges extrapolated linearly from yesterday, linear in s between.
  sys.data.resize(n_s, n_tau);
  for (int j = 0; j < n_tau; ++j) {
    const double steps = sys.tau_values[j] / day;
    const double lo = today.option_bid + (today.option_bid - prev.option_bid) * steps;
    const double hi = today.option_ask + (today.option_ask - prev.option_ask) * steps;
    for (int i = 0; i < n_s; ++i) {
      const double w = static_cast<double>(i) / (n_s - 1);
      sys.data(i, j) = lo + (hi - lo) * w;
    }
  }

  // Dimensionless coordinates: x = s / s_mid, t' = t / height.
  const double dx = (today.stock_ask - today.stock_bid) / s_mid / (n_s - 1);
  const double dt = 1.0 / (n_tau - 1);
  const double half_var = 0.5 * today.implied_vol * today.implied_vol * height;

  const Eigen::Index unknowns = static_cast<Eigen::Index>(n_s - 2) * (n_tau - 1);
  const Eigen::Index rows = unknowns;  // one residual per interior node on rows 0..n_tau-2
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(rows) * 5);
  sys.pde_rhs = Eigen::VectorXd::Zero(rows);

  Eigen::Index row = 0;
  for (int j = 0; j + 1 < n_tau; ++j) {
    for (int i = 1; i < n_s - 1; ++i, ++row) {
      const double x = sys.s_values[i] / s_mid;
      const double diffusion = half_var * x * x / (dx * dx);
      const struct {
        int i, j;
        double c;
      } terms[] = {
          {i, j + 1, 1.0 / dt},
          {i, j, -1.0 / dt - 2.0 * diffusion},
          {i + 1, j, diffusion},
          {i - 1, j, diffusion},
      };
      for (const auto& t : terms) {
        if (t.c == 0.0) continue;
        if (QrmSystem::is_fixed(t.i, t.j, n_s))
          sys.pde_rhs[row] -= t.c * sys.data(t.i, t.j);
        else
          triplets.emplace_back(row, sys.unknown_index(t.i, t.j), t.c);
      }
    }
  }
  sys.pde.resize(rows, unknowns);
  sys.pde.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

Minimizer solve_qrm(std::span<const QuoteRecord> records, const QrmConfig& config) {
  const QrmSystem sys = assemble_system(records, config);
  const Eigen::VectorXd f = sys.data_unknowns();
  const Eigen::SparseMatrix<double> normal = sys.normal_matrix();

  // Solve for the correction from F: (A^T A + beta I) d = A^T (b - A F).
  const Eigen::VectorXd rhs = sys.pde.transpose() * (sys.pde_rhs - sys.pde * f);
  Eigen::VectorXd correction = Eigen::VectorXd::Zero(f.size());
  const CgReport cg = conjugate_gradient(normal, rhs, correction, config.cg_tol, config.cg_max_iter);
  if (!cg.converged)
    throw ConvergenceError("qrm: conjugate gradient did not reach tolerance " +
                               std::to_string(config.cg_tol) + " in " +
                               std::to_string(config.cg_max_iter) +
                               " iterations (relative residual " +
                               std::to_string(cg.relative_residual) + ")",
                           cg.relative_residual);

  const Eigen::VectorXd solution = f + correction;
  Minimizer m;
  m.surface.s_values = sys.s_values;
  m.surface.tau_values = sys.tau_values;
  m.surface.u = sys.embed(solution);
  m.residual = sys.pde_misfit(solution);
  m.iterations = cg.iterations;

  const int center = (config.n_s - 1) / 2;
  int nearest = 0;
  for (int j = 1; j < config.n_tau; ++j)
    if (std::abs(sys.tau_values[j] - config.horizon) <
        std::abs(sys.tau_values[nearest] - config.horizon))
      nearest = j;
  m.est = m.surface.u(center, nearest);
  if (!m.surface.u.allFinite()) throw ConvergenceError("qrm: non-finite minimizer", cg.relative_residual);
  return m;
}

std::vector<std::optional<Minimizer>> estimate_series(std::span<const QuoteRecord> records,
                                                      const QrmConfig& config) {
  if (records.size() < 2) throw ValidationError("qrm: estimate_series needs >= 2 records");
  std::vector<std::optional<Minimizer>> out(records.size());
  for (std::size_t k = 1; k < records.size(); ++k) {
    const std::string where =
        "day " + std::to_string(k) + " (" + records[k].date.to_string() + "): ";
    try {
      out[k] = solve_qrm(records.subspan(k - 1, 2), config);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(where + e.what(), e.residual());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what(), k + 1, e.field());
    }
  }
  return out;
}

std::vector<std::optional<double>> estimates_of(std::span<const std::optional<Minimizer>> ms) {
  std::vector<std::optional<double>> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.push_back(m ? std::optional<double>(m->est) : std::nullopt);
  return out;
}

std::string to_json(const Minimizer& m) {
  nlohmann::ordered_json j;
  j["est"] = m.est;
  j["residual"] = m.residual;
  j["iterations"] = m.iterations;
  j["n_s"] = m.surface.s_values.size();
  j["n_tau"] = m.surface.tau_values.size();
  return j.dump();
}

}  // namespace optforecast::qrm

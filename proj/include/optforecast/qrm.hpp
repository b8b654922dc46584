#pragma once

// Quasi-reversibility extrapolation of an option price one trading day ahead.
//
// The price surface u(s, t) on [sb, sa] x [0, 2h] (t = calendar time from
// today, h = horizon) should satisfy the Black-Scholes equation in forward
// time,
//
//     u_t + (sigma^2 / 2) s^2 u_ss = 0,
//
// which is ill-posed with only today's data and the bid/ask edges. The
// regularized problem minimizes
//
//     J(u) = || D_t u + (sigma^2/2) s^2 D_ss u ||^2 + beta || u - F ||^2
//
// over the nodes not fixed by data (interior and the far time row), with
// s scaled by today's stock mid and t by the rectangle height 2h.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "optforecast/market_data.hpp"

namespace optforecast::qrm {

struct QrmConfig {
  int n_s = 21;
  int n_tau = 11;
  double beta = 0.01;
  double horizon = 1.0 / market_data::kTradingDaysPerYear;  // years
  double cg_tol = 1e-10;
  int cg_max_iter = 5000;
};

void validate(const QrmConfig& config);

struct QrmGrid {
  Eigen::VectorXd s_values;    // currency, n_s
  Eigen::VectorXd tau_values;  // years from today, n_tau
  Eigen::MatrixXd u;           // n_s x n_tau
};

/// Least-squares form of the discrete functional. Unknowns are numbered
/// column-major over (s index 1..n_s-2, t index 1..n_tau-1).
struct QrmSystem {
  Eigen::SparseMatrix<double> pde;  // PDE residual rows x unknowns
  Eigen::VectorXd pde_rhs;          // contribution of the fixed nodes, moved right
  Eigen::MatrixXd data;             // F, n_s x n_tau
  Eigen::VectorXd s_values;
  Eigen::VectorXd tau_values;
  double beta = 0;

  int n_s() const { return static_cast<int>(s_values.size()); }
  int n_tau() const { return static_cast<int>(tau_values.size()); }
  Eigen::Index unknown_count() const { return pde.cols(); }
  static bool is_fixed(int i, int j, int n_s) { return j == 0 || i == 0 || i == n_s - 1; }
  Eigen::Index unknown_index(int i, int j) const {
    return static_cast<Eigen::Index>(j - 1) * (n_s() - 2) + (i - 1);
  }

  /// A^T A + beta I.
  Eigen::SparseMatrix<double> normal_matrix() const;
  /// F restricted to the unknowns.
  Eigen::VectorXd data_unknowns() const;
  /// Full surface from the unknown vector, fixed nodes taken from F.
  Eigen::MatrixXd embed(const Eigen::VectorXd& unknowns) const;
  /// ||A x - b||^2, the PDE-misfit term.
  double pde_misfit(const Eigen::VectorXd& unknowns) const;
  /// J(x).
  double functional(const Eigen::VectorXd& unknowns) const;
};

/// Builds the system from the last two quotes (yesterday, today).
QrmSystem assemble_system(std::span<const market_data::QuoteRecord> records,
                          const QrmConfig& config);

struct Minimizer {
  QrmGrid surface;
  double est = 0;       // u at the center s node, t nearest the horizon
  double residual = 0;  // PDE-misfit at the solution
  int iterations = 0;
};

Minimizer solve_qrm(std::span<const market_data::QuoteRecord> records, const QrmConfig& config);

/// Element k >= 1 solves on records (k-1, k); element 0 is empty.
std::vector<std::optional<Minimizer>> estimate_series(
    std::span<const market_data::QuoteRecord> records, const QrmConfig& config);

std::vector<std::optional<double>> estimates_of(
    std::span<const std::optional<Minimizer>> minimizers);

/// {"est", "residual", "iterations", "n_s", "n_tau"}.
std::string to_json(const Minimizer& m);

}  // namespace optforecast::qrm

#pragma once

#include <cmath>

#include <Eigen/Core>

namespace optforecast {

struct CgReport {
  int iterations = 0;
  double relative_residual = 0;  // ||b - A x|| / ||b|| (0 when b == 0)
  bool converged = false;
};

/// Unpreconditioned conjugate gradient for symmetric positive definite A.
/// `x` holds the initial guess on entry and the iterate on exit. Stops when
/// the recursively updated residual satisfies ||r|| <= tol * ||b||.
template <typename MatrixType, typename Derived>
CgReport conjugate_gradient(const MatrixType& A, const Eigen::MatrixBase<Derived>& b,
                            Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>& x,
                            double tol, int max_iter) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  CgReport report;
  const Scalar b_norm = b.norm();
  if (b_norm == Scalar(0)) {
    x.setZero(b.size());
    report.converged = true;
    return report;
  }
  Vector r = b - A * x;
  Scalar r_sq = r.squaredNorm();
  const Scalar threshold = Scalar(tol) * b_norm;
  if (std::sqrt(r_sq) <= threshold) {
    report.relative_residual = static_cast<double>(std::sqrt(r_sq) / b_norm);
    report.converged = true;
    return report;
  }
  Vector p = r;
  Vector q(b.size());
  while (report.iterations < max_iter) {
    ++report.iterations;
    q.noalias() = A * p;
    const Scalar alpha = r_sq / p.dot(q);
    x.noalias() += alpha * p;
    r.noalias() -= alpha * q;
    const Scalar r_sq_new = r.squaredNorm();
    if (std::sqrt(r_sq_new) <= threshold) {
      r_sq = r_sq_new;
      report.converged = true;
      break;
    }
    p = r + (r_sq_new / r_sq) * p;
    r_sq = r_sq_new;
  }
  report.relative_residual = static_cast<double>(std::sqrt(r_sq) / b_norm);
  return report;
}

}  // namespace optforecast

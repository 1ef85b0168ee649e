#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace wgstokes {

using Vector = Eigen::VectorXd;

/// Anything that computes y = Op x.
template <typename Op>
concept LinearOperator = requires(const Op& op, const Vector& x, Vector& y) {
  { op.apply(x, y) };
};

/// y = x.
struct IdentityOperator {
  void apply(const Vector& x, Vector& y) const { y = x; }
};

/// Wraps a dense or sparse Eigen matrix.
template <typename Matrix>
class MatrixOperator {
public:
  explicit MatrixOperator(const Matrix& m) : m_(&m) {}
  void apply(const Vector& x, Vector& y) const { y.noalias() = (*m_) * x; }

private:
  const Matrix* m_;
};

/// Jacobi preconditioner z = D^{-1} r.
class JacobiPreconditioner {
public:
  explicit JacobiPreconditioner(Vector diagonal) : inv_(diagonal.cwiseInverse()) {}
  void apply(const Vector& r, Vector& z) const { z = inv_.cwiseProduct(r); }

private:
  Vector inv_;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  /// Relative preconditioned residual; entry k is the value after k
  /// iterations, entry 0 is the initial residual (1 for a zero guess).
  std::vector<double> residual_history;
  /// ||b - A x|| / ||b|| at exit (unpreconditioned, for reference).
  double true_relative_residual = 0.0;
  double wall_time = 0.0;
  int restarts = 0;
  long inner_iterations = 0;
};

struct KrylovOptions {
  double tol = 1e-9;
  int max_iter = 1000;
  int restart = 30;
};

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <LinearOperator Op>
double true_residual(const Op& op, const Vector& b, const Vector& x) {
  const double nb = b.norm();
  if (nb == 0.0) {
    return 0.0;
  }
  Vector ax;
  op.apply(x, ax);
  return (b - ax).norm() / nb;
}

} // namespace detail

/// Preconditioned MINRES (Paige-Saunders) from a zero initial guess.
///
/// The operator must be symmetric and the preconditioner SPD. Convergence is
/// measured by ||r_k||_{P^{-1}} / ||b||_{P^{-1}}, which is monotonically
/// nonincreasing.
template <LinearOperator Op, LinearOperator Prec>
Vector minres(const Op& op, const Prec& prec, const Vector& b, const KrylovOptions& opts,
              SolveReport& report) {
  const auto t0 = std::chrono::steady_clock::now();
  report = SolveReport{};
  const auto n = b.size();
  Vector x = Vector::Zero(n);

  Vector r1 = b;
  Vector y;
  prec.apply(r1, y);
  const double b_dot = r1.dot(y);
  if (b_dot < 0.0) {
    throw operator_not_spd("minres: preconditioner is not positive definite");
  }
  const double beta1 = std::sqrt(b_dot);
  if (beta1 == 0.0) {
    report.converged = true;
    report.wall_time = detail::elapsed_since(t0);
    return x;
  }
  report.residual_history.push_back(1.0);

  Vector r2 = r1;
  Vector v(n), w = Vector::Zero(n), w1(n), w2 = Vector::Zero(n);
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (int itn = 1; itn <= opts.max_iter; ++itn) {
    v = y / beta;
    op.apply(v, y);
    if (itn >= 2) {
      y -= (beta / oldb) * r1;
    }
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1.swap(r2);
    r2 = y;
    prec.apply(r2, y);
    oldb = beta;
    const double bb = r2.dot(y);
    if (bb < 0.0) {
      throw operator_not_spd("minres: preconditioner is not positive definite");
    }
    beta = std::sqrt(bb);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), eps);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar *= sn;

    w1.swap(w2);
    w2.swap(w);
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    report.iterations = itn;
    const double rel = phibar / beta1;
    report.residual_history.push_back(rel);
    if (rel <= opts.tol) {
      report.converged = true;
      break;
    }
    if (beta == 0.0) {
      // Lanczos terminated: the Krylov space is invariant.
      report.converged = rel <= opts.tol;
      break;
    }
  }
  report.true_relative_residual = detail::true_residual(op, b, x);
  report.wall_time = detail::elapsed_since(t0);
  return x;
}

/// Restarted GMRES with left preconditioning from a zero initial guess.
///
/// Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass.
/// Convergence is measured by ||P^{-1} r_k|| / ||P^{-1} b||.
template <LinearOperator Op, LinearOperator Prec>
Vector gmres(const Op& op, const Prec& prec, const Vector& b, const KrylovOptions& opts,
             SolveReport& report) {
  const auto t0 = std::chrono::steady_clock::now();
  report = SolveReport{};
  const auto n = b.size();
  const int m = std::max(1, opts.restart);
  Vector x = Vector::Zero(n);

  Vector r;
  prec.apply(b, r);
  const double normb = r.norm();
  if (normb == 0.0) {
    report.converged = true;
    report.wall_time = detail::elapsed_since(t0);
    return x;
  }
  report.residual_history.push_back(1.0);
  double beta = normb;

  std::vector<Vector> basis(m + 1, Vector(n));
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);
  Vector w, aw;
  bool done = false;

  while (!done && report.iterations < opts.max_iter) {
    basis[0] = r / beta;
    g.setZero();
    g[0] = beta;
    hess.setZero();
    int j = 0;
    for (; j < m && report.iterations < opts.max_iter; ++j) {
      op.apply(basis[j], aw);
      prec.apply(aw, w);
      const double wnorm0 = w.norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double hij = basis[i].dot(w);
          hess(i, j) += hij;
          w -= hij * basis[i];
        }
      }
      const double hnext = w.norm();
      hess(j + 1, j) = hnext;

      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * hess(i, j) + sn[i] * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const double denom = std::hypot(hess(j, j), hess(j + 1, j));
      cs[j] = hess(j, j) / denom;
      sn[j] = hess(j + 1, j) / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] *= cs[j];

      ++report.iterations;
      const double rel = std::abs(g[j + 1]) / normb;
      report.residual_history.push_back(rel);
      if (rel <= opts.tol) {
        done = true;
        ++j;
        break;
      }
      if (hnext <= 1e-14 * wnorm0) {
        throw internal_error("gmres: Arnoldi breakdown with nonzero residual " +
                             std::to_string(rel));
      }
      basis[j + 1] = w / hnext;
    }

    // x += V y with H y = g (upper triangular part).
    const int k = j;
    Vector ycoef = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) {
      x += ycoef[i] * basis[i];
    }
    if (done) {
      break;
    }
    op.apply(x, aw);
    prec.apply(b - aw, r);
    beta = r.norm();
    ++report.restarts;
    if (beta / normb <= opts.tol) {
      done = true;
    }
  }
  report.converged = done;
  report.true_relative_residual = detail::true_residual(op, b, x);
  report.wall_time = detail::elapsed_since(t0);
  return x;
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when sqrt(r^T M^{-1} r) / sqrt(b^T M^{-1} b) <= tol. Throws
/// operator_not_spd if a search direction has p^T A p <= 0.
template <LinearOperator Op, LinearOperator Prec>
Vector pcg(const Op& op, const Prec& prec, const Vector& b, const KrylovOptions& opts,
           SolveReport& report) {
  const auto t0 = std::chrono::steady_clock::now();
  report = SolveReport{};
  const auto n = b.size();
  Vector x = Vector::Zero(n);
  Vector r = b;
  Vector z;
  prec.apply(r, z);
  double rz = r.dot(z);
  if (rz < 0.0) {
    throw operator_not_spd("pcg: preconditioner is not positive definite");
  }
  const double norm0 = std::sqrt(rz);
  if (norm0 == 0.0) {
    report.converged = true;
    report.wall_time = detail::elapsed_since(t0);
    return x;
  }
  report.residual_history.push_back(1.0);
  Vector p = z;
  Vector q(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    op.apply(p, q);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) {
      throw operator_not_spd("pcg: operator is not positive definite (p^T A p = " +
                             std::to_string(pq) + ")");
    }
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    prec.apply(r, z);
    const double rz_new = r.dot(z);
    const double rel = std::sqrt(std::abs(rz_new)) / norm0;
    report.iterations = it;
    report.residual_history.push_back(rel);
    if (rel <= opts.tol) {
      report.converged = true;
      break;
    }
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  report.true_relative_residual = detail::true_residual(op, b, x);
  report.wall_time = detail::elapsed_since(t0);
  return x;
}

} // namespace wgstokes

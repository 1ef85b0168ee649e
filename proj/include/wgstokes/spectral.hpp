#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "assembly.hpp"
#include "errors.hpp"
#include "regularize.hpp"
#include "schur.hpp"

namespace wgstokes {

enum class Lemma {
  schur_finite,        // eigenvalues of S_hat^{-1} S, finite gamma
  precond_finite,      // eigenvalues of P_d^{-1} A, finite gamma
  schur_small,         // S_hat = M_p, small rho: outlier plus [beta^2, d] band
  precond_small,       // P_d^{-1} A with S_hat = M_p, small rho
};

inline std::string to_string(Lemma l) {
  switch (l) {
  case Lemma::schur_finite: return "L4_2";
  case Lemma::precond_finite: return "L4_3";
  case Lemma::schur_small: return "L5_1";
  case Lemma::precond_small: return "L5_2";
  }
  return "?";
}

inline Lemma parse_lemma(const std::string& s) {
  if (s == "L4_2") return Lemma::schur_finite;
  if (s == "L4_3") return Lemma::precond_finite;
  if (s == "L5_1") return Lemma::schur_small;
  if (s == "L5_2") return Lemma::precond_small;
  throw std::invalid_argument("unknown lemma '" + s + "' (expected L4_2, L4_3, L5_1 or L5_2)");
}

/// Dense quantities shared by every spectral check on one system.
struct DenseSpectralData {
  int dim = 2;
  int num_elements = 0;
  double h = 0.0;
  double domain_measure = 0.0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Vector Mp;
  Eigen::MatrixXd schur0;                 // B A^{-1} B^T
  Vector pencil_eigenvalues;              // of M_p^{-1/2} B A^{-1} B^T M_p^{-1/2}, ascending
  double beta = 0.0;
  double lambda_min_A = 0.0;
  double lambda_min_M = 0.0;
  double lambda_max_M = 0.0;
};

/// Builds the dense data; A^{-1} is applied by a dense Cholesky factorization.
template <int Dim>
DenseSpectralData dense_spectral_data(const Mesh<Dim>& mesh, const SaddleSystem<Dim>& sys) {
  DenseSpectralData d;
  d.dim = Dim;
  d.num_elements = mesh.num_elements();
  d.h = mesh.h();
  d.domain_measure = mesh.domain_measure();
  d.A = Eigen::MatrixXd(sys.A);
  d.B = Eigen::MatrixXd(sys.B);
  d.Mp = sys.Mp;
  Eigen::LLT<Eigen::MatrixXd> llt(d.A);
  if (llt.info() != Eigen::Success) {
    throw internal_error("dense_spectral_data: A is not positive definite");
  }
  const Eigen::MatrixXd x = llt.solve(d.B.transpose());
  d.schur0 = d.B * x;
  d.schur0 = 0.5 * (d.schur0 + d.schur0.transpose()).eval();
  d.lambda_min_M = d.Mp.minCoeff();
  d.lambda_max_M = d.Mp.maxCoeff();

  const Vector isq = d.Mp.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd pencil = isq.asDiagonal() * d.schur0 * isq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pencil, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw internal_error("dense_spectral_data: eigensolver failed");
  }
  d.pencil_eigenvalues = es.eigenvalues();
  if (d.pencil_eigenvalues.size() >= 2) {
    if (d.pencil_eigenvalues[1] <= 1e-8) {
      throw rank_anomaly("more than one zero eigenvalue in M_p^{-1} B A^{-1} B^T (second is " +
                         std::to_string(d.pencil_eigenvalues[1]) + ")");
    }
    d.beta = std::sqrt(d.pencil_eigenvalues[1]);
  }

  // A is d identical scalar blocks (components are interleaved), so its
  // smallest eigenvalue is that of the component-0 block.
  std::vector<int> idx;
  for (int i = 0; i < d.A.rows(); i += Dim) {
    idx.push_back(i);
  }
  Eigen::MatrixXd scalar(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      scalar(i, j) = d.A(idx[i], idx[j]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(scalar, Eigen::EigenvaluesOnly);
  d.lambda_min_A = ea.eigenvalues()[0];
  return d;
}

/// Inf-sup constant estimate: sqrt of the smallest nonzero eigenvalue of the
/// symmetrized pencil (M_p^{-1/2} B A^{-1} B^T M_p^{-1/2}).
template <int Dim>
double estimate_beta(const Mesh<Dim>& mesh, const SaddleSystem<Dim>& sys) {
  return dense_spectral_data(mesh, sys).beta;
}

/// C_1 = beta^2 (lambda_min(M_p) / lambda_max(M_p)) gamma^2.
inline double c1_constant(double beta, double lambda_min_M, double lambda_max_M, double gamma) {
  return beta * beta * (lambda_min_M / lambda_max_M) * gamma * gamma;
}

/// Dense regularized (rescaled) coefficient matrix.
inline Eigen::MatrixXd dense_regularized_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                const Vector& w, double rho) {
  const auto nu = A.rows();
  const auto np = B.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nu + np, nu + np);
  m.topLeftCorner(nu, nu) = A;
  m.topRightCorner(nu, np) = -B.transpose();
  m.bottomLeftCorner(np, nu) = -B;
  m.bottomRightCorner(np, np) = -rho * w * w.transpose();
  return m;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

struct SpectralReport {
  std::string lemma;
  std::string variant;
  Vector eigenvalues;               // sorted ascending
  double beta = 0.0;
  double c1 = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double slack = 0.0;
  std::vector<Interval> intervals;
  std::vector<int> eigenvalue_ok;   // one flag per eigenvalue
  int failures = 0;
  double worst_margin = 0.0;        // most negative distance to the admissible set
  // Small-rho outlier.
  bool has_outlier = false;
  double outlier = 0.0;
  double outlier_predicted = 0.0;
  double outlier_rel_error = 0.0;
  double outlier_tol = 0.05;
  // P_d^{-1} A only: eigenvalue 1 carried by ker(B) with zero pressure part.
  int kernel_unit_eigenvalues = 0;
  int unit_with_pressure = 0;       // lambda = 1 with nonzero pressure part
  int near_zero = 0;
  bool passed = false;
};

namespace detail {

inline double distance_to(const std::vector<Interval>& ivs, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& iv : ivs) {
    if (iv.contains(x)) {
      return 0.0;
    }
    best = std::min(best, std::min(std::abs(x - iv.lo), std::abs(x - iv.hi)));
  }
  return best;
}

} // namespace detail

struct LemmaCheckOptions {
  double h_slack_factor = 10.0;   // slack = factor * h^d for O(h^d) terms
  double rho_slack_factor = 10.0; // slack = factor * rho^2 for O(rho^2) terms
  double upper_tol = 1e-8;
  double outlier_tol = 0.05;
};

/// Dense eigenvalue certification of one of the four spectral lemmas.
inline SpectralReport verify_lemma(Lemma which, const DenseSpectralData& data,
                                   const Regularization& reg, SchurVariant variant,
                                   const LemmaCheckOptions& opts = {}) {
  SpectralReport rep;
  rep.lemma = to_string(which);
  rep.variant = to_string(variant);
  rep.beta = data.beta;
  rep.gamma = reg.gamma;
  rep.rho = reg.rho;
  rep.outlier_tol = opts.outlier_tol;
  const double d = data.dim;
  const double b2 = data.beta * data.beta;
  rep.c1 = c1_constant(data.beta, data.lambda_min_M, data.lambda_max_M, reg.gamma);
  const double c1 = rep.c1;
  const double hslack = opts.h_slack_factor * std::pow(data.h, data.dim);
  const double rslack = opts.rho_slack_factor * reg.rho * reg.rho;
  const double r = reg.rho / data.lambda_min_M;
  const double n = data.num_elements;
  const double predicted = reg.gamma * reg.gamma * n * reg.rho / data.domain_measure;

  const SchurApprox shat(data.Mp, reg.w, reg.rho, variant);
  const Eigen::MatrixXd shat_dense = shat.dense();
  const bool schur_lemma = which == Lemma::schur_finite || which == Lemma::schur_small;
  const bool small = which == Lemma::schur_small || which == Lemma::precond_small;

  Eigen::MatrixXd vecs;
  if (schur_lemma) {
    const Eigen::MatrixXd s = data.schur0 + reg.rho * reg.w * reg.w.transpose();
    if (variant == SchurVariant::plain) {
      // Diagonal S_hat: symmetrize exactly with its square root.
      const Vector isq = data.Mp.cwiseSqrt().cwiseInverse();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(isq.asDiagonal() * s * isq.asDiagonal(),
                                                        Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success) {
        throw internal_error("verify_lemma: eigensolver failed");
      }
      rep.eigenvalues = es.eigenvalues();
    } else {
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s, shat_dense,
                                                                   Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success) {
        throw internal_error("verify_lemma: generalized eigensolver failed");
      }
      rep.eigenvalues = es.eigenvalues();
    }
  } else {
    const auto nu = data.A.rows();
    const auto np = data.B.rows();
    const Eigen::MatrixXd a = dense_regularized_matrix(data.A, data.B, reg.w, reg.rho);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(nu + np, nu + np);
    p.topLeftCorner(nu, nu) = data.A;
    p.bottomRightCorner(np, np) = shat_dense;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, p);
    if (es.info() != Eigen::Success) {
      throw internal_error("verify_lemma: generalized eigensolver failed");
    }
    rep.eigenvalues = es.eigenvalues();
    vecs = es.eigenvectors();
  }

  const double up = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * d));
  switch (which) {
  case Lemma::schur_finite:
    rep.slack = hslack;
    rep.intervals = {{c1 - hslack, d + opts.upper_tol}};
    break;
  case Lemma::precond_finite:
    rep.slack = hslack;
    rep.intervals = {{-d / std::sqrt(c1) - hslack, -2.0 * c1 / (1.0 + std::sqrt(1.0 + 4.0 * d)) + hslack},
                     {std::sqrt(c1) - hslack, up + opts.upper_tol}};
    break;
  case Lemma::schur_small:
    rep.slack = rslack;
    rep.intervals = {{b2 - r - rslack, d + r + rslack + opts.upper_tol}};
    break;
  case Lemma::precond_small: {
    rep.slack = rslack;
    const double lb = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * b2));
    rep.intervals = {{0.5 * (1.0 - std::sqrt(1.0 + 4.0 * d)) - r - rslack,
                      0.5 * (1.0 - std::sqrt(1.0 + 4.0 * b2)) + r + rslack},
                     {lb - r - rslack, up + r + rslack + opts.upper_tol}};
    break;
  }
  }

  const auto ne = rep.eigenvalues.size();
  rep.eigenvalue_ok.assign(ne, 0);

  // Outlier for the small-rho lemmas: eigenvalue of smallest magnitude.
  Eigen::Index outlier_idx = -1;
  if (small && ne > 0) {
    rep.eigenvalues.cwiseAbs().minCoeff(&outlier_idx);
    rep.has_outlier = true;
    rep.outlier = rep.eigenvalues[outlier_idx];
    rep.outlier_predicted = which == Lemma::schur_small ? predicted : -predicted;
    rep.outlier_rel_error = std::abs(rep.outlier / rep.outlier_predicted - 1.0);
    rep.eigenvalue_ok[outlier_idx] = rep.outlier_rel_error <= opts.outlier_tol ? 1 : 0;
  }

  const auto np = data.B.rows();
  const auto nu = data.A.rows();
  rep.worst_margin = 0.0;
  for (Eigen::Index i = 0; i < ne; ++i) {
    const double lam = rep.eigenvalues[i];
    if (i == outlier_idx) {
      continue;
    }
    if (!schur_lemma && std::abs(lam) <= 1e-8) {
      ++rep.near_zero;
    }
    bool ok = false;
    if (!schur_lemma && std::abs(lam - 1.0) <= 1e-8) {
      const double pnorm = vecs.col(i).tail(np).norm();
      const double unorm = vecs.col(i).head(nu).norm();
      if (pnorm <= 1e-6 * unorm) {
        ++rep.kernel_unit_eigenvalues;
        ok = true;
      } else {
        ++rep.unit_with_pressure;
      }
    }
    if (!ok) {
      const double dist = detail::distance_to(rep.intervals, lam);
      ok = dist == 0.0;
      rep.worst_margin = std::max(rep.worst_margin, dist);
    }
    rep.eigenvalue_ok[i] = ok ? 1 : 0;
  }
  rep.failures = static_cast<int>(std::count(rep.eigenvalue_ok.begin(), rep.eigenvalue_ok.end(), 0));
  rep.passed = rep.failures == 0 && rep.near_zero == 0 &&
               (which != Lemma::precond_finite || rep.unit_with_pressure == 0);
  return rep;
}

/// Inputs of the residual bound formulas.
struct BoundParams {
  int dim = 2;
  double c1 = 0.0;
  double beta = 0.0;
  double lambda_min_A = 0.0;
  double lambda_min_M = 0.0;
  double lambda_max_M = 0.0;
  double rho = 1.0;
  double gamma = 1.0;
  int num_elements = 0;
  double domain_measure = 1.0;
  double slack = 0.0; // added to the convergence factors for the O(h^d) terms
};

/// Residual bounds as functions of the iteration count.
struct BoundCurves {
  double minres_factor = 0.0; // per two MINRES steps
  double gmres_factor = 0.0;
  std::function<double(int)> minres;
  std::function<double(int)> gmres;
};

inline BoundParams bound_params(const DenseSpectralData& data, const Regularization& reg,
                                double slack) {
  BoundParams p;
  p.dim = data.dim;
  p.beta = data.beta;
  p.c1 = c1_constant(data.beta, data.lambda_min_M, data.lambda_max_M, reg.gamma);
  p.lambda_min_A = data.lambda_min_A;
  p.lambda_min_M = data.lambda_min_M;
  p.lambda_max_M = data.lambda_max_M;
  p.rho = reg.rho;
  p.gamma = reg.gamma;
  p.num_elements = data.num_elements;
  p.domain_measure = data.domain_measure;
  p.slack = slack;
  return p;
}

/// MINRES and GMRES residual bounds for the finite-gamma regime.
inline BoundCurves finite_regime_bounds(const BoundParams& p) {
  if (!(p.c1 > 0.0)) {
    throw constraint_violation("finite_regime_bounds: C1 must be positive");
  }
  const double d = p.dim;
  const double s = std::sqrt(d) * (1.0 + std::sqrt(1.0 + 4.0 * d));
  BoundCurves c;
  c.minres_factor = (s - 2.0 * p.c1) / (s + 2.0 * p.c1) + p.slack;
  c.gmres_factor = (std::sqrt(d) - std::sqrt(p.c1)) / (std::sqrt(d) + std::sqrt(p.c1)) + p.slack;
  const double pre = 2.0 * (1.0 + std::sqrt(d * p.lambda_max_M / p.lambda_min_A) + d);
  const double mf = c.minres_factor, gf = c.gmres_factor;
  c.minres = [mf](int it) { return 2.0 * std::pow(mf, it / 2); };
  c.gmres = [pre, gf](int it) { return pre * std::pow(gf, it - 1); };
  return c;
}

/// MINRES and GMRES residual bounds for the small-gamma/small-rho regime.
/// The O(rho^2) terms are dropped.
inline BoundCurves small_regime_bounds(const BoundParams& p) {
  const double d = p.dim;
  const double b2 = p.beta * p.beta;
  const double r = p.rho / p.lambda_min_M;
  if (r > 0.5 * (std::sqrt(1.0 + 4.0 * b2) - 1.0)) {
    throw constraint_violation("small_regime_bounds: rho/lambda_min(M_p) exceeds (sqrt(1+4 beta^2)-1)/2");
  }
  if (!(p.rho < b2 * p.lambda_min_M)) {
    throw constraint_violation("small_regime_bounds: rho must be below beta^2 lambda_min(M_p)");
  }
  const double lam1 = p.gamma * p.gamma * p.num_elements * p.rho / p.domain_measure;
  const double up = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * d));
  const double top = std::sqrt(r * r + r * std::sqrt(1.0 + 4.0 * d) + d);
  const double bot = std::sqrt(r * r - r * std::sqrt(1.0 + 4.0 * b2) + b2);
  BoundCurves c;
  c.minres_factor = (top - bot) / (top + bot) + p.slack;
  c.gmres_factor = (std::sqrt(d + r) - std::sqrt(b2 - r)) / (std::sqrt(d + r) + std::sqrt(b2 - r)) + p.slack;
  const double mconst = 2.0 * (up + r + lam1) / lam1;
  const double gconst = 2.0 * (1.0 + std::sqrt(d * p.lambda_max_M / p.lambda_min_A) + d) *
                        (d + r + lam1) / lam1;
  const double mf = c.minres_factor, gf = c.gmres_factor;
  c.minres = [mconst, mf](int it) { return it < 1 ? 1.0 : mconst * std::pow(mf, (it - 1) / 2); };
  c.gmres = [gconst, gf](int it) { return gconst * std::pow(gf, it - 2); };
  return c;
}

inline BoundCurves bound_formulas(const BoundParams& p, Regime regime) {
  return regime == Regime::finite ? finite_regime_bounds(p) : small_regime_bounds(p);
}

} // namespace wgstokes

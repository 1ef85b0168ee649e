#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "assembly.hpp"
#include "errors.hpp"
#include "ichol.hpp"
#include "krylov.hpp"
#include "regularize.hpp"

namespace wgstokes {

enum class SchurVariant {
  augmented, // S_hat = rho w w^T + M_p
  plain,     // S_hat = M_p
};

inline std::string to_string(SchurVariant v) {
  return v == SchurVariant::augmented ? "augmented" : "plain";
}

inline SchurVariant parse_schur_variant(const std::string& s) {
  if (s == "augmented") return SchurVariant::augmented;
  if (s == "plain") return SchurVariant::plain;
  throw std::invalid_argument("unknown Schur variant '" + s + "'");
}

/// Default pairing: augmented for finite gamma, plain mass for pinning-type
/// small regularizations.
inline SchurVariant default_variant(Regime r) {
  return r == Regime::finite ? SchurVariant::augmented : SchurVariant::plain;
}

/// Schur complement approximation with an O(N) inverse.
class SchurApprox {
public:
  SchurApprox(Vector mass, Vector w, double rho, SchurVariant variant)
      : mass_(std::move(mass)), w_(std::move(w)), rho_(rho), variant_(variant) {
    if (mass_.size() != w_.size()) {
      throw std::invalid_argument("SchurApprox: mass and w sizes differ");
    }
    if (!(mass_.minCoeff() > 0.0)) {
      throw std::invalid_argument("SchurApprox: mass matrix must be positive");
    }
    inv_mass_w_ = w_.cwiseQuotient(mass_);
    w_minv_w_ = w_.dot(inv_mass_w_);
  }

  SchurApprox(const Vector& mass, const Regularization& reg, SchurVariant variant)
      : SchurApprox(mass, reg.w, reg.rho, variant) {}

  SchurVariant variant() const noexcept { return variant_; }
  double rho() const noexcept { return rho_; }
  const Vector& mass() const noexcept { return mass_; }
  const Vector& w() const noexcept { return w_; }
  double w_minv_w() const noexcept { return w_minv_w_; }

  /// y = S_hat x.
  void apply(const Vector& x, Vector& y) const {
    y = mass_.cwiseProduct(x);
    if (variant_ == SchurVariant::augmented) {
      y += (rho_ * w_.dot(x)) * w_;
    }
  }

  /// y = S_hat^{-1} x via Sherman-Morrison for the augmented variant.
  void apply_inverse(const Vector& x, Vector& y) const {
    y = x.cwiseQuotient(mass_);
    if (variant_ == SchurVariant::augmented) {
      const double coef = rho_ * inv_mass_w_.dot(x) / (1.0 + rho_ * w_minv_w_);
      y -= coef * inv_mass_w_;
    }
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd s = mass_.asDiagonal();
    if (variant_ == SchurVariant::augmented) {
      s += rho_ * w_ * w_.transpose();
    }
    return s;
  }

private:
  Vector mass_;
  Vector w_;
  double rho_;
  SchurVariant variant_;
  Vector inv_mass_w_;
  double w_minv_w_;
};

/// Approximate action of A^{-1} inside a block preconditioner.
class InnerSolver {
public:
  virtual ~InnerSolver() = default;
  virtual void solve(const Vector& r, Vector& z) const = 0;
  long iterations() const noexcept { return iterations_; }
  void reset_iterations() const noexcept { iterations_ = 0; }

protected:
  mutable long iterations_ = 0;
};

struct InnerSolverOptions {
  double rel_tol = 1e-10;
  int max_iter = 2000;
  double drop_tol = 1e-3;
};

/// PCG preconditioned with threshold incomplete Cholesky.
class PcgInnerSolver final : public InnerSolver {
public:
  PcgInnerSolver(const SparseMatrix& a, InnerSolverOptions opts = {})
      : a_(&a), opts_(opts), ic_(incomplete_cholesky(a, opts.drop_tol)) {}

  void solve(const Vector& r, Vector& z) const override {
    SolveReport rep;
    KrylovOptions ko;
    ko.tol = opts_.rel_tol;
    ko.max_iter = opts_.max_iter;
    z = pcg(MatrixOperator<SparseMatrix>(*a_), ic_, r, ko, rep);
    iterations_ += rep.iterations;
    if (!rep.converged) {
      const double res = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
      throw preconditioner_failure("inner PCG did not converge in " +
                                       std::to_string(opts_.max_iter) + " iterations",
                                   res);
    }
  }

  const IncompleteCholesky& factor() const noexcept { return ic_; }
  const InnerSolverOptions& options() const noexcept { return opts_; }

private:
  const SparseMatrix* a_;
  InnerSolverOptions opts_;
  IncompleteCholesky ic_;
};

/// Sparse Cholesky, for exact inner solves.
class DirectInnerSolver final : public InnerSolver {
public:
  explicit DirectInnerSolver(const SparseMatrix& a) : llt_(Eigen::SparseMatrix<double>(a)) {
    if (llt_.info() != Eigen::Success) {
      throw factorization_failure("DirectInnerSolver: A is not positive definite");
    }
  }

  void solve(const Vector& r, Vector& z) const override { z = llt_.solve(r); }

private:
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

enum class PrecondKind {
  diagonal,         // diag(A, S_hat), for MINRES
  lower_triangular, // [A 0; -B -S_hat], for GMRES
};

inline std::string to_string(PrecondKind k) {
  return k == PrecondKind::diagonal ? "diag" : "tri";
}

inline PrecondKind parse_precond_kind(const std::string& s) {
  if (s == "diag" || s == "diagonal") return PrecondKind::diagonal;
  if (s == "tri" || s == "lower_triangular") return PrecondKind::lower_triangular;
  throw std::invalid_argument("unknown preconditioner '" + s + "'");
}

/// Block Schur complement preconditioner; apply() computes z = P^{-1} r.
class BlockPreconditioner {
public:
  BlockPreconditioner(PrecondKind kind, const SchurApprox& schur, const InnerSolver& inner,
                      const SparseMatrix& B)
      : kind_(kind), schur_(&schur), inner_(&inner), b_(&B) {}

  PrecondKind kind() const noexcept { return kind_; }

  void apply(const Vector& r, Vector& z) const {
    const auto nu = b_->cols();
    const auto np = b_->rows();
    if (r.size() != nu + np) {
      throw std::invalid_argument("BlockPreconditioner: residual has wrong size");
    }
    z.resize(r.size());
    Vector zu, zp;
    inner_->solve(r.head(nu), zu);
    if (kind_ == PrecondKind::diagonal) {
      schur_->apply_inverse(r.tail(np), zp);
    } else {
      Vector rhs = r.tail(np);
      rhs.noalias() += (*b_) * zu;
      schur_->apply_inverse(rhs, zp);
      zp = -zp;
    }
    z.head(nu) = zu;
    z.tail(np) = zp;
  }

private:
  PrecondKind kind_;
  const SchurApprox* schur_;
  const InnerSolver* inner_;
  const SparseMatrix* b_;
};

} // namespace wgstokes

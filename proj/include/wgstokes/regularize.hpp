#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "errors.hpp"

namespace wgstokes {

/// Choice of the regularization direction w.
enum class WeightKind {
  ones,          // w = 1 (normalized constant), gamma = 1
  mass_weighted, // w proportional to M_p 1 (mean-zero enforcement)
  pin,           // w = e_1, gamma = 1/sqrt(N)
  random,        // uniform [0,1]^N, normalized
};

/// finite: rho = 1 with the rank-one augmented Schur approximation.
/// small:  rho = 0.1 |K|_min with the plain mass-matrix approximation.
enum class Regime { finite, small };

inline constexpr std::uint64_t kDefaultSeed = 20240917;

inline std::string to_string(WeightKind k) {
  switch (k) {
  case WeightKind::ones: return "ones";
  case WeightKind::mass_weighted: return "mass";
  case WeightKind::pin: return "pin";
  case WeightKind::random: return "random";
  }
  return "?";
}

inline WeightKind parse_weight_kind(const std::string& s) {
  if (s == "ones" || s == "w1") return WeightKind::ones;
  if (s == "mass" || s == "mass_weighted" || s == "w2") return WeightKind::mass_weighted;
  if (s == "pin" || s == "w3") return WeightKind::pin;
  if (s == "random" || s == "w4") return WeightKind::random;
  throw std::invalid_argument("unknown regularization vector kind '" + s + "'");
}

inline std::string to_string(Regime r) { return r == Regime::finite ? "finite" : "small"; }

/// Pinning is the small-gamma case; every other kind has gamma = O(1).
inline Regime default_regime(WeightKind k) {
  return k == WeightKind::pin ? Regime::small : Regime::finite;
}

struct Regularization {
  Vector w;
  double rho = 1.0;
  double gamma = 1.0; // w^T 1 with 1 = (1/sqrt(N)) [1 ... 1]
  WeightKind kind = WeightKind::ones;
  Regime regime = Regime::finite;
  std::uint64_t seed = kDefaultSeed;
};

/// Unit regularization vector for the given element measures.
inline Regularization make_w(WeightKind kind, std::span<const double> measures,
                             std::uint64_t seed = kDefaultSeed) {
  const auto n = static_cast<Eigen::Index>(measures.size());
  if (n < 1) {
    throw std::invalid_argument("make_w: empty pressure space");
  }
  Regularization reg;
  reg.kind = kind;
  reg.regime = default_regime(kind);
  reg.seed = seed;
  reg.w.resize(n);
  switch (kind) {
  case WeightKind::ones:
    reg.w.setConstant(1.0);
    break;
  case WeightKind::mass_weighted:
    for (Eigen::Index i = 0; i < n; ++i) {
      reg.w[i] = measures[i];
    }
    break;
  case WeightKind::pin:
    if (n < 2) {
      throw std::invalid_argument("make_w: pinning needs at least two elements");
    }
    reg.w.setZero();
    reg.w[0] = 1.0;
    break;
  case WeightKind::random: {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      reg.w[i] = dist(gen);
    }
    break;
  }
  }
  const double norm = reg.w.norm();
  if (!(norm > 0.0)) {
    throw invalid_state("make_w: zero regularization vector");
  }
  reg.w /= norm;
  reg.gamma = reg.w.sum() / std::sqrt(static_cast<double>(n));
  if (!(std::abs(reg.gamma) > 1e-300)) {
    throw invalid_state("make_w: w is orthogonal to the constants (gamma = 0)");
  }
  return reg;
}

inline Regularization make_w(WeightKind kind, const Vector& measures,
                             std::uint64_t seed = kDefaultSeed) {
  return make_w(kind, std::span<const double>(measures.data(), measures.size()), seed);
}

/// rho = 1 in the finite regime, 0.1 * lambda_min(M_p) in the small regime.
inline double default_rho(Regime regime, double min_measure) {
  return regime == Regime::finite ? 1.0 : 0.1 * min_measure;
}

/// The rescaled regularized operator acting on (mu u, p):
///   [ A   -B^T        ]
///   [ -B  -rho w w^T  ]
/// The rank-one block is applied matrix-free.
class RegularizedOperator {
public:
  RegularizedOperator(const SparseMatrix& A, const SparseMatrix& B, const Vector& w, double rho)
      : A_(&A), B_(&B), w_(&w), rho_(rho) {
    if (B.cols() != A.rows() || w.size() != B.rows()) {
      throw std::invalid_argument("RegularizedOperator: block dimensions do not match");
    }
  }

  template <int Dim>
  RegularizedOperator(const SaddleSystem<Dim>& sys, const Regularization& reg)
      : RegularizedOperator(sys.A, sys.B, reg.w, reg.rho) {}

  Eigen::Index num_velocity() const noexcept { return A_->rows(); }
  Eigen::Index num_pressure() const noexcept { return B_->rows(); }
  Eigen::Index size() const noexcept { return num_velocity() + num_pressure(); }
  double rho() const noexcept { return rho_; }

  void apply(const Vector& x, Vector& y) const {
    if (x.size() != size()) {
      throw std::invalid_argument("RegularizedOperator: vector has size " +
                                  std::to_string(x.size()) + ", expected " +
                                  std::to_string(size()));
    }
    const auto nu = num_velocity();
    const auto np = num_pressure();
    y.resize(size());
    const auto xu = x.head(nu);
    const auto xp = x.tail(np);
    y.head(nu).noalias() = (*A_) * xu;
    y.head(nu).noalias() -= B_->transpose() * xp;
    y.tail(np).noalias() = -((*B_) * xu);
    y.tail(np) -= (rho_ * w_->dot(xp)) * (*w_);
  }

  Vector operator()(const Vector& x) const {
    Vector y;
    apply(x, y);
    return y;
  }

private:
  const SparseMatrix* A_;
  const SparseMatrix* B_;
  const Vector* w_;
  double rho_;
};

/// Right-hand side (b1, mu b2) of the rescaled system.
template <int Dim>
Vector rescaled_rhs(const SaddleSystem<Dim>& sys) {
  Vector b(sys.num_velocity() + sys.num_pressure());
  b.head(sys.num_velocity()) = sys.b1;
  b.tail(sys.num_pressure()) = sys.mu * sys.b2;
  return b;
}

} // namespace wgstokes

#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mesh.hpp"

namespace wgstokes {

/// Lowest-order Raviart-Thomas function on one element, a + b (x - x_K).
template <int Dim>
struct RT0Function {
  Point<Dim> a = Point<Dim>::Zero();
  double b = 0.0;
  Point<Dim> center = Point<Dim>::Zero();

  Point<Dim> operator()(const Point<Dim>& x) const { return a + b * (x - center); }

  double divergence() const noexcept { return Dim * b; }

  /// Coefficients stacked as (a_0, ..., a_{d-1}, b).
  Eigen::Matrix<double, Dim + 1, 1> coefficients() const {
    Eigen::Matrix<double, Dim + 1, 1> c;
    c.template head<Dim>() = a;
    c[Dim] = b;
    return c;
  }

  static RT0Function from_coefficients(const Eigen::Matrix<double, Dim + 1, 1>& c,
                                       const Point<Dim>& center) {
    return {c.template head<Dim>(), c[Dim], center};
  }
};

// Local scalar WG basis on element K is ordered as
//   0       -> interior value u°
//   1 + i   -> value on local facet i (opposite vertex i)
template <int Dim>
using LocalGradientMatrix = Eigen::Matrix<double, Dim + 1, Dim + 2>;
template <int Dim>
using LocalStiffness = Eigen::Matrix<double, Dim + 2, Dim + 2>;
template <int Dim>
using RT0Gram = Eigen::Matrix<double, Dim + 1, Dim + 1>;

/// Exact Gram matrix of the RT0 basis {e_1, ..., e_d, x - x_K} on K.
///
/// Uses the simplex moment identity
///   int_K (x - x_K)(x - x_K)^T = |K| / ((d+1)(d+2)) sum_i (v_i - x_K)(v_i - x_K)^T,
/// and the first moments of x - x_K vanish at the centroid.
template <int Dim>
RT0Gram<Dim> rt0_gram(const Mesh<Dim>& mesh, int k) {
  const double vol = mesh.element_measure(k);
  const auto& xc = mesh.element_centroid(k);
  double second = 0.0;
  for (const auto& v : mesh.element_vertex_points(k)) {
    second += (v - xc).squaredNorm();
  }
  second *= vol / ((Dim + 1.0) * (Dim + 2.0));
  RT0Gram<Dim> g = RT0Gram<Dim>::Zero();
  for (int j = 0; j < Dim; ++j) {
    g(j, j) = vol;
  }
  g(Dim, Dim) = second;
  return g;
}

/// Right-hand side of the weak-gradient identity
///   (grad_w u, w)_K = <u^bd, w.n>_{dK} - (u°, div w)_K
/// for each RT0 basis w (rows) and each local WG basis function (columns).
template <int Dim>
LocalGradientMatrix<Dim> weak_gradient_rhs(const Mesh<Dim>& mesh, int k) {
  LocalGradientMatrix<Dim> r = LocalGradientMatrix<Dim>::Zero();
  const auto& xc = mesh.element_centroid(k);
  r(Dim, 0) = -Dim * mesh.element_measure(k);
  for (int i = 0; i <= Dim; ++i) {
    const auto n = mesh.outward_normal(k, i);
    const double area = mesh.local_facet_measure(k, i);
    const auto& mid = mesh.facet_midpoint(mesh.element_facet(k, i));
    r.template block<Dim, 1>(0, 1 + i) = area * n;
    r(Dim, 1 + i) = area * (mid - xc).dot(n);
  }
  return r;
}

/// Weak gradient of the local scalar WG basis: column j holds the RT0
/// coefficients of grad_w phi_j. Obtained from the local Gram solve.
template <int Dim>
LocalGradientMatrix<Dim> local_weak_gradient(const Mesh<Dim>& mesh, int k) {
  const auto gram = rt0_gram(mesh, k);
  Eigen::LDLT<RT0Gram<Dim>> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw internal_error("singular RT0 Gram matrix on element " + std::to_string(k));
  }
  return ldlt.solve(weak_gradient_rhs(mesh, k));
}

/// Weights w such that (div_w u)|_K = w . u_local, with local velocity DOFs
/// ordered (u° components, then u^bd_i components for i = 0..d). Interior
/// components get weight zero.
template <int Dim>
Eigen::Matrix<double, 1, Dim*(Dim + 2)> local_weak_divergence(const Mesh<Dim>& mesh, int k) {
  Eigen::Matrix<double, 1, Dim*(Dim + 2)> w = Eigen::Matrix<double, 1, Dim*(Dim + 2)>::Zero();
  const double inv_vol = 1.0 / mesh.element_measure(k);
  for (int i = 0; i <= Dim; ++i) {
    const auto n = mesh.outward_normal(k, i);
    const double area = mesh.local_facet_measure(k, i);
    for (int c = 0; c < Dim; ++c) {
      w[Dim * (1 + i) + c] = area * n[c] * inv_vol;
    }
  }
  return w;
}

/// Maps the d+1 facet normal fluxes of K to RT0 coefficients: the RT0 field
/// with normal component q_i on facet i is rt0_from_fluxes(K) * q.
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> rt0_from_fluxes(const Mesh<Dim>& mesh, int k) {
  Eigen::Matrix<double, Dim + 1, Dim + 1> m;
  const auto& xc = mesh.element_centroid(k);
  for (int i = 0; i <= Dim; ++i) {
    const auto n = mesh.outward_normal(k, i);
    const auto& mid = mesh.facet_midpoint(mesh.element_facet(k, i));
    m.template block<1, Dim>(i, 0) = n.transpose();
    m(i, Dim) = (mid - xc).dot(n);
  }
  Eigen::FullPivLU<Eigen::Matrix<double, Dim + 1, Dim + 1>> lu(m);
  if (!lu.isInvertible()) {
    throw internal_error("RT0 flux matrix is singular on element " + std::to_string(k));
  }
  return lu.inverse();
}

/// Lifting operator: the RT0 field on K whose normal component on facet i
/// equals facet_values[i] . n_i. Depends only on the facet values.
template <int Dim>
RT0Function<Dim> lifting(const Mesh<Dim>& mesh, int k,
                         const std::array<Point<Dim>, Dim + 1>& facet_values) {
  Eigen::Matrix<double, Dim + 1, 1> flux;
  for (int i = 0; i <= Dim; ++i) {
    flux[i] = facet_values[i].dot(mesh.outward_normal(k, i));
  }
  return RT0Function<Dim>::from_coefficients(rt0_from_fluxes(mesh, k) * flux,
                                             mesh.element_centroid(k));
}

/// Local WG stiffness (grad_w phi_i, grad_w phi_j)_K for one scalar
/// component, from the weak gradient and the exact RT0 Gram matrix.
template <int Dim>
LocalStiffness<Dim> local_stiffness(const Mesh<Dim>& mesh, int k) {
  const auto c = local_weak_gradient(mesh, k);
  LocalStiffness<Dim> s = c.transpose() * rt0_gram(mesh, k) * c;
  return 0.5 * (s + s.transpose());
}

/// Degree-of-freedom layout of the WG velocity/pressure spaces.
///
/// Velocity unknowns: d interior components per element (index K*d + c),
/// followed by d components per interior facet. Boundary facet values are
/// data and get a boundary slot instead of an unknown.
template <int Dim>
class DofMap {
public:
  explicit DofMap(const Mesh<Dim>& mesh)
      : num_elements_(mesh.num_elements()),
        facet_index_(mesh.num_facets(), -1),
        boundary_index_(mesh.num_facets(), -1),
        local_facet_(mesh.num_elements()) {
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (mesh.facet(f).on_boundary()) {
        boundary_index_[f] = num_boundary_++;
      } else {
        facet_index_[f] = num_interior_++;
      }
    }
    for (int k = 0; k < num_elements_; ++k) {
      for (int i = 0; i <= Dim; ++i) {
        local_facet_[k][i] = mesh.element_facet(k, i);
      }
    }
  }

  int num_elements() const noexcept { return num_elements_; }
  int num_interior_facets() const noexcept { return num_interior_; }
  int num_boundary_facets() const noexcept { return num_boundary_; }
  int num_velocity() const noexcept { return Dim * (num_elements_ + num_interior_); }
  int num_pressure() const noexcept { return num_elements_; }
  int first_facet_dof() const noexcept { return Dim * num_elements_; }

  int interior_dof(int k, int c) const noexcept { return k * Dim + c; }

  /// Global velocity DOF of component c on facet f, or -1 on the boundary.
  int facet_dof(int f, int c) const noexcept {
    const int idx = facet_index_[f];
    return idx < 0 ? -1 : Dim * num_elements_ + idx * Dim + c;
  }

  int local_facet_dof(int k, int i, int c) const noexcept {
    return facet_dof(local_facet_[k][i], c);
  }

  /// Index of facet f among boundary facets, or -1 for interior facets.
  int boundary_slot(int f) const noexcept { return boundary_index_[f]; }

private:
  int num_elements_;
  int num_interior_ = 0;
  int num_boundary_ = 0;
  std::vector<int> facet_index_;
  std::vector<int> boundary_index_;
  std::vector<std::array<int, Dim + 1>> local_facet_;
};

} // namespace wgstokes

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/SparseExtra>

#include "mesh.hpp"
#include "quadrature.hpp"
#include "wg_core.hpp"

namespace wgstokes {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

template <int Dim>
using VectorField = std::function<Point<Dim>(const Point<Dim>&)>;

/// Singular WG saddle-point system
///   [ mu A   -B^T ] [u]   [b1]
///   [ -B      0   ] [p] = [b2]
/// with boundary velocity data already eliminated.
template <int Dim>
struct SaddleSystem {
  SparseMatrix A;      // velocity stiffness, d copies of the scalar WG Laplacian
  SparseMatrix B;      // pressure x velocity, weak divergence on interior facets
  Vector Mp;           // diagonal of the pressure mass matrix, |K|
  Vector b1;
  Vector b2;
  double alpha_h = 0.0; // sqrt(N) * 1^T b2, the consistency defect
  double mu = 1.0;
  DofMap<Dim> dofs;
  Eigen::Matrix<double, Eigen::Dynamic, Dim> boundary_values; // Q_h g per boundary slot

  int num_velocity() const noexcept { return static_cast<int>(A.rows()); }
  int num_pressure() const noexcept { return static_cast<int>(B.rows()); }
};

/// Q_h g on every boundary facet, indexed by DofMap::boundary_slot.
template <int Dim>
Eigen::Matrix<double, Eigen::Dynamic, Dim> project_boundary_datum(const Mesh<Dim>& mesh,
                                                                  const DofMap<Dim>& dofs,
                                                                  const VectorField<Dim>& g,
                                                                  const BoundaryRule& rule) {
  const auto q = facet_rule<Dim>(rule);
  Eigen::Matrix<double, Eigen::Dynamic, Dim> values(dofs.num_boundary_facets(), Dim);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const int slot = dofs.boundary_slot(f);
    if (slot < 0) {
      continue;
    }
    const auto pts = mesh.facet_vertex_points(f);
    Point<Dim> avg = Point<Dim>::Zero();
    for (int p = 0; p < q.size(); ++p) {
      avg += q.weights[p] * g(map_bary<Dim>(pts, q.bary[p]));
    }
    values.row(slot) = avg.transpose();
  }
  return values;
}

/// alpha_h = sum over boundary facets of |e| (Q_h g - <g>_e) . n_e, with the
/// exact facet average replaced by a collapsed Gauss rule of degree >= 10.
template <int Dim>
double compute_alpha(const Mesh<Dim>& mesh, const VectorField<Dim>& g, const BoundaryRule& rule) {
  const auto q = facet_rule<Dim>(rule);
  const auto ref = collapsed_gauss<Dim - 1>(6);
  double alpha = 0.0;
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.facet(f).on_boundary()) {
      continue;
    }
    const auto pts = mesh.facet_vertex_points(f);
    Point<Dim> approx = Point<Dim>::Zero();
    for (int p = 0; p < q.size(); ++p) {
      approx += q.weights[p] * g(map_bary<Dim>(pts, q.bary[p]));
    }
    Point<Dim> exact = Point<Dim>::Zero();
    for (int p = 0; p < ref.size(); ++p) {
      exact += ref.weights[p] * g(map_bary<Dim>(pts, ref.bary[p]));
    }
    alpha += mesh.facet_measure(f) * (approx - exact).dot(mesh.facet_normal(f));
  }
  return alpha;
}

/// Assembles A, B, M_p, b1 and b2.
///
/// The load (f, Lambda_h v)_K is integrated with a degree-2 rule; Q_h g uses
/// the given boundary rule. Contributions of the boundary facet values are
/// moved to b1 (through mu * A) and b2 (through the weak divergence).
template <int Dim>
SaddleSystem<Dim> assemble(const Mesh<Dim>& mesh, double mu, const VectorField<Dim>& f,
                           const VectorField<Dim>& g, const BoundaryRule& rule) {
  if (!(mu > 0.0)) {
    throw std::invalid_argument("assemble: viscosity must be positive");
  }
  DofMap<Dim> dofs(mesh);
  const int nu = dofs.num_velocity();
  const int np = dofs.num_pressure();

  SaddleSystem<Dim> sys{SparseMatrix(nu, nu), SparseMatrix(np, nu), Vector(np), Vector::Zero(nu),
                        Vector::Zero(np), 0.0, mu, dofs,
                        project_boundary_datum(mesh, dofs, g, rule)};

  const auto load_rule = simplex_rule_of_degree<Dim>(2);
  std::vector<Eigen::Triplet<double>> a_trip;
  std::vector<Eigen::Triplet<double>> b_trip;
  a_trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * Dim * (Dim + 2) * (Dim + 2));
  b_trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * Dim * (Dim + 1));

  for (int k = 0; k < mesh.num_elements(); ++k) {
    const double vol = mesh.element_measure(k);
    sys.Mp[k] = vol;
    const auto stiff = local_stiffness(mesh, k);
    const auto& xc = mesh.element_centroid(k);

    // Boundary data per local facet (zero rows for interior facets).
    std::array<Point<Dim>, Dim + 1> bvals;
    std::array<bool, Dim + 1> on_bd{};
    for (int i = 0; i <= Dim; ++i) {
      const int fi = mesh.element_facet(k, i);
      on_bd[i] = mesh.facet(fi).on_boundary();
      bvals[i] = on_bd[i] ? Point<Dim>(sys.boundary_values.row(dofs.boundary_slot(fi)).transpose())
                          : Point<Dim>::Zero();
    }

    for (int c = 0; c < Dim; ++c) {
      std::array<int, Dim + 2> idx{};
      idx[0] = dofs.interior_dof(k, c);
      for (int i = 0; i <= Dim; ++i) {
        idx[1 + i] = dofs.local_facet_dof(k, i, c);
      }
      for (int a = 0; a < Dim + 2; ++a) {
        if (idx[a] < 0) {
          continue;
        }
        for (int b = 0; b < Dim + 2; ++b) {
          if (idx[b] >= 0) {
            a_trip.emplace_back(idx[a], idx[b], stiff(a, b));
          } else {
            sys.b1[idx[a]] -= mu * stiff(a, b) * bvals[b - 1][c];
          }
        }
      }
    }

    for (int i = 0; i <= Dim; ++i) {
      const auto n = mesh.outward_normal(k, i);
      const double area = mesh.local_facet_measure(k, i);
      if (on_bd[i]) {
        sys.b2[k] += area * bvals[i].dot(n);
      } else {
        for (int c = 0; c < Dim; ++c) {
          b_trip.emplace_back(k, dofs.local_facet_dof(k, i, c), area * n[c]);
        }
      }
    }

    // Load against the lifted facet basis: int_K f . (a + b (x - x_K)).
    const auto verts = mesh.element_vertex_points(k);
    Point<Dim> m0 = Point<Dim>::Zero();
    double m1 = 0.0;
    for (int q = 0; q < load_rule.size(); ++q) {
      const auto x = map_bary<Dim>(verts, load_rule.bary[q]);
      const auto fx = f(x);
      m0 += load_rule.weights[q] * vol * fx;
      m1 += load_rule.weights[q] * vol * fx.dot(x - xc);
    }
    const auto lift = rt0_from_fluxes(mesh, k);
    for (int i = 0; i <= Dim; ++i) {
      if (on_bd[i]) {
        continue;
      }
      const auto n = mesh.outward_normal(k, i);
      const double moment = m0.dot(lift.col(i).template head<Dim>()) + m1 * lift(Dim, i);
      for (int c = 0; c < Dim; ++c) {
        sys.b1[dofs.local_facet_dof(k, i, c)] += n[c] * moment;
      }
    }
  }

  sys.A.setFromTriplets(a_trip.begin(), a_trip.end());
  sys.B.setFromTriplets(b_trip.begin(), b_trip.end());
  sys.A.makeCompressed();
  sys.B.makeCompressed();
  sys.alpha_h = sys.b2.sum();
  return sys;
}

/// Writes A.mtx, B.mtx, Mp.mtx (sparse diagonal), b1.mtx and b2.mtx.
template <int Dim>
void export_matrix_market(const SaddleSystem<Dim>& sys, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SparseMatrix mp(sys.num_pressure(), sys.num_pressure());
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < sys.num_pressure(); ++k) {
    trip.emplace_back(k, k, sys.Mp[k]);
  }
  mp.setFromTriplets(trip.begin(), trip.end());
  const bool ok = Eigen::saveMarket(sys.A, (dir / "A.mtx").string()) &&
                  Eigen::saveMarket(sys.B, (dir / "B.mtx").string()) &&
                  Eigen::saveMarket(mp, (dir / "Mp.mtx").string()) &&
                  Eigen::saveMarketVector(sys.b1, (dir / "b1.mtx").string()) &&
                  Eigen::saveMarketVector(sys.b2, (dir / "b2.mtx").string());
  if (!ok) {
    throw std::runtime_error("failed to write Matrix Market files to " + dir.string());
  }
}

} // namespace wgstokes

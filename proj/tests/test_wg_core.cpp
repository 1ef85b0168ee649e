#include <map>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <wgstokes/mesh.hpp>
#include <wgstokes/quadrature.hpp>
#include <wgstokes/wg_core.hpp>

using namespace wgstokes;

namespace {

template <int Dim>
Eigen::Matrix<double, Dim + 2, 1> interpolate(const Mesh<Dim>& m, int k,
                                              const std::function<double(const Point<Dim>&)>& u) {
  Eigen::Matrix<double, Dim + 2, 1> v;
  v[0] = u(m.element_centroid(k));
  for (int i = 0; i <= Dim; ++i) v[1 + i] = u(m.facet_midpoint(m.element_facet(k, i)));
  return v;
}

Mesh<2> reference_triangle() {
  return Mesh<2>({Point<2>(0, 0), Point<2>(1, 0), Point<2>(0, 1)}, {{0, 1, 2}});
}

template <int Dim>
void check_affine_exactness(int n) {
  const auto m = generate_structured<Dim>(n);
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Point<Dim> g;
  for (int j = 0; j < Dim; ++j) g[j] = dist(gen);
  const double c0 = dist(gen);
  auto u = [&](const Point<Dim>& x) { return g.dot(x) + c0; };
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto coef = local_weak_gradient(m, k) * interpolate<Dim>(m, k, u);
    EXPECT_LE((coef.template head<Dim>() - g).norm(), 1e-12);
    EXPECT_LE(std::abs(coef[Dim]), 1e-12);
  }
}

template <int Dim>
void check_identity_divergence(int n) {
  const auto m = generate_structured<Dim>(n);
  Eigen::Matrix<double, Dim *(Dim + 2), 1> ident, constant;
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto w = local_weak_divergence(m, k);
    for (int c = 0; c < Dim; ++c) {
      ident[c] = m.element_centroid(k)[c];
      constant[c] = 0.7 + c;
      for (int i = 0; i <= Dim; ++i) {
        ident[Dim * (1 + i) + c] = m.facet_midpoint(m.element_facet(k, i))[c];
        constant[Dim * (1 + i) + c] = 0.7 + c;
      }
    }
    EXPECT_NEAR(w.dot(ident), Dim, 1e-12);
    EXPECT_NEAR(w.dot(constant), 0.0, 1e-12);
  }
}

} // namespace

TEST(WeakGradient, ConstantHasZeroGradient) {
  const auto m = generate_structured<3>(1);
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto coef = local_weak_gradient(m, k) * Eigen::Matrix<double, 5, 1>::Constant(3.5);
    EXPECT_LE(coef.norm(), 1e-13);
  }
}

TEST(WeakGradient, ExactOnAffineFields2d) { check_affine_exactness<2>(8); }
TEST(WeakGradient, ExactOnAffineFields3d) { check_affine_exactness<3>(2); }

TEST(WeakGradient, SingleFacetValueGivesFacetNormal) {
  const auto m = generate_structured<2>(2);
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto c = local_weak_gradient(m, k);
    for (int i = 0; i < 3; ++i) {
      // (grad_w u, e_j)_K = |K| a_j since x - x_K has zero mean.
      const Point<2> a = c.block<2, 1>(0, 1 + i) * m.element_measure(k);
      EXPECT_LE((a - m.local_facet_measure(k, i) * m.outward_normal(k, i)).norm(), 1e-13);
    }
  }
}

// Checks the defining identity against quadrature, independently of the Gram solve.
TEST(WeakGradient, SatisfiesIntegrationByPartsIdentity) {
  const auto m = generate_structured<3>(1);
  const auto vol_rule = simplex_rule_of_degree<3>(2);
  const auto face_rule = collapsed_gauss<2>(2);
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto c = local_weak_gradient(m, k);
    const auto& xc = m.element_centroid(k);
    const auto verts = m.element_vertex_points(k);
    for (int r = 0; r < 4; ++r) {  // RT0 test basis
      auto w = [&](const Point<3>& x) -> Point<3> {
        if (r < 3) return Point<3>::Unit(r);
        return x - xc;
      };
      const double divw = r < 3 ? 0.0 : 3.0;
      for (int j = 0; j < 5; ++j) {  // local WG basis
        const auto g = RT0Function<3>::from_coefficients(c.col(j), xc);
        double lhs = 0.0;
        for (int q = 0; q < vol_rule.size(); ++q) {
          const auto x = map_bary<3>(verts, vol_rule.bary[q]);
          lhs += vol_rule.weights[q] * m.element_measure(k) * g(x).dot(w(x));
        }
        double rhs = j == 0 ? -divw * m.element_measure(k) : 0.0;
        if (j > 0) {
          const int i = j - 1;
          const auto fv = m.local_facet_vertices(k, i);
          for (int q = 0; q < face_rule.size(); ++q) {
            const auto x = map_bary<3>(fv, face_rule.bary[q]);
            rhs += face_rule.weights[q] * m.local_facet_measure(k, i) * w(x).dot(m.outward_normal(k, i));
          }
        }
        EXPECT_NEAR(lhs, rhs, 1e-13) << "k=" << k << " r=" << r << " j=" << j;
      }
    }
  }
}

TEST(WeakDivergence, IdentityAndConstantFields2d) { check_identity_divergence<2>(8); }
TEST(WeakDivergence, IdentityAndConstantFields3d) { check_identity_divergence<3>(2); }

TEST(WeakDivergence, SingleFacetNormal) {
  const auto m = generate_structured<3>(1);
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto w = local_weak_divergence(m, k);
    EXPECT_EQ(w.head<3>().norm(), 0.0);
    for (int i = 0; i < 4; ++i) {
      Eigen::Matrix<double, 15, 1> u = Eigen::Matrix<double, 15, 1>::Zero();
      u.segment<3>(3 * (1 + i)) = m.outward_normal(k, i);
      EXPECT_NEAR(w.dot(u), m.local_facet_measure(k, i) / m.element_measure(k), 1e-12);
    }
  }
}

TEST(Lifting, ConstantValuesGiveConstantField) {
  const auto m = generate_structured<2>(2);
  const Point<2> c(1.5, -0.25);
  for (int k = 0; k < m.num_elements(); ++k) {
    const auto l = lifting(m, k, {c, c, c});
    EXPECT_LE((l.a - c).norm(), 1e-13);
    EXPECT_LE(std::abs(l.b), 1e-13);
  }
}

TEST(Lifting, IdentityFieldIsReproduced) {
  const auto m = generate_structured<3>(1);
  for (int k = 0; k < m.num_elements(); ++k) {
    std::array<Point<3>, 4> vals;
    for (int i = 0; i < 4; ++i) vals[i] = m.facet_midpoint(m.element_facet(k, i));
    const auto l = lifting(m, k, vals);
    const Point<3> x(0.3, 0.1, 0.9);
    EXPECT_LE((l(x) - x).norm(), 1e-13);
  }
}

TEST(Lifting, ZeroNormalFluxGivesZeroField) {
  const auto m = generate_structured<2>(1);
  for (int k = 0; k < m.num_elements(); ++k) {
    std::array<Point<2>, 3> vals;
    for (int i = 0; i < 3; ++i) {
      const auto n = m.outward_normal(k, i);
      vals[i] = Point<2>(-n[1], n[0]) * (i + 1.0);
    }
    const auto l = lifting(m, k, vals);
    EXPECT_LE(l.coefficients().norm(), 1e-13);
  }
}

TEST(Lifting, ReproducesRandomRT0Fields) {
  const auto m = generate_structured<3>(2);
  std::mt19937 gen(11);
  std::normal_distribution<double> dist;
  for (int k = 0; k < m.num_elements(); ++k) {
    RT0Function<3> f{Point<3>(dist(gen), dist(gen), dist(gen)), dist(gen), m.element_centroid(k)};
    std::array<Point<3>, 4> vals;
    for (int i = 0; i < 4; ++i) {
      // Any vector with the right normal component; add a tangential part.
      const auto& mid = m.facet_midpoint(m.element_facet(k, i));
      const auto n = m.outward_normal(k, i);
      Point<3> t = Point<3>(dist(gen), dist(gen), dist(gen));
      t -= t.dot(n) * n;
      vals[i] = f(mid) + t;
    }
    const auto l = lifting(m, k, vals);
    EXPECT_LE((l.coefficients() - f.coefficients()).norm(), 1e-12);
  }
}

TEST(LocalStiffness, ReferenceTriangleMatchesSymbolicOracle) {
  // Exact rational evaluation of (grad_w phi_i, grad_w phi_j)_K; basis order
  // interior, facet opposite (0,0), opposite (1,0), opposite (0,1).
  Eigen::Matrix4d expected;
  expected << 18, -6, -6, -6,
              -6, 6, 0, 0,
              -6, 0, 4, 2,
              -6, 0, 2, 4;
  const auto m = reference_triangle();
  EXPECT_LE((local_stiffness(m, 0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LocalStiffness, SymmetricPsdWithOneDimensionalKernel) {
  const auto m2 = generate_structured<2>(3);
  for (int k = 0; k < m2.num_elements(); ++k) {
    const auto s = local_stiffness(m2, k);
    EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((s * Eigen::Vector4d::Ones()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s);
    const auto ev = es.eigenvalues();
    EXPECT_GE(ev[0], -1e-12 * ev[3]);
    EXPECT_LE(std::abs(ev[0]), 1e-12 * ev[3]);
    EXPECT_GT(ev[1], 1e-8 * ev[3]);
  }
  const auto m3 = generate_structured<3>(1);
  for (int k = 0; k < m3.num_elements(); ++k) {
    const auto s = local_stiffness(m3, k);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> es(s);
    EXPECT_LE(std::abs(es.eigenvalues()[0]), 1e-12 * es.eigenvalues()[4]);
    EXPECT_GT(es.eigenvalues()[1], 1e-8 * es.eigenvalues()[4]);
  }
}

TEST(RT0, NormalComponentIsConstantOnFacets) {
  const auto m = generate_structured<3>(1);
  std::mt19937 gen(3);
  std::normal_distribution<double> dist;
  for (int k = 0; k < m.num_elements(); ++k) {
    RT0Function<3> f{Point<3>(dist(gen), dist(gen), dist(gen)), dist(gen), m.element_centroid(k)};
    for (int i = 0; i < 4; ++i) {
      const auto v = m.local_facet_vertices(k, i);
      const auto n = m.outward_normal(k, i);
      EXPECT_NEAR(f(v[0]).dot(n), f(v[1]).dot(n), 1e-12);
      EXPECT_NEAR(f(v[0]).dot(n), f(v[2]).dot(n), 1e-12);
    }
  }
}

TEST(DofMap, CountsAndSharing) {
  const auto m = generate_structured<2>(4);
  const DofMap<2> dofs(m);
  EXPECT_EQ(dofs.num_velocity(), 2 * (m.num_elements() + m.num_interior_facets()));
  EXPECT_EQ(dofs.num_pressure(), m.num_elements());
  std::map<int, int> refs;
  for (int k = 0; k < m.num_elements(); ++k) {
    for (int i = 0; i < 3; ++i) {
      const int dof = dofs.local_facet_dof(k, i, 0);
      if (dof >= 0) ++refs[dof];
      else EXPECT_GE(dofs.boundary_slot(m.element_facet(k, i)), 0);
    }
  }
  EXPECT_EQ(static_cast<int>(refs.size()), m.num_interior_facets());
  for (const auto& [dof, count] : refs) EXPECT_EQ(count, 2) << dof;
}

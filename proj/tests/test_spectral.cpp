#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <wgstokes/assembly.hpp>
#include <wgstokes/manufactured.hpp>
#include <wgstokes/spectral.hpp>

using namespace wgstokes;

namespace {

template <int Dim>
struct Fixture {
  Mesh<Dim> mesh;
  SaddleSystem<Dim> sys;
  DenseSpectralData data;

  explicit Fixture(int n)
      : mesh(generate_structured<Dim>(n)),
        sys([&] {
          const auto mc = default_case<Dim>(1.0);
          return assemble(mesh, 1.0, mc.f, mc.u, BoundaryRule::midpoint());
        }()),
        data(dense_spectral_data(mesh, sys)) {}
};

} // namespace

TEST(Beta, SingleStructuralZeroAndBoundedSpectrum) {
  for (int n : {4, 8, 16}) {
    const Fixture<2> f(n);
    const auto& ev = f.data.pencil_eigenvalues;
    EXPECT_LE(std::abs(ev[0]), 1e-10) << n;
    EXPECT_GT(ev[1], 1e-8) << n;
    EXPECT_LE(ev[ev.size() - 1], 2.0 + 1e-8) << n;
    // Inf-sup constant stays bounded away from zero under refinement.
    const double b2 = f.data.beta * f.data.beta;
    EXPECT_GT(b2, 0.15) << n;
    EXPECT_LT(b2, 0.5) << n;
  }
  const Fixture<3> f3(1);
  EXPECT_LE(f3.data.pencil_eigenvalues.maxCoeff(), 3.0 + 1e-8);
}

TEST(Beta, RankAnomalyWhenDivergenceLosesRank) {
  const auto mesh = generate_structured<2>(2);
  const auto mc = stokes_2d(1.0);
  auto sys = assemble(mesh, 1.0, mc.f, mc.u, BoundaryRule::midpoint());
  sys.B = SparseMatrix(sys.B.rows(), sys.B.cols());
  EXPECT_THROW(dense_spectral_data(mesh, sys), rank_anomaly);
}

TEST(Beta, SmallestStiffnessEigenvalueFromScalarBlock) {
  const Fixture<2> f(4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.data.A, Eigen::EigenvaluesOnly);
  EXPECT_NEAR(f.data.lambda_min_A, es.eigenvalues()[0], 1e-10 * es.eigenvalues()[0]);
}

TEST(Lemma, SchurFiniteUpperBoundIsDimension) {
  const Fixture<2> f(4);
  auto reg = make_w(WeightKind::ones, f.sys.Mp);
  reg.rho = 1.0;
  const auto rep = verify_lemma(Lemma::schur_finite, f.data, reg, SchurVariant::augmented);
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.eigenvalues.maxCoeff(), 2.0 + 1e-8);
  EXPECT_GE(rep.eigenvalues.minCoeff(), rep.c1 - 10.0 * f.data.h * f.data.h);
}

TEST(Lemma, PreconditionedFiniteHasNoZeroAndOnlyKernelUnitEigenvalues) {
  const Fixture<2> f(4);
  auto reg = make_w(WeightKind::ones, f.sys.Mp);
  const auto rep = verify_lemma(Lemma::precond_finite, f.data, reg, SchurVariant::augmented);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.near_zero, 0);
  EXPECT_EQ(rep.unit_with_pressure, 0);
  // Velocities in ker(B) with zero pressure: dim = nu - (N - 1).
  EXPECT_EQ(rep.kernel_unit_eigenvalues, f.sys.num_velocity() - f.sys.num_pressure() + 1);
  int neg = 0;
  for (double v : rep.eigenvalues) neg += v < 0.0;
  EXPECT_EQ(neg, f.sys.num_pressure());
}

TEST(Lemma, SchurSmallOutlierScalesWithRho) {
  const Fixture<2> f(4);
  auto reg = make_w(WeightKind::pin, f.sys.Mp);
  const double n = f.sys.num_pressure();
  double last_ratio = 0.0;
  for (double s : {1e-4, 1e-5, 1e-6, 1e-7}) {
    reg.rho = s * f.data.lambda_min_M;
    const auto rep = verify_lemma(Lemma::schur_small, f.data, reg, SchurVariant::plain);
    EXPECT_TRUE(rep.passed) << s;
    last_ratio = rep.outlier / reg.rho;
  }
  // lambda_1 / rho -> gamma^2 N / |Omega| = 1 for pinning.
  EXPECT_NEAR(last_ratio, reg.gamma * reg.gamma * n / f.data.domain_measure, 0.05);
}

TEST(Lemma, PreconditionedSmallPassesIn3d) {
  const Fixture<3> f(1);
  auto reg = make_w(WeightKind::pin, f.sys.Mp);
  reg.rho = 1e-6 * f.data.lambda_min_M;
  const auto rep = verify_lemma(Lemma::precond_small, f.data, reg, SchurVariant::plain);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.outlier, 0.0);
  EXPECT_LE(rep.outlier_rel_error, 0.05);
}

TEST(Lemma, ParseNames) {
  EXPECT_EQ(parse_lemma("L5_2"), Lemma::precond_small);
  EXPECT_EQ(to_string(Lemma::schur_finite), "L4_2");
  EXPECT_THROW(parse_lemma("L9_9"), std::invalid_argument);
}

TEST(Bounds, MinresFactorArithmetic) {
  BoundParams p;
  p.dim = 2;
  p.c1 = 0.2;
  p.lambda_min_A = 1.0;
  p.lambda_max_M = 1.0;
  const auto c = finite_regime_bounds(p);
  const double s = std::sqrt(2.0) * 4.0;
  EXPECT_NEAR(c.minres_factor, (s - 0.4) / (s + 0.4), 1e-15);
  EXPECT_LT(c.minres_factor, 1.0);
  EXPECT_NEAR(c.minres(4), 2.0 * std::pow(c.minres_factor, 2), 1e-15);
  EXPECT_NEAR(c.gmres_factor, (std::sqrt(2.0) - std::sqrt(0.2)) / (std::sqrt(2.0) + std::sqrt(0.2)), 1e-15);
}

TEST(Bounds, FiniteFactorBelowOneAtMaximalC1) {
  const Fixture<2> f(4);
  auto reg = make_w(WeightKind::ones, f.sys.Mp);
  const auto c = finite_regime_bounds(bound_params(f.data, reg, 0.0));
  EXPECT_LT(c.minres_factor, 1.0);
  EXPECT_LT(c.gmres_factor, 1.0);
}

TEST(Bounds, SmallRegimeConstraintsAndScaling) {
  BoundParams p;
  p.dim = 2;
  p.beta = std::sqrt(0.2);
  p.lambda_min_M = 1.0;
  p.lambda_max_M = 1.0;
  p.lambda_min_A = 1.0;
  p.gamma = 0.1;
  p.num_elements = 100;
  p.domain_measure = 1.0;
  p.rho = 0.5;
  EXPECT_THROW(small_regime_bounds(p), constraint_violation);
  // The asymptotic constant behaves like C / (gamma^2 N rho) as rho -> 0.
  p.rho = 1e-6;
  const double c6 = small_regime_bounds(p).minres(1);
  p.rho = 1e-7;
  const double c7 = small_regime_bounds(p).minres(1);
  EXPECT_NEAR(c7 / c6, 10.0, 1e-3);
}

TEST(Bounds, FiniteRequiresPositiveC1) {
  BoundParams p;
  EXPECT_THROW(finite_regime_bounds(p), constraint_violation);
}

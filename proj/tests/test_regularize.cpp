#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <wgstokes/assembly.hpp>
#include <wgstokes/manufactured.hpp>
#include <wgstokes/regularize.hpp>
#include <wgstokes/spectral.hpp>

using namespace wgstokes;

namespace {

SaddleSystem<2> small_system(int n) {
  const auto mc = stokes_2d(1.0);
  return assemble(generate_structured<2>(n), 1.0, mc.f, mc.u, BoundaryRule::midpoint());
}

Vector random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

} // namespace

TEST(MakeW, OnesOfSizeFour) {
  const auto reg = make_w(WeightKind::ones, Vector::Constant(4, 0.25));
  EXPECT_LE((reg.w - Vector::Constant(4, 0.5)).norm(), 1e-15);
  EXPECT_NEAR(reg.gamma, 1.0, 1e-15);
}

TEST(MakeW, PinOfSizeHundred) {
  const auto reg = make_w(WeightKind::pin, Vector::Constant(100, 0.01));
  EXPECT_EQ(reg.w[0], 1.0);
  EXPECT_EQ(reg.w.tail(99).norm(), 0.0);
  EXPECT_NEAR(reg.gamma, 0.1, 1e-15);
  EXPECT_EQ(reg.regime, Regime::small);
}

TEST(MakeW, MassWeightedOnUniformMeshIsOnes) {
  const auto reg = make_w(WeightKind::mass_weighted, Vector::Constant(32, 1.0 / 32));
  EXPECT_LE((reg.w - Vector::Constant(32, 1.0 / std::sqrt(32.0))).norm(), 1e-14);
  EXPECT_NEAR(reg.gamma, 1.0, 1e-14);
}

TEST(MakeW, MassWeightedGammaOnNonuniformMeasures) {
  // gamma = |Omega| / (sqrt(N) ||measures||)
  Vector m(3);
  m << 0.1, 0.2, 0.7;
  const auto reg = make_w(WeightKind::mass_weighted, m);
  EXPECT_NEAR(reg.gamma, 1.0 / (std::sqrt(3.0) * m.norm()), 1e-15);
}

TEST(MakeW, RandomIsUnitReproducibleAndSeedDependent) {
  const Vector m = Vector::Constant(50, 0.02);
  const auto a = make_w(WeightKind::random, m, 5);
  const auto b = make_w(WeightKind::random, m, 5);
  const auto c = make_w(WeightKind::random, m, 6);
  EXPECT_NEAR(a.w.norm(), 1.0, 1e-14);
  EXPECT_EQ((a.w - b.w).norm(), 0.0);
  EXPECT_GT((a.w - c.w).norm(), 1e-3);
  EXPECT_GT(a.w.minCoeff(), 0.0);
  EXPECT_NEAR(a.gamma, a.w.sum() / std::sqrt(50.0), 1e-15);
}

TEST(MakeW, AllKindsAreUnitVectors) {
  const Vector m = Vector::LinSpaced(20, 0.5, 1.5);
  for (auto k : {WeightKind::ones, WeightKind::mass_weighted, WeightKind::pin, WeightKind::random}) {
    EXPECT_NEAR(make_w(k, m).w.norm(), 1.0, 1e-14) << to_string(k);
  }
}

TEST(MakeW, PinRejectsSingleElement) {
  EXPECT_THROW(make_w(WeightKind::pin, Vector::Constant(1, 1.0)), std::invalid_argument);
}

TEST(MakeW, ParsesKindNames) {
  EXPECT_EQ(parse_weight_kind("mass"), WeightKind::mass_weighted);
  EXPECT_EQ(parse_weight_kind("w3"), WeightKind::pin);
  EXPECT_THROW(parse_weight_kind("zeros"), std::invalid_argument);
}

TEST(DefaultRho, FiniteAndSmallRegimes) {
  EXPECT_EQ(default_rho(Regime::finite, 0.123), 1.0);
  const auto s = mesh_stats(generate_structured<2>(4));
  EXPECT_NEAR(default_rho(Regime::small, s.min_measure), 1.0 / 320.0, 1e-17);
  EXPECT_LT(default_rho(Regime::small, s.min_measure), 0.2 * s.min_measure);
}

TEST(RegularizedOperator, ZeroAndPressureOnlyInputs) {
  const auto sys = small_system(3);
  const auto reg = make_w(WeightKind::ones, sys.Mp);
  const RegularizedOperator op(sys.A, sys.B, reg.w, 0.7);
  const auto n = op.size();
  EXPECT_EQ(op(Vector::Zero(n)).norm(), 0.0);
  Vector x = Vector::Zero(n);
  x.tail(sys.num_pressure()) = reg.w;
  const Vector y = op(x);
  EXPECT_LE((y.head(sys.num_velocity()) + sys.B.transpose() * reg.w).norm(), 1e-14);
  EXPECT_LE((y.tail(sys.num_pressure()) + 0.7 * reg.w).norm(), 1e-14);
}

TEST(RegularizedOperator, MatchesDenseMatrixAndIsSymmetric) {
  const auto sys = small_system(4);
  for (auto kind : {WeightKind::ones, WeightKind::pin, WeightKind::random}) {
    const auto reg = make_w(kind, sys.Mp);
    const RegularizedOperator op(sys.A, sys.B, reg.w, 0.3);
    const Eigen::MatrixXd dense =
        dense_regularized_matrix(Eigen::MatrixXd(sys.A), Eigen::MatrixXd(sys.B), reg.w, 0.3);
    const Vector x = random_vector(op.size(), 1), z = random_vector(op.size(), 2);
    EXPECT_LE((op(x) - dense * x).norm(), 1e-12 * (dense * x).norm());
    EXPECT_NEAR(op(x).dot(z), x.dot(op(z)), 1e-12 * std::abs(op(x).dot(z)));
  }
}

TEST(RegularizedOperator, RejectsMismatchedSizes) {
  const auto sys = small_system(2);
  const auto reg = make_w(WeightKind::ones, sys.Mp);
  const RegularizedOperator op(sys, reg);
  Vector y;
  EXPECT_THROW(op.apply(Vector::Zero(op.size() + 1), y), std::invalid_argument);
  EXPECT_THROW(RegularizedOperator(sys.A, sys.B, Vector::Zero(3), 1.0), std::invalid_argument);
}

TEST(RegularizedOperator, RegularizationRemovesSingularity) {
  const auto sys = small_system(4);
  const Eigen::MatrixXd A = sys.A, B = sys.B;
  const auto reg = make_w(WeightKind::ones, sys.Mp);
  auto ratio = [&](double rho) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_regularized_matrix(A, B, reg.w, rho));
    const auto s = svd.singularValues();
    return s[s.size() - 1] / s[0];
  };
  EXPECT_LE(ratio(0.0), 1e-10);
  EXPECT_GE(ratio(1.0), 1e-8);
  // Exactly one zero singular value without regularization.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_regularized_matrix(A, B, reg.w, 0.0));
  const auto s = svd.singularValues();
  EXPECT_GT(s[s.size() - 2] / s[0], 1e-8);
}

TEST(RescaledRhs, StacksB1AndScaledB2) {
  const auto mc = stokes_2d(0.01);
  const auto sys = assemble(generate_structured<2>(3), 0.01, mc.f, mc.u, BoundaryRule::midpoint());
  const Vector b = rescaled_rhs(sys);
  EXPECT_EQ((b.head(sys.num_velocity()) - sys.b1).norm(), 0.0);
  EXPECT_LE((b.tail(sys.num_pressure()) - 0.01 * sys.b2).norm(), 1e-18);
}

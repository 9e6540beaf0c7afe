#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "robeig/error.hpp"
#include "robeig/grad_core.hpp"
#include "robeig/oracle.hpp"

using namespace robeig;
using namespace robeig::oracle;

namespace {

SymMatrix random_psd(Eigen::Index d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix a(d, 2 * d);
  for (auto& x : a.reshaped()) x = n(rng);
  return SymMatrix(a * a.transpose());
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// Signed residual from the K-matrix columns of spectrum (1, q2, q3): angle of
// the Taylor third column minus angle of the true one, in the (e1, e2) plane.
double residual_from_columns(double q2, double q3, int k) {
  Vector lam(3);
  lam << 1.0, q2, q3;
  const Vector t = ktilde_taylor(lam, k, q3).entries.col(2);
  const Vector a = ktilde_analytic(lam).entries.col(2);
  const double deg = 180.0 / std::numbers::pi;
  return (std::atan2(t(1), t(0)) - std::atan2(a(1), a(0))) * deg;
}

}  // namespace

TEST(FiniteDiff, TraceGivesIdentity) {
  const SymMatrix m = random_psd(4, 1);
  const Matrix g = finite_diff_grad([](const SymMatrix& p) { return p.entries().trace(); }, m);
  EXPECT_LE((g - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FiniteDiff, FrobeniusSquareGivesTwoM) {
  const SymMatrix m = random_psd(4, 2);
  const Matrix g =
      finite_diff_grad([](const SymMatrix& p) { return p.entries().squaredNorm(); }, m);
  EXPECT_LE((g - 2.0 * m.entries()).cwiseAbs().maxCoeff(), 1e-6 * m.entries().norm());
}

TEST(FiniteDiff, TopEigenvalueOfDiagonal) {
  const SymMatrix m(diag2(3, 1));
  const Matrix g =
      finite_diff_grad([](const SymMatrix& p) { return eig_sym(p).values(0); }, m);
  EXPECT_LE((g - diag2(1, 0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FiniteDiff, SumOfEigenvaluesIsTrace) {
  const SymMatrix m = random_psd(5, 3);
  const Matrix g =
      finite_diff_grad([](const SymMatrix& p) { return eig_sym(p).values.sum(); }, m);
  EXPECT_LE((g - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FiniteDiff, NonFiniteLossRaises) {
  const SymMatrix m(diag2(1, 1));
  EXPECT_THROW(finite_diff_grad([](const SymMatrix&) { return std::nan(""); }, m), OracleError);
  EXPECT_THROW(finite_diff_grad([](const SymMatrix& p) { return p.entries().trace(); }, m,
                                FdConfig{0.0}),
               InvalidInputError);
}

TEST(FiniteDiff, EntrywiseQuadratic) {
  Matrix x(2, 3);
  x << 1, 2, 3, -1, 0.5, 4;
  const Matrix g =
      finite_diff_grad_entrywise([](const Matrix& p) { return p.squaredNorm(); }, x);
  EXPECT_LE((g - 2.0 * x).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(PowerIteration, ExactEigenvectorIsFixedPoint) {
  Vector v0(2);
  v0 << 1, 0;
  EXPECT_EQ(power_iteration(diag2(3, 1), v0, 5), v0);
  const SymMatrix m = random_psd(6, 4);
  const EigenDecomp e = eig_sym(m);
  for (int i = 0; i < 6; ++i) {
    const Vector v = power_iteration(m.entries(), e.vectors.col(i), 3);
    EXPECT_NEAR(std::abs(v.dot(e.vectors.col(i))), 1.0, 1e-10);
  }
}

TEST(PowerIteration, ContractionRate) {
  Vector v0(2);
  v0 << 1, 1;
  v0 /= std::sqrt(2.0);
  const Vector v = power_iteration(diag2(3, 1), v0, 10);
  EXPECT_NEAR(v(1) / v(0), std::pow(1.0 / 3.0, 10), 1e-18);
}

TEST(PowerIteration, ConvergesToDominant) {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  Vector v0(2);
  v0 << 1, 0;
  const Vector v = power_iteration(a, v0, 50);
  EXPECT_NEAR(v(0), 1 / std::sqrt(2.0), 1e-8);
  EXPECT_NEAR(v(1), 1 / std::sqrt(2.0), 1e-8);
}

TEST(PowerIteration, Breakdown) {
  Vector v0(2);
  v0 << 0, 1;
  EXPECT_THROW(power_iteration(diag2(3, 0), v0, 2), BreakdownError);
  EXPECT_THROW(power_iteration(diag2(3, 1), v0, 0), InvalidInputError);
}

TEST(Rayleigh, Cases) {
  Vector e1(2), ones(2);
  e1 << 1, 0;
  ones << 1, 1;
  EXPECT_DOUBLE_EQ(rayleigh(diag2(3, 1), e1), 3.0);
  EXPECT_DOUBLE_EQ(rayleigh(diag2(3, 1), ones), 2.0);
  EXPECT_THROW(rayleigh(diag2(3, 1), Vector::Zero(2)), InvalidInputError);
}

TEST(Rayleigh, BoundsAndEigenpairs) {
  const SymMatrix m = random_psd(7, 5);
  const EigenDecomp e = eig_sym(m);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    Vector v(7);
    for (auto& x : v) x = n(rng);
    const double r = rayleigh(m.entries(), v);
    EXPECT_GE(r, e.values(6) - 1e-12);
    EXPECT_LE(r, e.values(0) + 1e-12);
  }
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(rayleigh(m.entries(), e.vectors.col(i)), e.values(i), 1e-9);
}

TEST(AngularResidual, ReferencePoints) {
  EXPECT_NEAR(angular_residual(0.5, 0.5, 9), -5.71, 0.01);
  EXPECT_NEAR(angular_residual(0.01, 0.01, 9), -0.06, 0.01);
  const double q3 = 1.0 - 1e-6;
  EXPECT_NEAR(angular_residual(q3 + 1e-10, q3, 9), -44.99, 0.05);
}

TEST(AngularResidual, EqualRatioLimitClosedForm) {
  // beta = atan((K+1) / (q sum q^k)), alpha = 90 deg.
  const double q = 0.5;
  double sum = 0.0;
  for (int k = 0; k <= 9; ++k) sum += std::pow(q, k);
  const double want = std::atan(10.0 / (q * sum)) * 180.0 / std::numbers::pi - 90.0;
  EXPECT_NEAR(angular_residual(q, q, 9), want, 1e-12);
}

TEST(AngularResidual, AgreesWithKMatrixColumns) {
  for (double q2 : {0.9, 0.6, 0.3, 0.1}) {
    for (double f : {0.2, 0.5, 0.9}) {
      const double q3 = q2 * f;
      for (int k : {1, 5, 9}) {
        EXPECT_NEAR(angular_residual(q2, q3, k), residual_from_columns(q2, q3, k), 1e-9)
            << q2 << " " << q3 << " " << k;
      }
    }
  }
}

TEST(AngularResidual, SmallRatiosStayWithinFiveDegrees) {
  for (int a = 1; a <= 25; ++a) {
    for (int b = 1; b <= a; ++b) {
      const double rho = angular_residual(0.02 * a, 0.02 * b, 9);
      EXPECT_GE(rho, -5.71 - 1e-2);
      EXPECT_LE(rho, 1e-12);
    }
  }
}

TEST(AngularResidual, TripleTieIsPreservedByTaylor) {
  Vector lam = Vector::Constant(3, 0.7);
  const Vector truth = ktilde_analytic(lam).entries.col(2);
  const Vector taylor = ktilde_taylor(lam, 9, 0.01).entries.col(2);
  EXPECT_NEAR(direction_angle_degrees(truth, taylor), 0.0, 1e-12);
}

TEST(DirectionAngle, FiniteAndInfinite) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  EXPECT_NEAR(direction_angle_degrees(a, b), 45.0, 1e-12);
  EXPECT_NEAR(direction_angle_degrees(a, -a), 180.0, 1e-12);
  Vector inf(3), clip(3);
  inf << 100, std::numeric_limits<double>::infinity(), 0;
  clip << 100, 100, 0;
  EXPECT_NEAR(direction_angle_degrees(inf, clip), 45.0, 1e-12);
}

#include <gtest/gtest.h>

#include "nlhg/homogenize.hpp"
#include "oracles.hpp"

using namespace nlhg;

TEST(FhomFormula, ZeroDatumAndScaling) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  EXPECT_EQ(fhom_convex_formula(k, {0, 0, 0}).value, 0.0);

  const double v1 = fhom_convex_formula(k, {1, 0, 0}).value;
  const double v2 = fhom_convex_formula(k, {2, 0, 0}).value;
  EXPECT_NEAR(v2, 4.0 * v1, 1e-9 * v2);
}

TEST(FhomFormula, IndicatorBallMatchesRadialOracle) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const QuadratureValue q = fhom_convex_formula(k, {1, 0, 0});
  const double oracle = oracles::radial_first_moment_integral(
      3, 2.0, [](double) { return 1.0; }, 1.0);
  EXPECT_NEAR(oracle, 4 * oracles::kPi / 15, 1e-8);
  EXPECT_NEAR(q.value, oracle, 1e-6 * oracle);
}

TEST(FhomFormula, TensorPathAgreesWithRadialReduction) {
  // anisotropic kernel goes through the tensor midpoint rule
  const KernelSpec k = anisotropic_kernel(3, 1, 2.0, 1.0, 1.0, 0.5, {1.0});
  // f(xi, S xi) = (1.0 + 0.5) chi |<S,xi>|^2 for m = 1
  const double oracle = 1.5 * oracles::radial_first_moment_integral(
                                  3, 2.0, [](double) { return 1.0; }, 1.0);
  const QuadratureValue q = fhom_convex_formula(k, {1, 0, 0}, 48);
  EXPECT_NEAR(q.value, oracle, 0.02 * oracle);
}

TEST(FhomFormula, ConvexAlongSegments) {
  const KernelSpec k = anisotropic_kernel(2, 2, 1.5, 1.0, 1.0, 0.5, {1.0, 0.0});
  Rng rng(3);
  std::vector<double> A(4), B(4), M(4);
  for (int trial = 0; trial < 5; ++trial) {
    for (int i = 0; i < 4; ++i) {
      A[i] = rng.uniform(-1, 1);
      B[i] = rng.uniform(-1, 1);
      M[i] = 0.5 * (A[i] + B[i]);
    }
    const double fa = fhom_convex_formula(k, A, 24).value;
    const double fb = fhom_convex_formula(k, B, 24).value;
    const double fm = fhom_convex_formula(k, M, 24).value;
    EXPECT_LE(fm, 0.5 * (fa + fb) + 1e-6 * (fa + fb + 1));
  }
}

TEST(FhomFormula, RotationalInvarianceForIsotropicKernels) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const double v1 = fhom_convex_formula(k, {1, 0, 0}).value;
  const double v2 = fhom_convex_formula(k, {0, 1, 0}).value;
  const double s = 1.0 / std::sqrt(3.0);
  const double v3 = fhom_convex_formula(k, {s, s, s}).value;
  EXPECT_NEAR(v1, v2, 1e-9 * v1);
  EXPECT_NEAR(v1, v3, 1e-9 * v1);
}

TEST(FhomCell, ZeroDatumIsZero) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const FhomCellValue v = fhom_cell(k, {0, 0, 0}, 4.0, 0.25);
  EXPECT_EQ(v.value, 0.0);
}

TEST(FhomCell, PreconditionsEnforced) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  EXPECT_THROW(fhom_cell(k, {1, 0, 0}, 3.0, 0.25), std::invalid_argument);   // R < 4
  EXPECT_THROW(fhom_cell(k, {1, 0, 0}, 4.0, 0.375), std::invalid_argument);  // h !| R
}

TEST(FhomCell, QuadraticIsotropicSolvesToTheAffineLatticeSum) {
  // for p = 2 isotropic kernels the affine field is the exact discrete
  // minimizer; the solver must reproduce the windowed lattice sum
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const std::vector<double> S = {1.0, 0.0, 0.0};
  for (double R : {4.0, 6.0}) {
    const FhomCellValue v = fhom_cell(k, S, R, 0.25);
    const double oracle = oracles::affine_cell_value(k, S, R, 0.25);
    EXPECT_NEAR(v.value, oracle, 1e-8 * oracle) << "R = " << R;
  }
}

TEST(FhomCell, HomogeneityInS) {
  const KernelSpec k = indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0);
  const FhomCellValue v1 = fhom_cell(k, {1.0, 0.0}, 4.0, 0.25);
  const FhomCellValue v2 = fhom_cell(k, {2.0, 0.0}, 4.0, 0.25);
  EXPECT_NEAR(v2.value, std::pow(2.0, 1.5) * v1.value, 1e-4 * v2.value);
}

TEST(FhomCell, ScheduleTrendsTowardTheFormula) {
  const KernelSpec k = indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0);
  const CellProblemResult res = fhom_cell_schedule(k, {1.0, 0.0}, {4.0, 6.0, 8.0}, 0.25);
  ASSERT_TRUE(res.has_formula);
  ASSERT_EQ(res.per_R_values.size(), 3u);
  const double g0 = std::abs(res.per_R_values[0] - res.convex_formula_value);
  const double g2 = std::abs(res.per_R_values[2] - res.convex_formula_value);
  EXPECT_LT(g2, g0);
  // extrapolation lands at least as close as the worst schedule point
  EXPECT_LE(std::abs(res.extrapolated - res.convex_formula_value), g0);
}

TEST(FhomBounds, IndicatorBallMoments) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const FhomBounds b = fhom_bounds(k);
  // M0 = int_{B_1} |xi|^2 dxi = 4 pi / 5 by the radial oracle
  const double M0 = oracles::sphere_surface(3) *
                    oracles::simpson([](double r) { return std::pow(r, 4); }, 0.0, 1.0);
  EXPECT_NEAR(M0, 4 * oracles::kPi / 5, 1e-9);
  EXPECT_NEAR(b.M0, M0, 1e-6 * M0);
  // isotropic: every sampled unit S gives the same value
  EXPECT_NEAR(b.m0, 4 * oracles::kPi / 15, 1e-6);
  EXPECT_LE(b.m0, b.M0);
}

TEST(FhomBounds, SandwichTheCellValue) {
  const KernelSpec k = indicator_ball_kernel(3, 1, 2.0, 1.0, 1.0);
  const FhomBounds b = fhom_bounds(k);
  const FhomCellValue v = fhom_cell(k, {1, 0, 0}, 6.0, 0.25);
  // finite-R cell values sit below the formula; the sandwich holds with the
  // boundary deficit folded into the lower constant
  EXPECT_LE(v.value, b.M0 * (1 + 1e-9));
  EXPECT_GE(v.value, 0.3 * b.m0);
}

#include <gtest/gtest.h>

#include "nlhg/capacity.hpp"
#include "oracles.hpp"

using namespace nlhg;

TEST(Pcap, ClosedFormAgainstQuadratureOracle) {
  for (auto [d, p] : std::vector<std::pair<int, double>>{{3, 2.0}, {3, 1.5}, {4, 2.5}, {2, 1.5}}) {
    for (double R : {2.0, 4.0, 8.0}) {
      const double oracle = oracles::annulus_capacity_quadrature(d, p, R);
      EXPECT_NEAR(pcap_annulus_closed_form(d, p, R), oracle, 1e-6 * oracle)
          << "d=" << d << " p=" << p << " R=" << R;
    }
  }
}

TEST(Pcap, KnownValuesAndMonotonicity) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(pcap_annulus_closed_form(3, 2.0, inf), 4 * oracles::kPi, 1e-12);
  EXPECT_NEAR(pcap_annulus_closed_form(3, 2.0, 2.0), 8 * oracles::kPi, 1e-12);
  const double v2 = pcap_annulus_closed_form(3, 2.0, 2.0);
  const double v4 = pcap_annulus_closed_form(3, 2.0, 4.0);
  const double vi = pcap_annulus_closed_form(3, 2.0, inf);
  EXPECT_GT(v2, v4);
  EXPECT_GT(v4, vi);
  EXPECT_THROW(pcap_annulus_closed_form(3, 3.5, 2.0), std::invalid_argument);
}

TEST(Pcap, NumericSmallGridNearClosedForm) {
  const PcapNumeric res = pcap_numeric(3, 2.0, 2.0, 32);
  const double target = 8 * oracles::kPi;
  EXPECT_NEAR(res.value, target, 0.10 * target);
  EXPECT_NEAR(res.profile_value, target, 0.05 * target);
}

TEST(Pcap, VectorialReductionIsExactForScaledProfiles) {
  // u = z * (scalar profile): the local energy scales by |z|^p exactly
  auto dom = std::make_shared<GridDomain>(make_cube_domain(3, 2.0, 0.25));
  GridFunction u1 = make_field(dom, 2);
  fill_field(u1, [&](const double* x, double* v) {
    v[0] = annulus_potential(3, 2.0, 2.0, norm_m(x, 3));
    v[1] = 0.0;
  });
  GridFunction uz = make_field(dom, 2);
  const double z[2] = {0.6, 0.8};  // |z| = 1 rotated; then scaled by 2
  fill_field(uz, [&](const double* x, double* v) {
    const double s = annulus_potential(3, 2.0, 2.0, norm_m(x, 3));
    v[0] = 2.0 * z[0] * s;
    v[1] = 2.0 * z[1] * s;
  });
  const LocalDensity rho = pnorm_density(1.0, 2.0);
  EXPECT_NEAR(local_energy(uz, rho), 4.0 * local_energy(u1, rho),
              1e-12 * local_energy(uz, rho));
}

TEST(PhiLocal, ZeroDatumIsZero) {
  const CapacitaryResult res =
      phi_local(pnorm_density(1.0, 1.5), 2, {0.0}, {3.0, 4.0}, 0.25);
  EXPECT_EQ(res.value, 0.0);
  for (double v : res.schedule_values) EXPECT_EQ(v, 0.0);
}

TEST(PhiLocal, MonotoneScheduleAndHomogeneity) {
  MinimizeOptions opts;
  opts.tol = 1e-7;
  const CapacitaryResult r1 =
      phi_local(pnorm_density(1.0, 1.5), 2, {1.0}, {3.0, 4.0, 6.0}, 0.125, opts);
  EXPECT_TRUE(r1.monotone);
  for (std::size_t i = 1; i < r1.schedule_values.size(); ++i) {
    EXPECT_LE(r1.schedule_values[i], r1.schedule_values[i - 1] * (1 + 1e-6));
  }
  const CapacitaryResult r2 =
      phi_local(pnorm_density(1.0, 1.5), 2, {2.0}, {3.0, 4.0, 6.0}, 0.125, opts);
  EXPECT_NEAR(r2.value, std::pow(2.0, 1.5) * r1.value, 1e-3 * std::abs(r2.value));
}

TEST(PhiLocal, ExtrapolationTracksTheCapacityLimit) {
  // d=2, p=1.5: schedule values follow cap(B_1, B_R); the tail fit must land
  // nearer the R -> infinity limit than any finite-R value
  MinimizeOptions opts;
  opts.tol = 1e-7;
  const CapacitaryResult res =
      phi_local(pnorm_density(1.0, 1.5), 2, {1.0}, {3.0, 4.0, 6.0}, 0.0625, opts);
  const double limit = pcap_annulus_closed_form(2, 1.5, std::numeric_limits<double>::infinity());
  const double worst = std::abs(res.schedule_values.front() - limit);
  EXPECT_LT(std::abs(res.fit_tail - limit), worst);
  EXPECT_NEAR(res.fit_tail, limit, 0.2 * limit);
}

TEST(PhiApprox, ZeroDatumAndDomainGuard) {
  const KernelSpec k = indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0);
  EXPECT_THROW(phi_approx(k, 1.0, 2.0, 3.0, {1.0}, 0.25), std::invalid_argument);
  const CapacitaryResult res = phi_approx(k, 1.0, 2.0, 4.0, {0.0}, 0.25);
  EXPECT_EQ(res.value, 0.0);
}

TEST(PhiApprox, GrowthBoundsAcrossData) {
  const KernelSpec k = indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0);
  MinimizeOptions opts;
  opts.tol = 1e-7;
  std::vector<double> ratios;
  for (double mag : {0.5, 1.0, 2.0}) {
    const CapacitaryResult res = phi_approx(k, 1.0, 2.0, 6.0, {mag}, 0.25, opts);
    EXPECT_GT(res.value, 0.0);
    ratios.push_back(res.value / std::pow(mag, 1.5));
  }
  const double c1 = *std::min_element(ratios.begin(), ratios.end());
  const double c2 = *std::max_element(ratios.begin(), ratios.end());
  EXPECT_GT(c1, 0.0);
  EXPECT_LT(c2 / c1, 1.5);  // exact p-homogeneity makes this ratio ~1
}

TEST(PhiApprox, DecreasingInR) {
  const KernelSpec k = indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0);
  MinimizeOptions opts;
  opts.tol = 1e-7;
  double prev = std::numeric_limits<double>::infinity();
  for (double R : {4.0, 6.0, 8.0}) {
    const CapacitaryResult res = phi_approx(k, 1.0, 2.0, R, {1.0}, 0.25, opts);
    EXPECT_LE(res.value, prev * (1 + 1e-6));
    prev = res.value;
  }
}

TEST(PhiNonlocal, RLimitAndTMonotonicity) {
  const KernelSpec k = smooth_decay_kernel(2, 1, 1.5, 1.0);
  MinimizeOptions opts;
  opts.tol = 1e-6;
  std::vector<double> limits;
  for (double T : {1.5, 2.5}) {
    const CapacitaryResult res = phi_nonlocal(k, 1.0, T, {1.0}, {5.0, 6.0, 8.0}, 0.25, opts);
    EXPECT_TRUE(res.monotone);
    // the limit estimate sits below every finite-R value
    for (double v : res.schedule_values) EXPECT_LE(res.value, v * (1 + 1e-6));
    limits.push_back(res.value);
  }
  EXPECT_GE(limits[1], limits[0] * (1 - 1e-4));  // increasing in T
}

TEST(Lipschitz, ExactPowerDensityBound) {
  // value(z) = c |z|^2: |v(w) - v(z)| = c (|w|+|z|) ||w|-|z|| and the probe
  // constant stays below c p/2 = c
  const double c = 1.7;
  auto value = [c](const std::vector<double>& z) {
    return c * (z[0] * z[0] + z[1] * z[1]);
  };
  Rng rng(5);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (int it = 0; it < 500; ++it) {
    std::vector<double> z(2), w(2);
    rng.unit_vector(2, z.data());
    rng.unit_vector(2, w.data());
    const double rz = rng.uniform(0.0, 3.0), rw = rng.uniform(0.0, 3.0);
    for (auto& v : z) v *= rz;
    for (auto& v : w) v *= rw;
    pairs.emplace_back(z, w);
  }
  const double C = lipschitz_probe(value, pairs, 2.0);
  EXPECT_LE(C, c * (1 + 1e-9));
  EXPECT_GT(C, 0.5 * c);
}

TEST(Lipschitz, DegeneratePairsAreSkipped) {
  auto value = [](const std::vector<double>& z) { return z[0] * z[0]; };
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs = {
      {{1.0}, {1.0}}};  // w = z contributes nothing
  EXPECT_EQ(lipschitz_probe(value, pairs, 2.0), 0.0);
}

TEST(Capterm, GapsShrinkAlongTheSchedule) {
  // d=2, p=1.5, normalized isotropic kernel; phi^T from the local route
  const KernelSpec k = normalize_isotropic(indicator_ball_kernel(2, 1, 1.5, 1.0, 1.0));
  const double T = 2.0;
  MinimizeOptions opts;
  opts.tol = 1e-6;

  const KernelSpec kT = truncate_kernel(k, T);
  const CapacitaryResult phiT = phi_local(pnorm_density(isotropic_dirichlet_constant(kT), 1.5),
                                          2, {1.0}, {4.0, 6.0, 8.0}, 0.125, opts);

  std::vector<CaptermPoint> schedule = {{1.0, 5.0, 0.25}, {0.8, 6.0, 0.2}, {0.64, 8.0, 0.16}};
  const CaptermTable table = capterm_convergence(k, T, {1.0}, schedule, phiT.value, opts);
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_TRUE(table.gaps_decreasing_last3)
      << table.rows[0].gap << " " << table.rows[1].gap << " " << table.rows[2].gap;
  for (const auto& row : table.rows) EXPECT_FALSE(row.under_resolved);
}

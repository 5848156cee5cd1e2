// Capacitary densities: the classical p-capacity closed form and its
// numerical counterpart, the local density phi from the homogenized
// integrand, the finite-(eps,T,R) approximations, their R- and T-limits,
// and the empirical Lipschitz probe.
#ifndef NLHG_CAPACITY_HPP
#define NLHG_CAPACITY_HPP

#include <functional>
#include <vector>

#include "nlhg/kernels.hpp"
#include "nlhg/minimize.hpp"

namespace nlhg {

// Receives solved minimizer fields for dumping; tag identifies the solve.
using FieldSink = std::function<void(const std::string&, const GridFunction&)>;

// cap_p(B_1, B_R) = omega_{d-1} ((d-p)/(p-1))^{p-1} (1 - R^{-(d-p)/(p-1)})^{1-p};
// R = +infinity gives cap_p(B_1). Decreasing in R.
inline double pcap_annulus_closed_form(int d, double p, double R) {
  require(d >= 2 && p > 1 && p < d, "pcap: need 1 < p < d");
  const double kappa = (d - p) / (p - 1);
  const double core = sphere_surface(d) * std::pow(kappa, p - 1);
  if (!std::isfinite(R)) return core;
  require(R > 1, "pcap: need R > 1");
  return core * std::pow(1.0 - std::pow(R, -kappa), 1.0 - p);
}

// Radial capacitary potential: 1 on B_1, 0 at |x| = R, the exact minimizer in
// between. R = +infinity gives r^{-kappa}.
inline double annulus_potential(int d, double p, double R, double r) {
  const double kappa = (d - p) / (p - 1);
  if (r <= 1.0) return 1.0;
  if (std::isfinite(R)) {
    if (r >= R) return 0.0;
    const double rk = std::pow(r, -kappa), Rk = std::pow(R, -kappa);
    return (rk - Rk) / (1.0 - Rk);
  }
  return std::pow(r, -kappa);
}

// ---------------------------------------------------------------------------

struct PcapNumeric {
  double value = 0;        // minimized discrete energy
  double profile_value = 0;  // energy of the frozen closed-form profile
  double grad_norm = 0;
  int iterations = 0;
  Index cells = 0;
};

// cap_p(B_1, B_R) by direct minimization of the forward-difference Dirichlet
// energy on a (cells_per_axis)^d box.
inline PcapNumeric pcap_numeric(int d, double p, double R, Index cells_per_axis,
                                const MinimizeOptions& opts = {}) {
  require(R > 1, "pcap_numeric: need R > 1");
  auto dom = std::make_shared<GridDomain>(
      make_cube_domain(d, R, 2.0 * R / static_cast<double>(cells_per_axis)));

  GridFunction init = make_field(dom, 1);
  fill_field(init, [&](const double* x, double* v) {
    v[0] = annulus_potential(d, p, R, norm_m(x, d));
  });

  ConstraintMask mask = ConstraintMask::none(*dom, 1);
  const double one = 1.0, zero = 0.0;
  freeze_where(mask, *dom, 1, [&](const double* x) { return norm_m(x, d) < 1.0; },
               [&](const double*, double* z) { z[0] = one; });
  freeze_where(mask, *dom, 1, [&](const double* x) { return norm_m(x, d) >= R; },
               [&](const double*, double* z) { z[0] = zero; });

  PcapNumeric out;
  out.cells = dom->ncells;
  const LocalDensity rho = pnorm_density(1.0, p);
  out.profile_value = local_energy(init, rho);

  MinimizeOptions o = opts;
  if (p < 2.0 && o.mu_schedule.empty()) o.mu_schedule = default_mu_schedule(p, 1.0);
  MinimizeResult res = minimize_local_dirichlet(rho, mask, init, o);
  out.value = res.report.objective;
  out.grad_norm = res.report.grad_norm;
  out.iterations = res.report.iterations;
  return out;
}

// ---------------------------------------------------------------------------

struct CapacitaryResult {
  std::vector<double> z;
  double epsilon = 0;
  double T = 0;
  double R = 0;
  double value = 0;      // density estimate; extrapolated when a schedule ran
  double grad_norm = 0;  // worst solver certificate over the schedule
  std::vector<double> schedule_R;
  std::vector<double> schedule_values;
  double fit_tail = 0;   // intercept of value ~ a + b R^{-(d-p)/(p-1)}
  double fit_plain = 0;  // intercept of value ~ a + b / R
  bool monotone = true;
  int iterations = 0;
};

namespace detail {

// Least-squares intercept of v ~ a + b * x.
inline double affine_intercept(const std::vector<double>& x, const std::vector<double>& v) {
  const std::size_t n = x.size();
  if (n == 1) return v[0];
  double mx = 0, mv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    mv += v[i];
  }
  mx /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (x[i] - mx) * (v[i] - mv);
    den += (x[i] - mx) * (x[i] - mx);
  }
  if (den <= 0) return mv;
  const double slope = num / den;
  return mv - slope * mx;
}

}  // namespace detail

// phi(z) (or phi^T(z) for a truncated density): Dirichlet problems v = 0 on
// B_1, v = z outside B_R along the R-schedule, extrapolated with the known
// capacity tail. The plain 1/R intercept is kept as a robustness check.
inline CapacitaryResult phi_local(const LocalDensity& density, int d,
                                  const std::vector<double>& z,
                                  const std::vector<double>& R_schedule, double h,
                                  const MinimizeOptions& opts = {},
                                  const FieldSink& sink = {}) {
  require(!R_schedule.empty(), "phi_local: empty R schedule");
  const int m = static_cast<int>(z.size());
  const double p = density.p;
  CapacitaryResult out;
  out.z = z;
  out.T = 0;
  out.epsilon = 0;

  for (double R : R_schedule) {
    require(R > 1, "phi_local: R must exceed the pinned ball");
    auto dom = std::make_shared<GridDomain>(make_cube_domain(d, R, h));
    GridFunction init = make_field(dom, m);
    fill_field(init, [&](const double* x, double* v) {
      const double f = 1.0 - annulus_potential(d, p, R, norm_m(x, d));
      for (int c = 0; c < m; ++c) v[c] = f * z[c];
    });
    ConstraintMask mask = ConstraintMask::none(*dom, m);
    freeze_where(mask, *dom, m, [&](const double* x) { return norm_m(x, d) < 1.0; },
                 [&](const double*, double* w) {
                   for (int c = 0; c < m; ++c) w[c] = 0.0;
                 });
    freeze_where(mask, *dom, m, [&](const double* x) { return norm_m(x, d) >= R; },
                 [&](const double*, double* w) {
                   for (int c = 0; c < m; ++c) w[c] = z[c];
                 });
    MinimizeOptions o = opts;
    if (p < 2.0 && o.mu_schedule.empty()) {
      o.mu_schedule = default_mu_schedule(p, norm_m(z.data(), m));
    }
    MinimizeResult res = minimize_local_dirichlet(density, mask, init, o);
    out.schedule_R.push_back(R);
    out.schedule_values.push_back(res.report.objective);
    out.grad_norm = std::max(out.grad_norm, res.report.grad_norm);
    out.iterations += res.report.iterations;
    if (sink) sink("R" + format_double(R), res.u);
  }
  out.R = R_schedule.back();

  const double zn = norm_m(z.data(), m);
  const double tol_mono = 1e-8 * (std::pow(zn, p) + 1.0) + 10 * opts.tol * std::abs(out.schedule_values.front());
  for (std::size_t i = 1; i < out.schedule_values.size(); ++i) {
    if (out.schedule_values[i] > out.schedule_values[i - 1] + tol_mono) out.monotone = false;
  }

  const double kappa = (d - p) / (p - 1);
  std::vector<double> xt, xp;
  for (double R : out.schedule_R) {
    xt.push_back(std::pow(R, -kappa));
    xp.push_back(1.0 / R);
  }
  out.fit_tail = detail::affine_intercept(xt, out.schedule_values);
  out.fit_plain = detail::affine_intercept(xp, out.schedule_values);
  out.value = out.fit_tail;
  return out;
}

// ---------------------------------------------------------------------------
// phi_{eps,T,R}(z): minimum of F_eps^T(., B_R) over fields vanishing on B_1
// and equal to z on the width-eps*T band at the outer boundary.

struct PhiApproxSolve {
  CapacitaryResult result;
  GridFunction minimizer;
  std::shared_ptr<const GridDomain> domain;
};

// `params_override` supplies a pre-built shift lattice (e.g. the exact
// pullback of a parent lattice); it must match (h, eps, T).
inline PhiApproxSolve phi_approx_solve(const KernelSpec& k, double eps, double T, double R,
                                       const std::vector<double>& z, double h,
                                       const MinimizeOptions& opts = {},
                                       const EnergyParams* params_override = nullptr) {
  require(R >= 2.0 + T * eps, "phi_approx: need R >= 2 + T*eps");
  require(static_cast<int>(z.size()) == k.m, "phi_approx: datum dimension mismatch");
  const int d = k.d;
  const int m = k.m;

  GridDomain geom = make_cube_domain(d, R, h);
  set_ball_mask(geom, Coord{}.data(), R);
  auto dom = std::make_shared<GridDomain>(std::move(geom));

  GridFunction init = make_field(dom, m);
  fill_field(init, [&](const double* x, double* v) {
    const double f = 1.0 - annulus_potential(d, k.p, R, norm_m(x, d));
    for (int c = 0; c < m; ++c) v[c] = f * z[c];
  });
  init.exterior = z;

  ConstraintMask mask = ConstraintMask::none(*dom, m);
  freeze_where(mask, *dom, m, [&](const double* x) { return norm_m(x, d) < 1.0; },
               [&](const double*, double* w) {
                 for (int c = 0; c < m; ++c) w[c] = 0.0;
               });
  const double band = R - eps * T;
  freeze_where(mask, *dom, m, [&](const double* x) { return norm_m(x, d) >= band; },
               [&](const double*, double* w) {
                 for (int c = 0; c < m; ++c) w[c] = z[c];
               });

  const EnergyParams pp = params_override != nullptr
                              ? *params_override
                              : make_energy_params(*dom, eps, T, k.support_radius);
  Objective obj = make_nonlocal_objective(dom, k, pp);

  MinimizeOptions o = opts;
  const double zn = norm_m(z.data(), m);
  if (!obj.quadratic) {
    o.clamp_radius = 10.0 * zn;  // L^infty bound; a projection compatible with convexity
    if (k.p < 2.0 && o.mu_schedule.empty()) {
      o.mu_schedule = default_mu_schedule(k.p, std::max(mean_abs_difference(init, pp), 1e-8));
    }
  }
  MinimizeResult res = minimize_energy(obj, mask, init, o);

  PhiApproxSolve out;
  out.result.z = z;
  out.result.epsilon = eps;
  out.result.T = T;
  out.result.R = R;
  out.result.value = res.report.objective;
  out.result.grad_norm = res.report.grad_norm;
  out.result.iterations = res.report.iterations;
  out.result.schedule_R = {R};
  out.result.schedule_values = {res.report.objective};
  out.result.fit_tail = res.report.objective;
  out.result.fit_plain = res.report.objective;
  out.minimizer = std::move(res.u);
  out.domain = dom;
  return out;
}

inline CapacitaryResult phi_approx(const KernelSpec& k, double eps, double T, double R,
                                   const std::vector<double>& z, double h,
                                   const MinimizeOptions& opts = {}) {
  return phi_approx_solve(k, eps, T, R, z, h, opts).result;
}

// phi^T_{NL,alpha}(z): decreasing R-limit of phi_{alpha,T,R}(z), estimated
// from the schedule with the capacity-tail extrapolation.
inline CapacitaryResult phi_nonlocal(const KernelSpec& k, double alpha, double T,
                                     const std::vector<double>& z,
                                     const std::vector<double>& R_schedule, double h,
                                     const MinimizeOptions& opts = {},
                                     const FieldSink& sink = {}) {
  require(!R_schedule.empty(), "phi_nonlocal: empty R schedule");
  CapacitaryResult out;
  out.z = z;
  out.epsilon = alpha;
  out.T = T;
  for (double R : R_schedule) {
    PhiApproxSolve one = phi_approx_solve(k, alpha, T, R, z, h, opts);
    out.schedule_R.push_back(R);
    out.schedule_values.push_back(one.result.value);
    out.grad_norm = std::max(out.grad_norm, one.result.grad_norm);
    out.iterations += one.result.iterations;
    if (sink) sink("R" + format_double(R), one.minimizer);
  }
  out.R = R_schedule.back();
  const double zn = norm_m(z.data(), static_cast<int>(z.size()));
  const double tol_mono =
      1e-8 * (std::pow(zn, k.p) + 1.0) + 10 * opts.tol * std::abs(out.schedule_values.front());
  for (std::size_t i = 1; i < out.schedule_values.size(); ++i) {
    if (out.schedule_values[i] > out.schedule_values[i - 1] + tol_mono) out.monotone = false;
  }
  const double kappa = (k.d - k.p) / (k.p - 1);
  std::vector<double> xt, xp;
  for (double R : out.schedule_R) {
    xt.push_back(std::pow(R, -kappa));
    xp.push_back(1.0 / R);
  }
  out.fit_tail = detail::affine_intercept(xt, out.schedule_values);
  out.fit_plain = detail::affine_intercept(xp, out.schedule_values);
  out.value = out.fit_tail;
  return out;
}

// ---------------------------------------------------------------------------
// Empirical Lipschitz constant of a density z -> value over sampled pairs:
// the smallest C with |v(w) - v(z)| <= C (|z|^{p-1} + |w|^{p-1}) |w - z|.

inline double lipschitz_probe(const std::function<double(const std::vector<double>&)>& value,
                              const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                              double p) {
  double worst = 0;
  for (const auto& [z, w] : pairs) {
    const int m = static_cast<int>(z.size());
    double dz = 0;
    for (int c = 0; c < m; ++c) dz += (w[c] - z[c]) * (w[c] - z[c]);
    dz = std::sqrt(dz);
    const double za = norm_m(z.data(), m), wa = norm_m(w.data(), m);
    const double denom = (std::pow(za, p - 1) + std::pow(wa, p - 1)) * dz;
    if (denom <= 1e-14) continue;  // w = z carries no information
    worst = std::max(worst, std::abs(value(w) - value(z)) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Convergence of phi_{eps,T,R_eps}(z) toward phi^T(z) along a schedule with
// R_eps -> infinity.

struct CaptermRow {
  double eps = 0;
  double R = 0;
  double h = 0;
  double value = 0;
  double gap = 0;  // |value - phiT|
  bool under_resolved = false;
};

struct CaptermTable {
  std::vector<CaptermRow> rows;
  double phiT = 0;
  bool gaps_decreasing_last3 = true;
};

struct CaptermPoint {
  double eps = 0;
  double R = 0;
  double h = 0;
};

inline CaptermTable capterm_convergence(const KernelSpec& k, double T,
                                        const std::vector<double>& z,
                                        const std::vector<CaptermPoint>& schedule,
                                        double phiT_reference,
                                        const MinimizeOptions& opts = {},
                                        const FieldSink& sink = {}) {
  require(schedule.size() >= 1, "capterm: empty schedule");
  CaptermTable table;
  table.phiT = phiT_reference;
  for (const auto& pt : schedule) {
    PhiApproxSolve res = phi_approx_solve(k, pt.eps, T, pt.R, z, pt.h, opts);
    CaptermRow row;
    row.eps = pt.eps;
    row.R = pt.R;
    row.h = pt.h;
    row.value = res.result.value;
    row.gap = std::abs(res.result.value - phiT_reference);
    row.under_resolved = pt.eps / pt.h < 4.0 - 1e-12;
    table.rows.push_back(row);
    if (sink) sink("eps" + format_double(pt.eps) + "_R" + format_double(pt.R), res.minimizer);
  }
  const std::size_t n = table.rows.size();
  if (n >= 3) {
    for (std::size_t i = n - 2; i < n; ++i) {
      if (table.rows[i].gap > table.rows[i - 1].gap) table.gaps_decreasing_last3 = false;
    }
  }
  return table;
}

}  // namespace nlhg

#endif  // NLHG_CAPACITY_HPP

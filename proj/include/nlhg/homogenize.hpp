// The homogenized density f_hom: asymptotic cell problems on Q_R at unit
// interaction scale, the convex-case formula f_hom(S) = int f(xi, S xi) dxi,
// and the growth constants m0, M0.
#ifndef NLHG_HOMOGENIZE_HPP
#define NLHG_HOMOGENIZE_HPP

#include <vector>

#include "nlhg/capacity.hpp"
#include "nlhg/minimize.hpp"

namespace nlhg {

struct QuadratureValue {
  double value = 0;
  double error_estimate = 0;
};

namespace detail {

inline void matvec_Sxi(const double* S, int m, int d, const double* xi, double* out) {
  for (int c = 0; c < m; ++c) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += S[c * d + i] * xi[i];
    out[c] = s;
  }
}

inline double fhom_tensor_midpoint(const KernelSpec& k, const double* S, Index n) {
  const double T = k.support_radius;
  const int d = k.d;
  const double hh = 2 * T / static_cast<double>(n);
  Coord xi{};
  std::vector<double> Sxi(static_cast<std::size_t>(k.m));
  MultiIndex mi{};
  Index total = 1;
  for (int i = 0; i < d; ++i) total *= n;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(total));
  for (Index lin = 0; lin < total; ++lin) {
    for (int i = 0; i < d; ++i) xi[i] = -T + (static_cast<double>(mi[i]) + 0.5) * hh;
    matvec_Sxi(S, k.m, d, xi.data(), Sxi.data());
    terms.push_back(k.eval(xi.data(), Sxi.data()));
    for (int i = d - 1; i >= 0; --i) {
      if (++mi[i] < n) break;
      mi[i] = 0;
    }
  }
  return pairwise_sum(terms) * std::pow(hh, d);
}

}  // namespace detail

// f_hom(S) = int f(xi, S xi) dxi for convex kernels. Exact radial reduction
// for scalar isotropic kernels, tensor midpoint with one halving otherwise.
inline QuadratureValue fhom_convex_formula(const KernelSpec& k, const std::vector<double>& S,
                                           Index resolution = 48) {
  require(k.convex_in_z, "fhom_convex_formula: kernel must be convex in z");
  require(static_cast<int>(S.size()) == k.m * k.d, "fhom_convex_formula: S must be m x d");
  QuadratureValue out;
  if (k.phom && !k.phom->aniso && k.m == 1) {
    // |<S, xi>|^p reduces to the first angular moment
    const double Sn = norm_m(S.data(), k.d);
    out.value = std::pow(Sn, k.p) * isotropic_dirichlet_constant(k);
    out.error_estimate = 1e-10 * out.value;
    return out;
  }
  require(std::isfinite(k.support_radius), "fhom_convex_formula: unbounded support");
  const double coarse = detail::fhom_tensor_midpoint(k, S.data(), resolution);
  const double fine = detail::fhom_tensor_midpoint(k, S.data(), 2 * resolution);
  out.value = fine;
  out.error_estimate = std::abs(fine - coarse);
  return out;
}

// ---------------------------------------------------------------------------
// Cell problem on Q_R (cube of side R) at unit scale: boundary layer
// dist(x, boundary) < 1 frozen to Sx, pairs confined to Q_R x Q_R.

struct FhomCellValue {
  double value = 0;
  double grad_norm = 0;
  int iterations = 0;
};

inline FhomCellValue fhom_cell(const KernelSpec& k, const std::vector<double>& S, double R,
                               double h, const MinimizeOptions& opts = {},
                               const FieldSink& sink = {}) {
  require(R >= 4, "fhom_cell: need R >= 4");
  require(static_cast<int>(S.size()) == k.m * k.d, "fhom_cell: S must be m x d");
  const double cells = R / h;
  require(std::abs(cells - std::round(cells)) <= 1e-9 * cells, "fhom_cell: h must divide R");
  const int d = k.d;
  const int m = k.m;

  auto dom = std::make_shared<GridDomain>(make_cube_domain(d, R / 2, h));

  GridFunction init = make_field(dom, m);
  fill_field(init, [&](const double* x, double* v) {
    detail::matvec_Sxi(S.data(), m, d, x, v);
  });

  ConstraintMask mask = ConstraintMask::none(*dom, m);
  freeze_where(mask, *dom, m,
               [&](const double* x) {
                 double dist = std::numeric_limits<double>::infinity();
                 for (int i = 0; i < d; ++i) {
                   dist = std::min(dist, std::min(x[i] + R / 2, R / 2 - x[i]));
                 }
                 return dist < 1.0;
               },
               [&](const double* x, double* v) {
                 detail::matvec_Sxi(S.data(), m, d, x, v);
               });

  const EnergyParams pp = make_energy_params(*dom, 1.0, k);
  Objective obj = make_nonlocal_objective(dom, k, pp);
  MinimizeOptions o = opts;
  if (k.p < 2.0 && o.mu_schedule.empty()) {
    o.mu_schedule = default_mu_schedule(k.p, std::max(mean_abs_difference(init, pp), 1e-8));
  }
  MinimizeResult res = minimize_energy(obj, mask, init, o);
  if (sink) sink("R" + format_double(R) + "_h" + format_double(h), res.u);

  FhomCellValue out;
  out.value = res.report.objective / std::pow(R, d);
  out.grad_norm = res.report.grad_norm;
  out.iterations = res.report.iterations;
  return out;
}

struct CellProblemResult {
  std::vector<double> S;
  std::vector<double> R_schedule;
  std::vector<double> per_R_values;
  std::vector<double> grad_norms;
  double extrapolated = 0;  // intercept of value ~ a + b / R
  double convex_formula_value = 0;
  bool has_formula = false;
};

inline CellProblemResult fhom_cell_schedule(const KernelSpec& k, const std::vector<double>& S,
                                            const std::vector<double>& R_schedule, double h,
                                            const MinimizeOptions& opts = {},
                                            const FieldSink& sink = {}) {
  CellProblemResult out;
  out.S = S;
  out.R_schedule = R_schedule;
  for (double R : R_schedule) {
    const FhomCellValue v = fhom_cell(k, S, R, h, opts, sink);
    out.per_R_values.push_back(v.value);
    out.grad_norms.push_back(v.grad_norm);
  }
  std::vector<double> x;
  for (double R : R_schedule) x.push_back(1.0 / R);
  out.extrapolated = detail::affine_intercept(x, out.per_R_values);
  if (k.convex_in_z) {
    out.convex_formula_value = fhom_convex_formula(k, S).value;
    out.has_formula = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth constants: m0 |S|^p <= f_hom(S) <= M0 |S|^p.

struct FhomBounds {
  double m0 = 0;
  double M0 = 0;
};

inline FhomBounds fhom_bounds(const KernelSpec& k, int sampled_directions = 16,
                              std::uint64_t seed = 2024) {
  FhomBounds out;
  // M0 = int M(xi) |xi|^p dxi
  if (k.phom) {
    double mass = k.phom->iso.moment(k.d - 1 + k.p);
    if (k.phom->aniso) mass += k.phom->aniso->moment(k.d - 1 + k.p);
    out.M0 = sphere_surface(k.d) * mass;
  } else {
    require(std::isfinite(k.support_radius), "fhom_bounds: unbounded generic support");
    // reuse the growth quadrature minus the +1 term via two tensor passes
    const double T = k.support_radius;
    const int d = k.d;
    const Index n = 64;
    const double hh = 2 * T / static_cast<double>(n);
    Coord xi{};
    MultiIndex mi{};
    Index total = 1;
    for (int i = 0; i < d; ++i) total *= n;
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(total));
    for (Index lin = 0; lin < total; ++lin) {
      for (int i = 0; i < d; ++i) xi[i] = -T + (static_cast<double>(mi[i]) + 0.5) * hh;
      terms.push_back(k.envelope_M(xi.data()) *
                      std::pow(norm_m(xi.data(), d), k.p));
      for (int i = d - 1; i >= 0; --i) {
        if (++mi[i] < n) break;
        mi[i] = 0;
      }
    }
    out.M0 = pairwise_sum(terms) * std::pow(hh, d);
  }

  // m0: over sampled unit data, either the convex formula or the envelope
  // lower bound int m(xi) |S xi|^p dxi.
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> S(static_cast<std::size_t>(k.m) * k.d);
  for (int trial = 0; trial < sampled_directions; ++trial) {
    if (trial < k.d && k.m >= 1) {
      std::fill(S.begin(), S.end(), 0.0);
      S[static_cast<std::size_t>(trial)] = 1.0;  // first-row axis directions
    } else {
      rng.unit_vector(k.m * k.d, S.data());
    }
    double val;
    if (k.convex_in_z) {
      val = fhom_convex_formula(k, S).value;
    } else {
      // envelope bound with the isotropic radial weight replaced by m(xi)
      KernelSpec lower = k;
      lower.eval = [&k](const double* xi, const double* z) {
        return k.envelope_m(xi) * std::pow(norm_m(z, k.m), k.p);
      };
      lower.convex_in_z = true;
      lower.phom.reset();
      val = detail::fhom_tensor_midpoint(lower, S.data(), 64);
    }
    best = std::min(best, val);
  }
  out.m0 = best;
  return out;
}

}  // namespace nlhg

#endif  // NLHG_HOMOGENIZE_HPP

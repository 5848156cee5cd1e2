// Nonlocal integrands f(xi, z): p-homogeneous in z, with growth envelopes,
// short-range lower bounds, truncations, and sampling-based checks of the
// structural assumptions (homogeneity, envelope bounds, integrability,
// p-Lipschitz continuity).
#ifndef NLHG_KERNELS_HPP
#define NLHG_KERNELS_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlhg/common.hpp"

namespace nlhg {

// ---------------------------------------------------------------------------
// Quadrature helpers.

namespace detail {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol,
                          int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 40) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, std::abs(tol), depth);
}

}  // namespace detail

// Surface measure of the unit sphere in R^d.
inline double sphere_surface(int d) {
  return 2.0 * std::pow(3.14159265358979323846, 0.5 * d) / std::tgamma(0.5 * d);
}

// int_{S^{d-1}} |omega_1|^p domega.
inline double sphere_first_moment(int d, double p) {
  const double pi = 3.14159265358979323846;
  return 2.0 * std::pow(pi, 0.5 * (d - 1)) * std::tgamma(0.5 * (p + 1)) /
         std::tgamma(0.5 * (d + p));
}

// Radial weight with a hard cutoff; moments are one-dimensional integrals
// clipped at the cutoff.
struct RadialProfile {
  std::function<double(double)> w;
  double cutoff = std::numeric_limits<double>::infinity();

  double operator()(double r) const { return r <= cutoff ? w(r) : 0.0; }

  // int_0^min(T,cutoff) w(r) r^q dr
  double moment_to(double q, double T) const {
    const double b = std::min(T, cutoff);
    if (!(b > 0)) return 0.0;
    return detail::adaptive_simpson([this, q](double r) { return w(r) * std::pow(r, q); },
                                    0.0, b);
  }
  double moment(double q) const {
    require(std::isfinite(cutoff), "radial moment: profile has no cutoff");
    return moment_to(q, cutoff);
  }
};

// ---------------------------------------------------------------------------
// KernelSpec: an evaluable integrand plus its structural metadata. Built-in
// families additionally expose the separable form
//   f(xi, z) = iso(|xi|) |z|^p + aniso(|xi|) |<a, z>|^p,
// which the energy loops use as a fast path.

struct KernelSpec {
  std::string name;
  int d = 0;
  int m = 1;
  double p = 2;
  double r0 = 0;        // short-range radius
  double lambda0 = 0;   // short-range lower constant
  double support_radius = std::numeric_limits<double>::infinity();
  bool convex_in_z = true;

  std::function<double(const double* xi, const double* z)> eval;
  std::function<void(const double* xi, const double* z, double mu, double* out)> grad_z;
  std::function<double(const double* xi)> envelope_M;
  std::function<double(const double* xi)> envelope_m;

  struct PHomForm {
    RadialProfile iso;
    std::optional<RadialProfile> aniso;
    std::vector<double> a;  // unit vector in R^m
  };
  std::optional<PHomForm> phom;

  bool unbounded_support() const { return !std::isfinite(support_radius); }
};

namespace detail {

inline double pow_half(double sq, double half_exponent) {
  // sq^(half_exponent) with sq >= 0; fast path for integers handled by pow
  return std::pow(sq, half_exponent);
}

// Assembles eval/grad/envelopes from the separable form.
inline void attach_phom_evaluators(KernelSpec& k) {
  const auto form = *k.phom;  // by value: evaluators own their coefficients
  const int d = k.d;
  const int m = k.m;
  const double p = k.p;

  k.eval = [form, d, m, p](const double* xi, const double* z) {
    const double r = std::sqrt(norm_sq_m(xi, d));
    double v = form.iso(r) * detail::pow_half(norm_sq_m(z, m), 0.5 * p);
    if (form.aniso) {
      const double t = dot_m(form.a.data(), z, m);
      v += (*form.aniso)(r)*detail::pow_half(t * t, 0.5 * p);
    }
    return v;
  };
  k.grad_z = [form, d, m, p](const double* xi, const double* z, double mu, double* out) {
    const double r = std::sqrt(norm_sq_m(xi, d));
    const double wi = form.iso(r);
    const double zz = norm_sq_m(z, m) + mu * mu;
    const double ci = wi * p * detail::pow_half(zz, 0.5 * p - 1.0);
    for (int c = 0; c < m; ++c) out[c] = ci * z[c];
    if (form.aniso) {
      const double wa = (*form.aniso)(r);
      const double t = dot_m(form.a.data(), z, m);
      const double ca = wa * p * detail::pow_half(t * t + mu * mu, 0.5 * p - 1.0) * t;
      for (int c = 0; c < m; ++c) out[c] += ca * form.a[c];
    }
  };
  k.envelope_M = [form, d, m](const double* xi) {
    const double r = std::sqrt(norm_sq_m(xi, d));
    double v = form.iso(r);
    if (form.aniso) v += (*form.aniso)(r);  // |a| = 1, sup at z = a
    return v;
  };
  k.envelope_m = [form, d, m](const double* xi) {
    const double r = std::sqrt(norm_sq_m(xi, d));
    double v = form.iso(r);
    if (form.aniso && m == 1) v += (*form.aniso)(r);  // no direction orthogonal to a
    return v;
  };
}

}  // namespace detail

// f(xi,z) = c * chi_{|xi|<=rho} * |z|^p
inline KernelSpec indicator_ball_kernel(int d, int m, double p, double rho, double c) {
  require(d >= 2, "kernel: d must be >= 2");
  require(m >= 1, "kernel: m must be >= 1");
  require(p > 1 && p < d, "kernel: p must lie in (1, d)");
  require(rho > 0 && c > 0, "kernel: rho and c must be positive");
  KernelSpec k;
  k.name = "indicator-ball";
  k.d = d;
  k.m = m;
  k.p = p;
  k.r0 = rho;
  k.lambda0 = c;
  k.support_radius = rho;
  k.convex_in_z = true;
  k.phom = KernelSpec::PHomForm{RadialProfile{[c](double) { return c; }, rho},
                                std::nullopt,
                                {}};
  detail::attach_phom_evaluators(k);
  return k;
}

// f(xi,z) = c * e^{-|xi|^2} * |z|^p, cut at the radius where the weight is
// numerically zero.
inline KernelSpec smooth_decay_kernel(int d, int m, double p, double c) {
  require(d >= 2, "kernel: d must be >= 2");
  require(m >= 1, "kernel: m must be >= 1");
  require(p > 1 && p < d, "kernel: p must lie in (1, d)");
  require(c > 0, "kernel: c must be positive");
  KernelSpec k;
  k.name = "smooth-decay";
  k.d = d;
  k.m = m;
  k.p = p;
  k.r0 = 1.0;
  k.lambda0 = c * std::exp(-1.0);
  k.support_radius = std::sqrt(-std::log(1e-30));  // weight below 1e-30 beyond
  k.convex_in_z = true;
  k.phom = KernelSpec::PHomForm{
      RadialProfile{[c](double r) { return c * std::exp(-r * r); }, k.support_radius},
      std::nullopt,
      {}};
  detail::attach_phom_evaluators(k);
  return k;
}

// f(xi,z) = chi_{|xi|<=rho} * ( c |<a,z>|^p + c' |z|^p ), a a unit vector.
inline KernelSpec anisotropic_kernel(int d, int m, double p, double rho, double c,
                                     double cprime, std::vector<double> a) {
  require(d >= 2, "kernel: d must be >= 2");
  require(m >= 1, "kernel: m must be >= 1");
  require(p > 1 && p < d, "kernel: p must lie in (1, d)");
  require(rho > 0 && c > 0 && cprime > 0, "kernel: rho, c, c' must be positive");
  require(static_cast<int>(a.size()) == m, "kernel: axis must have m components");
  const double an = std::sqrt(norm_sq_m(a.data(), m));
  require(an > 0, "kernel: axis must be nonzero");
  for (auto& v : a) v /= an;

  KernelSpec k;
  k.name = "anisotropic";
  k.d = d;
  k.m = m;
  k.p = p;
  k.r0 = rho;
  k.lambda0 = (m == 1) ? c + cprime : cprime;
  k.support_radius = rho;
  k.convex_in_z = true;
  k.phom = KernelSpec::PHomForm{RadialProfile{[cprime](double) { return cprime; }, rho},
                                RadialProfile{[c](double) { return c; }, rho},
                                std::move(a)};
  detail::attach_phom_evaluators(k);
  return k;
}

// Name + parameter-list entry point used by the configuration layer.
// Recognized parameters: rho, c, cprime, plus axis components a1..am.
inline KernelSpec builtin_kernel(const std::string& family, int d, int m, double p,
                                 const std::vector<std::pair<std::string, double>>& params) {
  auto get = [&](const std::string& key, double fallback, bool* found = nullptr) {
    for (const auto& [k, v] : params) {
      if (k == key) {
        if (found) *found = true;
        return v;
      }
    }
    if (found) *found = false;
    return fallback;
  };
  if (family == "indicator-ball") {
    return indicator_ball_kernel(d, m, p, get("rho", 1.0), get("c", 1.0));
  }
  if (family == "smooth-decay") {
    return smooth_decay_kernel(d, m, p, get("c", 1.0));
  }
  if (family == "anisotropic") {
    std::vector<double> a(static_cast<std::size_t>(m), 0.0);
    bool any = false;
    for (int c = 0; c < m; ++c) {
      bool found = false;
      a[c] = get("a" + std::to_string(c + 1), 0.0, &found);
      any = any || found;
    }
    if (!any) a[0] = 1.0;
    return anisotropic_kernel(d, m, p, get("rho", 1.0), get("c", 1.0), get("cprime", 1.0),
                              std::move(a));
  }
  throw std::invalid_argument("kernel: unknown family '" + family + "'");
}

// f^T(xi,z) = chi_{B_T}(xi) f(xi,z). Requires T > r0.
inline KernelSpec truncate_kernel(const KernelSpec& k, double T) {
  require(T > k.r0, "truncate_kernel: T must exceed the short-range radius r0");
  KernelSpec out = k;
  out.name = k.name + "^T";
  out.support_radius = std::min(k.support_radius, T);
  if (k.phom) {
    KernelSpec::PHomForm form = *k.phom;
    form.iso.cutoff = std::min(form.iso.cutoff, T);
    if (form.aniso) form.aniso->cutoff = std::min(form.aniso->cutoff, T);
    out.phom = std::move(form);
    detail::attach_phom_evaluators(out);
  } else {
    const int d = k.d;
    auto inside = [T, d](const double* xi) { return norm_sq_m(xi, d) <= T * T; };
    auto base_eval = k.eval;
    out.eval = [base_eval, inside](const double* xi, const double* z) {
      return inside(xi) ? base_eval(xi, z) : 0.0;
    };
    auto base_grad = k.grad_z;
    const int m = k.m;
    out.grad_z = [base_grad, inside, m](const double* xi, const double* z, double mu,
                                        double* g) {
      if (inside(xi)) {
        base_grad(xi, z, mu, g);
      } else {
        for (int c = 0; c < m; ++c) g[c] = 0.0;
      }
    };
    auto base_M = k.envelope_M;
    out.envelope_M = [base_M, inside](const double* xi) {
      return inside(xi) ? base_M(xi) : 0.0;
    };
    auto base_m = k.envelope_m;
    out.envelope_m = [base_m, inside](const double* xi) {
      return inside(xi) ? base_m(xi) : 0.0;
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integral quantities.

// int M(xi) (|xi|^p + 1) dxi, the growth integral. Exact-ish radial
// quadrature for separable kernels, tensor midpoint with one refinement
// otherwise.
struct GrowthIntegral {
  double value = 0;
  double error_estimate = 0;
  bool finite = true;
};

inline GrowthIntegral growth_integral(const KernelSpec& k) {
  GrowthIntegral g;
  if (k.phom) {
    const RadialProfile& iso = k.phom->iso;
    double mass = iso.moment(k.d - 1 + k.p) + iso.moment(k.d - 1);
    if (k.phom->aniso) {
      mass += k.phom->aniso->moment(k.d - 1 + k.p) + k.phom->aniso->moment(k.d - 1);
    }
    g.value = sphere_surface(k.d) * mass;
    g.error_estimate = 1e-10 * g.value;
    g.finite = std::isfinite(g.value);
    return g;
  }
  require(std::isfinite(k.support_radius),
          "growth_integral: generic kernels need a finite support radius");
  const double T = k.support_radius;
  auto integrate = [&](Index n) {
    const double hh = 2 * T / static_cast<double>(n);
    Coord xi{};
    MultiIndex mi{};
    std::vector<double> terms;
    Index total = 1;
    for (int i = 0; i < k.d; ++i) total *= n;
    terms.reserve(static_cast<std::size_t>(total));
    for (Index lin = 0; lin < total; ++lin) {
      for (int i = 0; i < k.d; ++i) xi[i] = -T + (static_cast<double>(mi[i]) + 0.5) * hh;
      const double nrm = std::sqrt(norm_sq_m(xi.data(), k.d));
      terms.push_back(k.envelope_M(xi.data()) * (std::pow(nrm, k.p) + 1.0));
      for (int i = k.d - 1; i >= 0; --i) {
        if (++mi[i] < n) break;
        mi[i] = 0;
      }
    }
    return pairwise_sum(terms) * std::pow(hh, k.d);
  };
  const double coarse = integrate(32);
  const double fine = integrate(64);
  g.value = fine;
  g.error_estimate = std::abs(fine - coarse);
  g.finite = std::isfinite(fine);
  return g;
}

// Truncation radius at which the growth tail drops below `rel_tail` of the
// whole integral; used to approximate untruncated energies.
inline double effective_truncation(const KernelSpec& k, double rel_tail = 1e-10) {
  if (std::isfinite(k.support_radius)) {
    if (!k.phom) return k.support_radius;
    const RadialProfile& iso = k.phom->iso;
    const double total = iso.moment(k.d - 1 + k.p) + iso.moment(k.d - 1);
    double lo = k.r0, hi = k.support_radius;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double head = iso.moment_to(k.d - 1 + k.p, mid) + iso.moment_to(k.d - 1, mid);
      if (total - head <= rel_tail * total) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }
  throw std::invalid_argument("effective_truncation: kernel has unbounded support");
}

// ---------------------------------------------------------------------------
// Assumption verification by sampling.

struct AssumptionReport {
  int samples = 0;
  double homogeneity_max_rel_violation = 0;  // (H)
  double envelope_min_short_range = 0;       // min m(xi) over |xi| <= r0
  double lambda0 = 0;
  bool g0_ok = false;                        // (G0)
  double g1_integral = 0;                    // (G1)
  double g1_error_estimate = 0;
  bool g1_finite = false;
  double lipschitz_constant = 0;             // smallest empirical C in (L)
};

inline AssumptionReport verify_assumptions(const KernelSpec& k, int samples,
                                           std::uint64_t seed) {
  require(samples >= 1, "verify_assumptions: samples must be >= 1");
  AssumptionReport rep;
  rep.samples = samples;
  rep.lambda0 = k.lambda0;
  Rng rng(seed);

  const double xi_radius =
      std::isfinite(k.support_radius) ? k.support_radius : std::max(3.0 * k.r0, 2.0);
  std::vector<double> xi(static_cast<std::size_t>(k.d));
  std::vector<double> z(static_cast<std::size_t>(k.m));
  std::vector<double> w(static_cast<std::size_t>(k.m));

  double env_min = std::numeric_limits<double>::infinity();
  for (int it = 0; it < samples; ++it) {
    rng.unit_vector(k.d, xi.data());
    const double rxi = xi_radius * std::pow(rng.uniform01(), 1.0 / k.d);
    for (int i = 0; i < k.d; ++i) xi[i] *= rxi;

    rng.unit_vector(k.m, z.data());
    const double rz = 2.0 * std::pow(rng.uniform01(), 1.0 / k.m);
    for (int c = 0; c < k.m; ++c) z[c] = z[c] * rz;

    // (H)
    const double t = rng.uniform(0.01, 10.0);
    const double base = k.eval(xi.data(), z.data());
    for (int c = 0; c < k.m; ++c) w[c] = t * z[c];
    const double scaled = k.eval(xi.data(), w.data());
    const double target = std::pow(t, k.p) * base;
    const double viol = std::abs(scaled - target) / (std::abs(target) + 1e-30);
    rep.homogeneity_max_rel_violation = std::max(rep.homogeneity_max_rel_violation, viol);

    // (G0): envelope on the short range
    const double rs = k.r0 * std::pow(rng.uniform01(), 1.0 / k.d);
    std::vector<double> xs(static_cast<std::size_t>(k.d));
    rng.unit_vector(k.d, xs.data());
    for (int i = 0; i < k.d; ++i) xs[i] *= rs;
    env_min = std::min(env_min, k.envelope_m(xs.data()));

    // (L): empirical constant over pairs
    rng.unit_vector(k.m, w.data());
    const double rw = 2.0 * std::pow(rng.uniform01(), 1.0 / k.m);
    for (int c = 0; c < k.m; ++c) w[c] *= rw;
    const double Mxi = k.envelope_M(xi.data());
    double dzw = 0;
    for (int c = 0; c < k.m; ++c) dzw += (w[c] - z[c]) * (w[c] - z[c]);
    dzw = std::sqrt(dzw);
    const double za = norm_m(z.data(), k.m), wa = norm_m(w.data(), k.m);
    const double denom =
        Mxi * (std::pow(za, k.p - 1) + std::pow(wa, k.p - 1)) * dzw;
    if (denom > 1e-14) {
      const double num = std::abs(k.eval(xi.data(), w.data()) - k.eval(xi.data(), z.data()));
      rep.lipschitz_constant = std::max(rep.lipschitz_constant, num / denom);
    }
  }
  rep.envelope_min_short_range = env_min;
  rep.g0_ok = env_min >= k.lambda0 * (1.0 - 1e-12);

  const GrowthIntegral g = growth_integral(k);
  rep.g1_integral = g.value;
  rep.g1_error_estimate = g.error_estimate;
  rep.g1_finite = g.finite;
  return rep;
}

// f_hom(S) = C |S|^p for isotropic kernels with rank-one data S = z e^T;
// this returns C = int iso(|xi|) |xi_1|^p dxi.
inline double isotropic_dirichlet_constant(const KernelSpec& k) {
  require(k.phom && !k.phom->aniso, "isotropic constant: kernel is not isotropic");
  return k.phom->iso.moment(k.d - 1 + k.p) * sphere_first_moment(k.d, k.p);
}

// Rescales the isotropic weight so that f_hom(S) = |S|^p on rank-one data.
inline KernelSpec normalize_isotropic(const KernelSpec& k) {
  const double C = isotropic_dirichlet_constant(k);
  require(C > 0, "normalize: degenerate kernel");
  KernelSpec out = k;
  KernelSpec::PHomForm form = *k.phom;
  auto base = form.iso.w;
  form.iso.w = [base, C](double r) { return base(r) / C; };
  out.phom = std::move(form);
  out.lambda0 = k.lambda0 / C;
  detail::attach_phom_evaluators(out);
  out.name = k.name + "-normalized";
  return out;
}

}  // namespace nlhg

#endif  // NLHG_KERNELS_HPP

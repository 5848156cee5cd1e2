// Test-only oracles, independent of the library's evaluation paths:
// 1-D quadrature, brute-force pair sums, exhaustive coordinate descent,
// closed-form capacity integrands, and the affine lattice-sum prediction
// for quadratic cell problems.
#ifndef NLHG_TESTS_ORACLES_HPP
#define NLHG_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "nlhg/energy.hpp"
#include "nlhg/grid.hpp"

namespace oracles {

inline constexpr double kPi = 3.14159265358979323846;

// Composite Simpson with a fixed fine partition (independent of the
// library's adaptive routine).
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Surface measure of S^{d-1} from the closed form.
inline double sphere_surface(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

// int_{S^{d-1}} |omega_1|^p via the 1-D polar reduction
// = surface(d-1) * int_0^pi |cos t|^p sin^{d-2} t dt  (d >= 2).
inline double sphere_first_moment(int d, double p) {
  if (d == 2) {
    return simpson([p](double t) { return std::pow(std::abs(std::cos(t)), p); }, 0.0,
                   2.0 * kPi);
  }
  const double ring = sphere_surface(d - 1);
  return ring * simpson(
                    [p, d](double t) {
                      return std::pow(std::abs(std::cos(t)), p) *
                             std::pow(std::sin(t), d - 2);
                    },
                    0.0, kPi);
}

// int_{B_rho} w(|xi|) |xi_1|^p dxi by radial reduction.
inline double radial_first_moment_integral(int d, double p,
                                           const std::function<double(double)>& w,
                                           double rho) {
  const double ang = sphere_first_moment(d, p);
  return ang * simpson([&](double r) { return w(r) * std::pow(r, d - 1 + p); }, 0.0, rho);
}

// int_{B_rho} w(|xi|) (|xi|^p + 1) dxi by radial reduction.
inline double radial_growth_integral(int d, double p, const std::function<double(double)>& w,
                                     double rho) {
  return sphere_surface(d) *
         simpson([&](double r) { return w(r) * (std::pow(r, p) + 1.0) * std::pow(r, d - 1); },
                 0.0, rho);
}

// Brute-force double sum over all active cell pairs: the defining quadrature
// evaluated without the shift-lattice machinery.
inline double brute_force_energy(const nlhg::GridFunction& u, const nlhg::GridDomain& A,
                                 const nlhg::KernelSpec& k, double eps, double T) {
  const nlhg::GridDomain& dom = u.domain();
  const double w = std::pow(dom.h / eps, dom.d) * std::pow(dom.h, dom.d);
  double total = 0;
  std::vector<double> xi(static_cast<std::size_t>(dom.d));
  std::vector<double> D(static_cast<std::size_t>(u.m));
  for (nlhg::Index i = 0; i < dom.ncells; ++i) {
    if (!A.active(i)) continue;
    const nlhg::Coord xi_c = dom.center(i);
    for (nlhg::Index j = 0; j < dom.ncells; ++j) {
      if (j == i || !A.active(j)) continue;
      const nlhg::Coord xj_c = dom.center(j);
      double n2 = 0;
      for (int a = 0; a < dom.d; ++a) {
        xi[a] = (xj_c[a] - xi_c[a]) / eps;
        n2 += xi[a] * xi[a];
      }
      if (n2 > T * T * (1 + 1e-12)) continue;
      for (int c = 0; c < u.m; ++c) {
        D[c] = (u.values[j * u.m + c] - u.values[i * u.m + c]) / eps;
      }
      total += w * k.eval(xi.data(), D.data());
    }
  }
  return total;
}

// Exhaustive cyclic coordinate descent with golden-section line minimization;
// converges on smooth strictly convex objectives.
inline double coordinate_descent(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, int sweeps = 4000,
                                 double span = 4.0) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double fx = f(x);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double before = fx;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double a = x[i] - span, b = x[i] + span;
      double c = b - gr * (b - a), d = a + gr * (b - a);
      auto eval = [&](double t) {
        const double keep = x[i];
        x[i] = t;
        const double v = f(x);
        x[i] = keep;
        return v;
      };
      double fc = eval(c), fd = eval(d);
      for (int it = 0; it < 90; ++it) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - gr * (b - a);
          fc = eval(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + gr * (b - a);
          fd = eval(d);
        }
      }
      x[i] = 0.5 * (a + b);
      fx = f(x);
    }
    if (before - fx < 1e-15 * (std::abs(before) + 1e-30)) break;
  }
  return fx;
}

// Radial annulus capacity by 1-D quadrature of the closed-form minimizer.
inline double annulus_capacity_quadrature(int d, double p, double R) {
  const double kappa = (d - p) / (p - 1);
  const double denom = 1.0 - std::pow(R, -kappa);
  auto du = [&](double r) { return kappa * std::pow(r, -kappa - 1.0) / denom; };
  return sphere_surface(d) *
         simpson([&](double r) { return std::pow(du(r), p) * std::pow(r, d - 1); }, 1.0, R);
}

// Discrete energy of the affine field u = Sx on the cube of side R: the
// exact value of the quadratic isotropic cell problem (the affine field is
// stationary there). S is a single row (m = 1).
inline double affine_cell_value(const nlhg::KernelSpec& k, const std::vector<double>& S,
                                double R, double h) {
  const nlhg::EnergyParams pp = nlhg::make_energy_params(h, k.d, 1.0, k.support_radius,
                                                         k.support_radius);
  double total = 0;
  std::vector<double> Sxi(1);
  for (const nlhg::Shift& sh : pp.shifts) {
    double windows = 1.0;
    for (int i = 0; i < k.d; ++i) {
      const double len = R - std::abs(sh.xi[i]);
      windows *= std::max(0.0, len);
    }
    double dot = 0;
    for (int i = 0; i < k.d; ++i) dot += S[i] * sh.xi[i];
    Sxi[0] = dot;
    total += pp.weight * k.eval(sh.xi.data(), Sxi.data()) * windows;
  }
  return total / std::pow(R, k.d);
}

}  // namespace oracles

#endif  // NLHG_TESTS_ORACLES_HPP

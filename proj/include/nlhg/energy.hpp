// Discrete convolution-type energies. The xi-integral is quadratured on the
// grid-commensurate shift lattice Xi = { xi : eps*xi in h*Z^d, 0 < |xi| <= T }
// with per-node weight (h/eps)^d, so every shifted evaluation u(x + eps*xi)
// is exact and the rescaling identity holds to rounding error.
#ifndef NLHG_ENERGY_HPP
#define NLHG_ENERGY_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "nlhg/grid.hpp"
#include "nlhg/kernels.hpp"

namespace nlhg {

struct Shift {
  std::array<int, kMaxDim> s{};
  Coord xi{};
  double norm = 0;
};

struct EnergyParams {
  int d = 0;
  double h = 0;
  double epsilon = 1;
  double T = 0;        // requested truncation radius
  double radius = 0;   // effective bound after clipping at the kernel support
  double weight = 0;   // (h/eps)^d per lattice node
  std::vector<Shift> shifts;
  bool under_resolved = false;  // eps/h < 4: quadrature warning

  double total_weight() const { return weight * static_cast<double>(shifts.size()); }
};

// Builds the shift lattice for a grid of spacing h. Nodes beyond the kernel
// support carry zero integrand and are dropped; this leaves values unchanged.
inline EnergyParams make_energy_params(double h, int d, double epsilon, double T,
                                       double support_clip =
                                           std::numeric_limits<double>::infinity()) {
  require(h > 0 && epsilon > 0 && T > 0, "energy params: h, eps, T must be positive");
  EnergyParams pp;
  pp.d = d;
  pp.h = h;
  pp.epsilon = epsilon;
  pp.T = T;
  pp.radius = std::min(T, support_clip);
  pp.under_resolved = epsilon / h < 4.0 - 1e-12;
  const double ratio = h / epsilon;
  pp.weight = std::pow(ratio, d);

  const double rc = pp.radius / ratio;  // bound on |s|
  const auto nmax = static_cast<Index>(std::floor(rc + 1e-9));
  require(nmax >= 0, "energy params: empty shift lattice");
  const double rc2 = rc * rc * (1.0 + 1e-12);

  MultiIndex s{};
  for (int i = 0; i < d; ++i) s[i] = -nmax;
  while (true) {
    double s2 = 0;
    for (int i = 0; i < d; ++i) s2 += static_cast<double>(s[i]) * static_cast<double>(s[i]);
    if (s2 > 0 && s2 <= rc2) {
      Shift sh;
      double n2 = 0;
      for (int i = 0; i < d; ++i) {
        sh.s[i] = static_cast<int>(s[i]);
        sh.xi[i] = static_cast<double>(s[i]) * ratio;
        n2 += sh.xi[i] * sh.xi[i];
      }
      sh.norm = std::sqrt(n2);
      pp.shifts.push_back(sh);
    }
    int axis = d - 1;
    for (; axis >= 0; --axis) {
      if (++s[axis] <= nmax) break;
      s[axis] = -nmax;
    }
    if (axis < 0) break;
  }
  return pp;
}

inline EnergyParams make_energy_params(const GridDomain& dom, double epsilon, double T,
                                       double support_clip =
                                           std::numeric_limits<double>::infinity()) {
  return make_energy_params(dom.h, dom.d, epsilon, T, support_clip);
}

inline EnergyParams make_energy_params(const GridDomain& dom, double epsilon,
                                       const KernelSpec& k) {
  const double T = std::isfinite(k.support_radius) ? k.support_radius
                                                   : effective_truncation(k);
  return make_energy_params(dom.h, dom.d, epsilon, T, k.support_radius);
}

// Exact pullback of the lattice under (h, eps) -> (h/r, eps/r): identical
// integer shifts and xi values.
inline EnergyParams rescale_params(const EnergyParams& pp, double r) {
  EnergyParams out = pp;
  out.h = pp.h / r;
  out.epsilon = pp.epsilon / r;
  out.under_resolved = pp.under_resolved;
  return out;
}

// ---------------------------------------------------------------------------
// Pair iteration: runs f(lin) for every in-box cell whose partner lin+off is
// also in the box. Membership in masks is the caller's concern.

namespace detail {

struct PairWindow {
  MultiIndex lo{}, hi{};
  bool empty = false;
};

inline PairWindow pair_window(const GridDomain& dom, const int* s) {
  PairWindow w;
  for (int i = 0; i < dom.d; ++i) {
    w.lo[i] = std::max<Index>(0, -static_cast<Index>(s[i]));
    w.hi[i] = std::min<Index>(dom.shape[i], dom.shape[i] - s[i]);
    if (w.lo[i] >= w.hi[i]) w.empty = true;
  }
  return w;
}

template <class Fn>
inline void for_each_pair(const GridDomain& dom, const int* s, Fn&& f) {
  const PairWindow w = pair_window(dom, s);
  if (w.empty) return;
  const int d = dom.d;
  const int last = d - 1;
  MultiIndex mi = w.lo;
  while (true) {
    Index base = 0;
    for (int i = 0; i < last; ++i) base += mi[i] * dom.stride[i];
    const Index stop = base + w.hi[last];
    for (Index lin = base + w.lo[last]; lin < stop; ++lin) f(lin);
    int axis = last - 1;
    for (; axis >= 0; --axis) {
      if (++mi[axis] < w.hi[axis]) break;
      mi[axis] = w.lo[axis];
    }
    if (axis < 0) break;
  }
}

// Per-shift evaluator with the separable fast path folded into two weights.
struct ShiftEval {
  bool fast = false;
  // fast path: term = wi*(|du|^2 + mue2)^(p/2) + wa*(<a,du>^2 + mue2)^(p/2)
  double wi = 0, wa = 0;
  const double* a = nullptr;
  double mue2 = 0;
  double p = 2;
  bool plain_quadratic = false;  // p == 2 and mue2 == 0
  // generic path
  const KernelSpec* k = nullptr;
  const double* xi = nullptr;
  double scale = 0;  // w_xi * h^d
  double inv_eps = 0;
  double mu = 0;

  double term(const double* ux, const double* uy, int m, double* dscratch) const {
    if (fast) {
      double s2 = 0;
      for (int c = 0; c < m; ++c) {
        const double diff = uy[c] - ux[c];
        dscratch[c] = diff;
        s2 += diff * diff;
      }
      double v;
      if (plain_quadratic) {
        v = wi * s2;
        if (wa != 0) {
          const double t = dot_m(a, dscratch, m);
          v += wa * t * t;
        }
      } else {
        v = wi * std::pow(s2 + mue2, 0.5 * p);
        if (wa != 0) {
          const double t = dot_m(a, dscratch, m);
          v += wa * std::pow(t * t + mue2, 0.5 * p);
        }
      }
      return v;
    }
    for (int c = 0; c < m; ++c) dscratch[c] = (uy[c] - ux[c]) * inv_eps;
    return scale * k->eval(xi, dscratch);
  }

  // d(term)/d(uy); the ux derivative is its negative.
  void grad(const double* ux, const double* uy, int m, double* g, double* dscratch) const {
    if (fast) {
      double s2 = 0;
      for (int c = 0; c < m; ++c) {
        const double diff = uy[c] - ux[c];
        dscratch[c] = diff;
        s2 += diff * diff;
      }
      double ci;
      if (plain_quadratic) {
        ci = 2.0 * wi;
      } else {
        ci = wi * p * std::pow(s2 + mue2, 0.5 * p - 1.0);
        if (!std::isfinite(ci)) {
          throw std::runtime_error(
              "energy gradient: singular difference; use mu > 0 for p < 2");
        }
      }
      for (int c = 0; c < m; ++c) g[c] = ci * dscratch[c];
      if (wa != 0) {
        const double t = dot_m(a, dscratch, m);
        const double ca = plain_quadratic
                              ? 2.0 * wa * t
                              : wa * p * std::pow(t * t + mue2, 0.5 * p - 1.0) * t;
        for (int c = 0; c < m; ++c) g[c] += ca * a[c];
      }
      return;
    }
    for (int c = 0; c < m; ++c) dscratch[c] = (uy[c] - ux[c]) * inv_eps;
    k->grad_z(xi, dscratch, mu, g);
    const double f = scale * inv_eps;
    for (int c = 0; c < m; ++c) g[c] *= f;
  }
};

inline ShiftEval prepare_shift(const KernelSpec& k, const Shift& sh, const EnergyParams& pp,
                               double mu) {
  ShiftEval ev;
  const double cellw = pp.weight * std::pow(pp.h, pp.d);
  if (k.phom) {
    ev.fast = true;
    ev.p = k.p;
    const double fold = cellw / std::pow(pp.epsilon, k.p);
    ev.wi = fold * k.phom->iso(sh.norm);
    ev.wa = k.phom->aniso ? fold * (*k.phom->aniso)(sh.norm) : 0.0;
    ev.a = k.phom->a.empty() ? nullptr : k.phom->a.data();
    const double mue = mu * pp.epsilon;
    ev.mue2 = mue * mue;
    ev.plain_quadratic = (k.p == 2.0) && (ev.mue2 == 0.0);
  } else {
    ev.fast = false;
    ev.k = &k;
    ev.xi = sh.xi.data();
    ev.scale = cellw;
    ev.inv_eps = 1.0 / pp.epsilon;
    ev.mu = mu;
  }
  return ev;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// F_eps^T(u, A): pairs with both endpoints active in A. A must share the
// grid geometry of u; only its mask may differ.

inline double nonlocal_energy(const GridFunction& u, const GridDomain& A,
                              const KernelSpec& k, const EnergyParams& pp, double mu = 0) {
  const GridDomain& dom = u.domain();
  require(dom.same_geometry(A), "nonlocal_energy: A must share the grid of u");
  require(k.m == u.m, "nonlocal_energy: kernel target dimension mismatch");
  const int m = u.m;
  const int nshifts = static_cast<int>(pp.shifts.size());
  std::vector<double> per_shift(static_cast<std::size_t>(nshifts), 0.0);
  const double* values = u.values.data();

  parallel_blocks(nshifts, [&](int si) {
    const Shift& sh = pp.shifts[static_cast<std::size_t>(si)];
    const detail::ShiftEval ev = detail::prepare_shift(k, sh, pp, mu);
    const Index off = shift_offset(dom, sh.s.data());
    double scratch[8];
    std::vector<double> scratch_big;
    double* ds = scratch;
    if (m > 8) {
      scratch_big.resize(static_cast<std::size_t>(m));
      ds = scratch_big.data();
    }
    double acc = 0;
    if (A.all_active()) {
      detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
        acc += ev.term(values + lin * m, values + (lin + off) * m, m, ds);
      });
    } else {
      const std::uint8_t* mask = A.mask.data();
      detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
        if (mask[lin] && mask[lin + off]) {
          acc += ev.term(values + lin * m, values + (lin + off) * m, m, ds);
        }
      });
    }
    per_shift[static_cast<std::size_t>(si)] = acc;
  });
  return pairwise_sum(per_shift);
}

inline double nonlocal_energy(const GridFunction& u, const KernelSpec& k,
                              const EnergyParams& pp, double mu = 0) {
  return nonlocal_energy(u, u.domain(), k, pp, mu);
}

// F_eps^T(u, R^d) for fields with a constant exterior value: includes pairs
// with one endpoint outside the box or outside the active mask.
inline double nonlocal_energy_extended(const GridFunction& u, const KernelSpec& k,
                                       const EnergyParams& pp, double mu = 0) {
  const GridDomain& dom = u.domain();
  require(u.exterior.has_value(),
          "nonlocal_energy_extended: field needs a constant exterior value");
  require(k.m == u.m, "nonlocal_energy_extended: kernel target dimension mismatch");
  const int m = u.m;
  const int d = dom.d;
  const double* ext = u.exterior->data();
  const double* values = u.values.data();
  const int nshifts = static_cast<int>(pp.shifts.size());
  std::vector<double> per_shift(static_cast<std::size_t>(nshifts), 0.0);

  parallel_blocks(nshifts, [&](int si) {
    const Shift& sh = pp.shifts[static_cast<std::size_t>(si)];
    const detail::ShiftEval ev = detail::prepare_shift(k, sh, pp, mu);
    const Index off = shift_offset(dom, sh.s.data());
    double scratch[8];
    std::vector<double> scratch_big;
    double* ds = scratch;
    if (m > 8) {
      scratch_big.resize(static_cast<std::size_t>(m));
      ds = scratch_big.data();
    }
    double acc = 0;
    MultiIndex mi{};
    for (Index lin = 0; lin < dom.ncells; ++lin) {
      const bool ax = dom.active(lin);
      const double* vx = ax ? values + lin * m : ext;

      bool fwd_in = true, bwd_in = true;
      for (int i = 0; i < d; ++i) {
        const Index tf = mi[i] + sh.s[i];
        if (tf < 0 || tf >= dom.shape[i]) fwd_in = false;
        const Index tb = mi[i] - sh.s[i];
        if (tb < 0 || tb >= dom.shape[i]) bwd_in = false;
      }
      if (fwd_in) {
        const Index j = lin + off;
        const bool ay = dom.active(j);
        if (ax || ay) {
          const double* vy = ay ? values + j * m : ext;
          acc += ev.term(vx, vy, m, ds);
        }
      } else if (ax) {
        acc += ev.term(vx, ext, m, ds);
      }
      if (!bwd_in && ax) {
        acc += ev.term(ext, vx, m, ds);
      }
      for (int i = d - 1; i >= 0; --i) {
        if (++mi[i] < dom.shape[i]) break;
        mi[i] = 0;
      }
    }
    per_shift[static_cast<std::size_t>(si)] = acc;
  });
  return pairwise_sum(per_shift);
}

// G_eps^{r,p}(u, A): the short-range comparison energy with integrand |z|^p.
inline double short_range_energy(const GridFunction& u, const GridDomain& A, double r,
                                 double p, double eps, double mu = 0) {
  require(r > 0, "short_range_energy: r must be positive");
  const KernelSpec g = indicator_ball_kernel(u.domain().d, u.m, p, r, 1.0);
  const EnergyParams pp = make_energy_params(u.domain(), eps, r, r);
  return nonlocal_energy(u, A, g, pp, mu);
}

inline double short_range_energy_extended(const GridFunction& u, double r, double p,
                                          double eps, double mu = 0) {
  require(r > 0, "short_range_energy: r must be positive");
  const KernelSpec g = indicator_ball_kernel(u.domain().d, u.m, p, r, 1.0);
  const EnergyParams pp = make_energy_params(u.domain(), eps, r, r);
  return nonlocal_energy_extended(u, g, pp);
}

// F_{eps,delta}: +infinity variant when the pinning constraint is violated
// (exact zeros required on pinned cells), the plain energy otherwise.
inline EnergyResult pinned_energy(const GridFunction& u, const GridDomain& omega,
                                  const KernelSpec& k, const EnergyParams& pp,
                                  const Perforation& P) {
  const auto pins = pinned_cell_indices(u.domain(), P);
  for (Index lin : pins) {
    const double* v = u.cell(lin);
    for (int c = 0; c < u.m; ++c) {
      if (v[c] != 0.0) return EnergyResult::infeasible();
    }
  }
  return EnergyResult::of(nonlocal_energy(u, omega, k, pp));
}

// ---------------------------------------------------------------------------
// Reweighted quadratic form for the p < 2 solver: the tangent majorant of
// the smoothed energy at a reference field,
//   E_ref(v) = sum_pairs W (p/2) (|Du_ref|^2 + mu^2)^{p/2-1} |Dv|^2
// (plus the analogous anisotropic part). Minimizing it decreases the true
// smoothed energy. Separable kernels only.

namespace detail {

struct ReweightTerm {
  double wi = 0, wa = 0;  // folded weights including the p/2 factor
  double mue2 = 0;
  double pexp = 0;  // p/2 - 1
  const double* a = nullptr;
};

inline ReweightTerm prepare_reweight(const KernelSpec& k, const Shift& sh,
                                     const EnergyParams& pp, double mu) {
  ReweightTerm t;
  const double cellw = pp.weight * std::pow(pp.h, pp.d);
  const double fold = cellw / std::pow(pp.epsilon, k.p) * 0.5 * k.p;
  t.wi = fold * k.phom->iso(sh.norm);
  t.wa = k.phom->aniso ? fold * (*k.phom->aniso)(sh.norm) : 0.0;
  t.a = k.phom->a.empty() ? nullptr : k.phom->a.data();
  const double mue = mu * pp.epsilon;
  t.mue2 = mue * mue;
  t.pexp = 0.5 * k.p - 1.0;
  return t;
}

}  // namespace detail

inline double reweighted_energy(const GridFunction& v, const GridFunction& uref,
                                const GridDomain& A, const KernelSpec& k,
                                const EnergyParams& pp, double mu) {
  const GridDomain& dom = v.domain();
  require(k.phom.has_value(), "reweighted energy: separable kernels only");
  const int m = v.m;
  const int nshifts = static_cast<int>(pp.shifts.size());
  std::vector<double> per_shift(static_cast<std::size_t>(nshifts), 0.0);
  const double* vv = v.values.data();
  const double* rv = uref.values.data();

  parallel_blocks(nshifts, [&](int si) {
    const Shift& sh = pp.shifts[static_cast<std::size_t>(si)];
    const detail::ReweightTerm t = detail::prepare_reweight(k, sh, pp, mu);
    const Index off = shift_offset(dom, sh.s.data());
    double acc = 0;
    auto visit = [&](Index lin) {
      const Index j = lin + off;
      double dref2 = 0, dv2 = 0, tref = 0, tv = 0;
      for (int c = 0; c < m; ++c) {
        const double dr = rv[j * m + c] - rv[lin * m + c];
        const double dz = vv[j * m + c] - vv[lin * m + c];
        dref2 += dr * dr;
        dv2 += dz * dz;
        if (t.a != nullptr) {
          tref += t.a[c] * dr;
          tv += t.a[c] * dz;
        }
      }
      acc += t.wi * std::pow(dref2 + t.mue2, t.pexp) * dv2;
      if (t.wa != 0) acc += t.wa * std::pow(tref * tref + t.mue2, t.pexp) * tv * tv;
    };
    if (A.all_active()) {
      detail::for_each_pair(dom, sh.s.data(), visit);
    } else {
      const std::uint8_t* mask = A.mask.data();
      detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
        if (mask[lin] && mask[lin + off]) visit(lin);
      });
    }
    per_shift[static_cast<std::size_t>(si)] = acc;
  });
  return pairwise_sum(per_shift);
}

inline GridFunction reweighted_gradient(const GridFunction& v, const GridFunction& uref,
                                        const GridDomain& A, const KernelSpec& k,
                                        const EnergyParams& pp, double mu,
                                        const std::vector<std::uint8_t>* frozen) {
  const GridDomain& dom = v.domain();
  require(k.phom.has_value(), "reweighted gradient: separable kernels only");
  const int m = v.m;
  const int nshifts = static_cast<int>(pp.shifts.size());
  const double* vv = v.values.data();
  const double* rv = uref.values.data();
  const std::size_t nval = v.values.size();

  const int nblocks = std::min<int>(std::max(1, worker_count().load()), std::max(1, nshifts));
  std::vector<std::vector<double>> buffers(static_cast<std::size_t>(nblocks));
  for (auto& b : buffers) b.assign(nval, 0.0);

  parallel_blocks(nblocks, [&](int blk) {
    double* out = buffers[static_cast<std::size_t>(blk)].data();
    const int lo = static_cast<int>(static_cast<long long>(nshifts) * blk / nblocks);
    const int hi = static_cast<int>(static_cast<long long>(nshifts) * (blk + 1) / nblocks);
    for (int si = lo; si < hi; ++si) {
      const Shift& sh = pp.shifts[static_cast<std::size_t>(si)];
      const detail::ReweightTerm t = detail::prepare_reweight(k, sh, pp, mu);
      const Index off = shift_offset(dom, sh.s.data());
      auto visit = [&](Index lin) {
        const Index j = lin + off;
        double dref2 = 0, tref = 0, tv = 0;
        for (int c = 0; c < m; ++c) {
          const double dr = rv[j * m + c] - rv[lin * m + c];
          dref2 += dr * dr;
          if (t.a != nullptr) {
            tref += t.a[c] * dr;
            tv += t.a[c] * (vv[j * m + c] - vv[lin * m + c]);
          }
        }
        const double ci = 2.0 * t.wi * std::pow(dref2 + t.mue2, t.pexp);
        const double ca = (t.wa != 0)
                              ? 2.0 * t.wa * std::pow(tref * tref + t.mue2, t.pexp) * tv
                              : 0.0;
        for (int c = 0; c < m; ++c) {
          double g = ci * (vv[j * m + c] - vv[lin * m + c]);
          if (t.a != nullptr) g += ca * t.a[c];
          out[j * m + c] += g;
          out[lin * m + c] -= g;
        }
      };
      if (A.all_active()) {
        detail::for_each_pair(dom, sh.s.data(), visit);
      } else {
        const std::uint8_t* mask = A.mask.data();
        detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
          if (mask[lin] && mask[lin + off]) visit(lin);
        });
      }
    }
  });

  GridFunction grad = make_field(v.dom, m);
  double* gv = grad.values.data();
  for (const auto& b : buffers) {
    const double* src = b.data();
    for (std::size_t i = 0; i < nval; ++i) gv[i] += src[i];
  }
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    const bool keep = dom.active(lin) && (frozen == nullptr || (*frozen)[lin] == 0);
    if (!keep) {
      for (int c = 0; c < m; ++c) gv[lin * m + c] = 0.0;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// First variation with respect to cell values. Each pair (x, x+eps*xi)
// contributes +g to its head and -g to its tail; frozen cells are zeroed.

inline GridFunction energy_gradient(const GridFunction& u, const GridDomain& A,
                                    const KernelSpec& k, const EnergyParams& pp,
                                    const std::vector<std::uint8_t>* frozen, double mu) {
  const GridDomain& dom = u.domain();
  require(dom.same_geometry(A), "energy_gradient: A must share the grid of u");
  require(k.m == u.m, "energy_gradient: kernel target dimension mismatch");
  if (k.p < 2.0 && mu == 0.0) {
    // permitted only when no zero differences occur; the pair loop throws on
    // a singular pair
  }
  const int m = u.m;
  const int nshifts = static_cast<int>(pp.shifts.size());
  const double* values = u.values.data();
  const std::size_t nval = u.values.size();

  const int nblocks = std::min<int>(std::max(1, worker_count().load()), std::max(1, nshifts));
  std::vector<std::vector<double>> buffers(static_cast<std::size_t>(nblocks));
  for (auto& b : buffers) b.assign(nval, 0.0);

  parallel_blocks(nblocks, [&](int blk) {
    double* out = buffers[static_cast<std::size_t>(blk)].data();
    const int lo = static_cast<int>(static_cast<long long>(nshifts) * blk / nblocks);
    const int hi = static_cast<int>(static_cast<long long>(nshifts) * (blk + 1) / nblocks);
    double scratch[8];
    double gbuf[8];
    std::vector<double> scratch_big, gbuf_big;
    double* ds = scratch;
    double* g = gbuf;
    if (m > 8) {
      scratch_big.resize(static_cast<std::size_t>(m));
      gbuf_big.resize(static_cast<std::size_t>(m));
      ds = scratch_big.data();
      g = gbuf_big.data();
    }
    for (int si = lo; si < hi; ++si) {
      const Shift& sh = pp.shifts[static_cast<std::size_t>(si)];
      const detail::ShiftEval ev = detail::prepare_shift(k, sh, pp, mu);
      const Index off = shift_offset(dom, sh.s.data());
      auto visit = [&](Index lin) {
        const Index j = lin + off;
        ev.grad(values + lin * m, values + j * m, m, g, ds);
        double* gx = out + lin * m;
        double* gy = out + j * m;
        for (int c = 0; c < m; ++c) {
          gy[c] += g[c];
          gx[c] -= g[c];
        }
      };
      if (A.all_active()) {
        detail::for_each_pair(dom, sh.s.data(), visit);
      } else {
        const std::uint8_t* mask = A.mask.data();
        detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
          if (mask[lin] && mask[lin + off]) visit(lin);
        });
      }
    }
  });

  GridFunction grad = make_field(u.dom, m);
  double* gv = grad.values.data();
  for (const auto& b : buffers) {
    const double* src = b.data();
    for (std::size_t i = 0; i < nval; ++i) gv[i] += src[i];
  }
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    const bool keep = dom.active(lin) && (frozen == nullptr || (*frozen)[lin] == 0);
    if (!keep) {
      for (int c = 0; c < m; ++c) gv[lin * m + c] = 0.0;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Exact rescaling identity: F_eps^T(u, B_rho(x0)) equals
// r^{d-p} F_{eps/r}^T(u(x0 + r .), B_{rho/r}) on the pulled-back grid.

struct RescalingCheck {
  double lhs = 0;
  double rhs = 0;
  double rel_gap = 0;
};

inline RescalingCheck rescaling_identity_check(const GridFunction& u, const double* x0,
                                               double rho, double r, const KernelSpec& k,
                                               const EnergyParams& pp) {
  require(r > 0, "rescaling check: r must be positive");
  const GridDomain& dom = u.domain();
  const int d = dom.d;

  GridDomain parent = dom;
  set_mask(parent, [&](const double* x) {
    double r2 = 0;
    for (int i = 0; i < d; ++i) r2 += (x[i] - x0[i]) * (x[i] - x0[i]);
    return r2 < rho * rho;
  });
  if (!dom.all_active()) {
    for (Index i = 0; i < dom.ncells; ++i) parent.mask[i] &= dom.mask[i];
  }

  const double lhs = nonlocal_energy(u, parent, k, pp);

  // pullback: identical cells, coordinates (x - x0)/r
  GridDomain child = parent;
  child.h = dom.h / r;
  for (int i = 0; i < d; ++i) child.lo[i] = (dom.lo[i] - x0[i]) / r;

  GridFunction v;
  v.dom = std::make_shared<GridDomain>(child);
  v.m = u.m;
  v.values = u.values;
  v.exterior = u.exterior;

  const EnergyParams cpp = rescale_params(pp, r);
  const double rhs = std::pow(r, d - k.p) * nonlocal_energy(v, child, k, cpp);

  RescalingCheck out;
  out.lhs = lhs;
  out.rhs = rhs;
  out.rel_gap = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return out;
}

}  // namespace nlhg

#endif  // NLHG_ENERGY_HPP

// Uniform box grids with piecewise-constant vector fields: domains with
// optional active-cell masks, periodic perforations with their pinning rule,
// finite differences, averages, coarsening, and the radial truncation map.
//
// Conventions: cells are half-open boxes lo + [i, i+1)*h per axis, values are
// attached to cell centers, and set membership (balls, annuli, bands) is
// decided by the cell center.
#ifndef NLHG_GRID_HPP
#define NLHG_GRID_HPP

#include <cmath>
#include <cstring>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "nlhg/common.hpp"

namespace nlhg {

struct GridDomain {
  int d = 0;
  double h = 0;
  Coord lo{};            // lower box corner
  MultiIndex shape{};    // cells per axis
  MultiIndex stride{};   // row-major, axis 0 slowest
  Index ncells = 0;
  std::vector<std::uint8_t> mask;  // empty => every cell active

  bool all_active() const { return mask.empty(); }
  bool active(Index lin) const { return mask.empty() || mask[lin] != 0; }

  Index linear(const MultiIndex& mi) const {
    Index lin = 0;
    for (int i = 0; i < d; ++i) lin += mi[i] * stride[i];
    return lin;
  }

  MultiIndex multi(Index lin) const {
    MultiIndex mi{};
    for (int i = 0; i < d; ++i) {
      mi[i] = lin / stride[i];
      lin -= mi[i] * stride[i];
    }
    return mi;
  }

  void center(const MultiIndex& mi, double* x) const {
    for (int i = 0; i < d; ++i) x[i] = lo[i] + (static_cast<double>(mi[i]) + 0.5) * h;
  }

  Coord center(Index lin) const {
    Coord x{};
    const MultiIndex mi = multi(lin);
    center(mi, x.data());
    return x;
  }

  double hi(int axis) const { return lo[axis] + static_cast<double>(shape[axis]) * h; }

  double cell_volume() const {
    double v = 1;
    for (int i = 0; i < d; ++i) v *= h;
    return v;
  }

  Index active_count() const {
    if (mask.empty()) return ncells;
    Index n = 0;
    for (Index i = 0; i < ncells; ++i) n += (mask[i] != 0);
    return n;
  }

  bool same_geometry(const GridDomain& o) const {
    if (d != o.d || shape != o.shape) return false;
    for (int i = 0; i < d; ++i) {
      if (std::abs(lo[i] - o.lo[i]) > 1e-12 * (1 + std::abs(lo[i]))) return false;
    }
    return std::abs(h - o.h) <= 1e-12 * h;
  }
};

inline GridDomain make_box_domain(int d, const double* lo, const double* hi, double h) {
  require(d >= 1 && d <= kMaxDim, "grid: dimension out of range");
  require(h > 0, "grid: h must be positive");
  GridDomain dom;
  dom.d = d;
  dom.h = h;
  for (int i = 0; i < d; ++i) {
    const double len = hi[i] - lo[i];
    require(len > 0, "grid: empty box axis");
    const double cells = len / h;
    const double rounded = std::round(cells);
    require(std::abs(cells - rounded) <= 1e-9 * std::max(1.0, cells),
            "grid: box side not an integer multiple of h");
    dom.lo[i] = lo[i];
    dom.shape[i] = static_cast<Index>(rounded);
  }
  dom.stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) dom.stride[i] = dom.stride[i + 1] * dom.shape[i + 1];
  dom.ncells = dom.stride[0] * dom.shape[0];
  return dom;
}

// Cube [-half, half]^d.
inline GridDomain make_cube_domain(int d, double half, double h) {
  Coord lo{}, hi{};
  for (int i = 0; i < d; ++i) {
    lo[i] = -half;
    hi[i] = half;
  }
  return make_box_domain(d, lo.data(), hi.data(), h);
}

template <class Pred>
inline void set_mask(GridDomain& dom, Pred&& keep) {
  dom.mask.assign(static_cast<std::size_t>(dom.ncells), 0);
  Coord x{};
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    dom.center(mi, x.data());
    dom.mask[lin] = keep(x.data()) ? 1 : 0;
    for (int i = dom.d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
}

// Open ball mask |x - c| < radius by cell center.
inline void set_ball_mask(GridDomain& dom, const double* c, double radius) {
  const int d = dom.d;
  set_mask(dom, [&](const double* x) {
    double r2 = 0;
    for (int i = 0; i < d; ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
    return r2 < radius * radius;
  });
}

// ---------------------------------------------------------------------------

struct GridFunction {
  std::shared_ptr<const GridDomain> dom;
  int m = 1;
  std::vector<double> values;                 // ncells * m, inactive cells zero
  std::optional<std::vector<double>> exterior;  // constant extension value

  const GridDomain& domain() const { return *dom; }
  double* cell(Index lin) { return values.data() + lin * m; }
  const double* cell(Index lin) const { return values.data() + lin * m; }
};

inline GridFunction make_field(std::shared_ptr<const GridDomain> dom, int m) {
  require(m >= 1, "field: target dimension must be >= 1");
  GridFunction u;
  u.dom = std::move(dom);
  u.m = m;
  u.values.assign(static_cast<std::size_t>(u.dom->ncells) * m, 0.0);
  return u;
}

inline GridFunction make_field(const GridDomain& dom, int m) {
  return make_field(std::make_shared<GridDomain>(dom), m);
}

template <class Fn>
inline void fill_field(GridFunction& u, Fn&& f) {
  const GridDomain& dom = u.domain();
  Coord x{};
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    dom.center(mi, x.data());
    if (dom.active(lin)) {
      f(x.data(), u.cell(lin));
    }
    for (int i = dom.d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
}

inline void set_constant(GridFunction& u, const double* z) {
  const int m = u.m;
  fill_field(u, [&](const double*, double* v) {
    for (int c = 0; c < m; ++c) v[c] = z[c];
  });
}

// ---------------------------------------------------------------------------
// Periodic perforation: balls of radius r on the delta-lattice.

struct Perforation {
  double delta = 0;
  double r = 0;

  Perforation(double delta_, double r_) : delta(delta_), r(r_) {
    require(delta > 0 && r > 0, "perforation: delta and r must be positive");
    require(r < delta / 2, "perforation: balls must not touch (r < delta/2)");
  }
};

// Cells pinned by the perforation: centers inside an open ball B_r(delta i),
// plus the cell containing each lattice point that lies in the box, so
// perforations below cell resolution never vanish.
inline std::vector<Index> pinned_cell_indices(const GridDomain& dom, const Perforation& P) {
  const int d = dom.d;
  std::vector<std::uint8_t> pinned(static_cast<std::size_t>(dom.ncells), 0);

  MultiIndex site_lo{}, site_hi{};
  for (int i = 0; i < d; ++i) {
    site_lo[i] = static_cast<Index>(std::ceil((dom.lo[i] - P.r) / P.delta - 1e-12));
    site_hi[i] = static_cast<Index>(std::floor((dom.hi(i) + P.r) / P.delta + 1e-12));
  }

  MultiIndex site = site_lo;
  while (true) {
    Coord c{};
    for (int i = 0; i < d; ++i) c[i] = P.delta * static_cast<double>(site[i]);

    // cell-index window covered by the ball
    MultiIndex wlo{}, whi{};
    bool nonempty = true;
    for (int i = 0; i < d; ++i) {
      wlo[i] = std::max<Index>(0, static_cast<Index>(std::floor((c[i] - P.r - dom.lo[i]) / dom.h)));
      whi[i] = std::min<Index>(dom.shape[i] - 1,
                               static_cast<Index>(std::floor((c[i] + P.r - dom.lo[i]) / dom.h)));
      if (wlo[i] > whi[i]) nonempty = false;
    }
    if (nonempty) {
      MultiIndex mi = wlo;
      while (true) {
        Coord x{};
        dom.center(mi, x.data());
        double r2 = 0;
        for (int i = 0; i < d; ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
        if (r2 < P.r * P.r) pinned[dom.linear(mi)] = 1;
        int axis = d - 1;
        for (; axis >= 0; --axis) {
          if (++mi[axis] <= whi[axis]) break;
          mi[axis] = wlo[axis];
        }
        if (axis < 0) break;
      }
    }

    // lattice point inside the box pins its containing cell
    bool inside = true;
    MultiIndex host{};
    for (int i = 0; i < d; ++i) {
      const double t = (c[i] - dom.lo[i]) / dom.h;
      if (t < 0 || t >= static_cast<double>(dom.shape[i])) {
        inside = false;
        break;
      }
      host[i] = static_cast<Index>(std::floor(t));
    }
    if (inside) pinned[dom.linear(host)] = 1;

    int axis = d - 1;
    for (; axis >= 0; --axis) {
      if (++site[axis] <= site_hi[axis]) break;
      site[axis] = site_lo[axis];
    }
    if (axis < 0) break;
  }

  std::vector<Index> out;
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    if (pinned[lin] && dom.active(lin)) out.push_back(lin);
  }
  return out;
}

// Zeroes the field on pinned cells; returns the pinned-cell count.
inline Index apply_pinning(GridFunction& u, const Perforation& P) {
  const auto pins = pinned_cell_indices(u.domain(), P);
  for (Index lin : pins) {
    double* v = u.cell(lin);
    for (int c = 0; c < u.m; ++c) v[c] = 0.0;
  }
  return static_cast<Index>(pins.size());
}

// ---------------------------------------------------------------------------
// Shift machinery. A shift is stored in cell units s with eps*xi = s*h.

inline Index shift_offset(const GridDomain& dom, const int* s) {
  Index off = 0;
  for (int i = 0; i < dom.d; ++i) off += static_cast<Index>(s[i]) * dom.stride[i];
  return off;
}

// A_eps(xi) = { active x : x + eps*xi active }.
inline std::vector<Index> shifted_cells(const GridDomain& dom, const int* s) {
  const int d = dom.d;
  MultiIndex wlo{}, whi{};
  for (int i = 0; i < d; ++i) {
    wlo[i] = std::max<Index>(0, -static_cast<Index>(s[i]));
    whi[i] = std::min<Index>(dom.shape[i], dom.shape[i] - s[i]);
    if (wlo[i] >= whi[i]) return {};
  }
  const Index off = shift_offset(dom, s);
  std::vector<Index> out;
  MultiIndex mi = wlo;
  while (true) {
    const Index lin = dom.linear(mi);
    if (dom.active(lin) && dom.active(lin + off)) out.push_back(lin);
    int axis = d - 1;
    for (; axis >= 0; --axis) {
      if (++mi[axis] < whi[axis]) break;
      mi[axis] = wlo[axis];
    }
    if (axis < 0) break;
  }
  return out;
}

// Checks eps*xi against the cell lattice; returns integer cell shift.
inline std::array<int, kMaxDim> commensurate_shift(const GridDomain& dom, const double* xi,
                                                   double eps) {
  std::array<int, kMaxDim> s{};
  for (int i = 0; i < dom.d; ++i) {
    const double cells = eps * xi[i] / dom.h;
    const double rounded = std::round(cells);
    require(std::abs(cells - rounded) <= 1e-9 * std::max(1.0, std::abs(cells)),
            "shift: eps*xi is not grid-commensurate");
    s[i] = static_cast<int>(rounded);
  }
  return s;
}

// D_eps^xi u on the defined set; exterior extension fills missing endpoints
// when present.
inline GridFunction finite_difference(const GridFunction& u, const double* xi, double eps) {
  const GridDomain& dom = u.domain();
  const auto s = commensurate_shift(dom, xi, eps);
  const Index off = shift_offset(dom, s.data());
  const bool have_ext = u.exterior.has_value();

  GridDomain out_dom = dom;
  out_dom.mask.assign(static_cast<std::size_t>(dom.ncells), 0);
  GridFunction out;
  out.m = u.m;
  out.values.assign(u.values.size(), 0.0);

  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    if (dom.active(lin)) {
      bool partner_in = true;
      for (int i = 0; i < dom.d; ++i) {
        const Index t = mi[i] + s[i];
        if (t < 0 || t >= dom.shape[i]) {
          partner_in = false;
          break;
        }
      }
      const double* here = u.cell(lin);
      const double* there = nullptr;
      if (partner_in && dom.active(lin + off)) {
        there = u.cell(lin + off);
      } else if (have_ext) {
        there = u.exterior->data();
      }
      if (there != nullptr) {
        out_dom.mask[lin] = 1;
        double* dst = out.values.data() + lin * u.m;
        for (int c = 0; c < u.m; ++c) dst[c] = (there[c] - here[c]) / eps;
      }
      // without an exterior value the defined set is exactly A_eps(xi)
    }
    for (int i = dom.d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
  out.dom = std::make_shared<GridDomain>(std::move(out_dom));
  return out;
}

// Mean over a cell set (equal cell volumes).
inline std::vector<double> cell_average(const GridFunction& u, const std::vector<Index>& cells) {
  require(!cells.empty(), "cell_average: empty cell set");
  std::vector<double> mean(static_cast<std::size_t>(u.m), 0.0);
  for (Index lin : cells) {
    const double* v = u.cell(lin);
    for (int c = 0; c < u.m; ++c) mean[c] += v[c];
  }
  for (int c = 0; c < u.m; ++c) mean[c] /= static_cast<double>(cells.size());
  return mean;
}

// (sum h^d |u|^q)^(1/q) over active cells, |.| the euclidean norm on R^m.
inline double lp_norm(const GridFunction& u, double q) {
  require(q >= 1, "lp_norm: q must be >= 1");
  const GridDomain& dom = u.domain();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(dom.ncells));
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    if (!dom.active(lin)) continue;
    const double a = norm_m(u.cell(lin), u.m);
    terms.push_back(std::pow(a, q));
  }
  return std::pow(dom.cell_volume() * pairwise_sum(terms), 1.0 / q);
}

// ---------------------------------------------------------------------------
// Coarsening operator: averages over cubes side*k + [0, side)^d anchored at
// the origin, side = r*eps/sqrt(d+3) snapped to the cell lattice.

struct CoarsenedField {
  GridFunction field;
  double cube_side = 0;   // snapped value actually used
  double requested = 0;   // r*eps/sqrt(d+3) before snapping
};

inline CoarsenedField coarsen(const GridFunction& u, double eps, double r) {
  const GridDomain& dom = u.domain();
  const int d = dom.d;
  const double requested = r * eps / std::sqrt(static_cast<double>(d) + 3.0);
  const double cells = requested / dom.h;
  const Index k = static_cast<Index>(std::llround(cells));
  require(k >= 1, "coarsen: cube side below the cell size");
  const double side = static_cast<double>(k) * dom.h;

  // box corners must sit on the cube lattice for exact cube/cell alignment
  MultiIndex klo{}, khi{};
  for (int i = 0; i < d; ++i) {
    const double t = dom.lo[i] / dom.h;
    require(std::abs(t - std::round(t)) <= 1e-9 * std::max(1.0, std::abs(t)),
            "coarsen: box corner not on the cell lattice");
    klo[i] = static_cast<Index>(std::floor(dom.lo[i] / side + 1e-12));
    khi[i] = static_cast<Index>(std::ceil(dom.hi(i) / side - 1e-12));
  }

  GridDomain cdom;
  cdom.d = d;
  cdom.h = side;
  for (int i = 0; i < d; ++i) {
    cdom.lo[i] = static_cast<double>(klo[i]) * side;
    cdom.shape[i] = khi[i] - klo[i];
  }
  cdom.stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) cdom.stride[i] = cdom.stride[i + 1] * cdom.shape[i + 1];
  cdom.ncells = cdom.stride[0] * cdom.shape[0];

  GridFunction out = make_field(std::make_shared<GridDomain>(cdom), u.m);
  out.exterior = u.exterior;

  std::vector<double> ext(static_cast<std::size_t>(u.m), 0.0);
  if (u.exterior) ext = *u.exterior;

  const double cube_cells = std::pow(static_cast<double>(k), d);
  MultiIndex cmi{};
  for (Index clin = 0; clin < cdom.ncells; ++clin) {
    double* acc = out.cell(clin);
    // fine-cell window of this cube; cube walls sit on cell walls
    MultiIndex flo{}, cnt{};
    for (int i = 0; i < d; ++i) {
      const double x0 = cdom.lo[i] + static_cast<double>(cmi[i]) * side;
      flo[i] = static_cast<Index>(std::llround((x0 - dom.lo[i]) / dom.h));
      cnt[i] = k;
    }
    MultiIndex off{};
    while (true) {
      bool inside = true;
      Index lin = 0;
      for (int i = 0; i < d; ++i) {
        const Index j = flo[i] + off[i];
        if (j < 0 || j >= dom.shape[i]) {
          inside = false;
          break;
        }
        lin += j * dom.stride[i];
      }
      const double* v = (inside && dom.active(lin)) ? u.cell(lin)
                        : (u.exterior ? ext.data() : nullptr);
      require(v != nullptr, "coarsen: cube leaves the domain and no exterior value is set");
      for (int c = 0; c < u.m; ++c) acc[c] += v[c];
      int axis = d - 1;
      for (; axis >= 0; --axis) {
        if (++off[axis] < cnt[axis]) break;
        off[axis] = 0;
      }
      if (axis < 0) break;
    }
    for (int c = 0; c < u.m; ++c) acc[c] /= cube_cells;
    for (int i = d - 1; i >= 0; --i) {
      if (++cmi[i] < cdom.shape[i]) break;
      cmi[i] = 0;
    }
  }
  return CoarsenedField{std::move(out), side, requested};
}

// ---------------------------------------------------------------------------
// Radial truncation: identity inside B_M, zero outside B_RM, linear radial
// interpolation in between. Lipschitz constant <= max(1, RM/(RM-M)).

inline void radial_truncation(const double* z, int m, double M, double RM, double* out) {
  require(1 < M && M < RM, "radial_truncation: need 1 < M < RM");
  const double a = norm_m(z, m);
  double factor = 1.0;
  if (a >= RM) {
    factor = 0.0;
  } else if (a > M) {
    factor = (RM - a) / (RM - M);
  }
  for (int c = 0; c < m; ++c) out[c] = factor * z[c];
}

}  // namespace nlhg

#endif  // NLHG_GRID_HPP

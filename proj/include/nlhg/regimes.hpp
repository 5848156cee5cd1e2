// Scaling-regime classification across the three scales (eps, delta, r_delta),
// limit functionals with capacitary reaction terms, the supercritical
// negligibility bound, and the recovery gluing construction.
#ifndef NLHG_REGIMES_HPP
#define NLHG_REGIMES_HPP

#include <string>
#include <vector>

#include "nlhg/capacity.hpp"
#include "nlhg/homogenize.hpp"

namespace nlhg {

struct PowerLaw {
  double coeff = 1;
  double expo = 1;
  double operator()(double t) const { return coeff * std::pow(t, expo); }
};

// delta = delta_of_eps(eps), r = r_of_delta(delta), with the derived limits
//   beta  = lim r_delta / delta^{d/(d-p)}
//   alpha = lim eps / r_{delta_eps}
// and the two supercritical side conditions.
struct ScalingLaw {
  int d = 0;
  double p = 0;
  PowerLaw delta_of_eps;
  PowerLaw r_of_delta;
  ExtReal beta;
  ExtReal alpha;
  bool cond_a = false;  // limsup r/delta^{d/(d-p)} finite
  bool cond_b = false;  // eps (delta/r)^{d/p} -> infinity
};

inline ScalingLaw make_scaling_law(int d, double p, PowerLaw delta_of_eps,
                                   PowerLaw r_of_delta) {
  require(d >= 2 && p > 1 && p < d, "scaling law: need 1 < p < d");
  require(delta_of_eps.coeff > 0 && delta_of_eps.expo > 0,
          "scaling law: delta(eps) must vanish with eps");
  require(r_of_delta.coeff > 0 && r_of_delta.expo >= 1,
          "scaling law: r(delta) must vanish at least linearly");
  ScalingLaw law;
  law.d = d;
  law.p = p;
  law.delta_of_eps = delta_of_eps;
  law.r_of_delta = r_of_delta;

  const double a = delta_of_eps.expo;
  const double b = r_of_delta.expo;
  const double kappa = static_cast<double>(d) / (d - p);
  const double tol = 1e-12;

  if (b > kappa + tol) {
    law.beta = ExtReal::of(0.0);
  } else if (b >= kappa - tol) {
    law.beta = ExtReal::of(r_of_delta.coeff);
  } else {
    law.beta = ExtReal::infinity();
  }

  // eps / r(delta(eps)) = eps^{1 - a b} / (Cr Cd^b)
  const double e_alpha = 1.0 - a * b;
  const double c_alpha = r_of_delta.coeff * std::pow(delta_of_eps.coeff, b);
  if (e_alpha > tol) {
    law.alpha = ExtReal::of(0.0);
  } else if (e_alpha >= -tol) {
    law.alpha = ExtReal::of(1.0 / c_alpha);
  } else {
    law.alpha = ExtReal::infinity();
  }

  law.cond_a = b >= kappa - tol;
  // eps (delta/r)^{d/p} = eps^{1 - a (b-1) d/p} / Cr^{d/p} -> infinity
  law.cond_b = 1.0 - a * (b - 1.0) * d / p < -tol;

  // numeric probes: declared limits must match the maps
  double probe = 1e-2;
  for (int i = 0; i < 3; ++i, probe *= 0.1) {
    const double delta = delta_of_eps(probe);
    const double r = r_of_delta(delta);
    require(r < delta / 2, "scaling law: perforations touch (r >= delta/2) at probe scale");
    const double beta_probe = r / std::pow(delta, kappa);
    const double alpha_probe = probe / r;
    if (!law.beta.is_inf() && law.beta.value() > 0 && i == 2) {
      require(std::abs(beta_probe - law.beta.value()) <= 0.2 * law.beta.value(),
              "scaling law: beta probe disagrees with the declared limit");
    }
    if (!law.alpha.is_inf() && law.alpha.value() > 0 && i == 2) {
      require(std::abs(alpha_probe - law.alpha.value()) <= 0.2 * law.alpha.value(),
              "scaling law: alpha probe disagrees with the declared limit");
    }
  }
  return law;
}

enum class RegimeTag {
  Unconstrained,
  LocalCapacitary,
  NonlocalCapacitary,
  TrivialCollapse,
  Uncharacterized,
};

inline const char* regime_name(RegimeTag t) {
  switch (t) {
    case RegimeTag::Unconstrained: return "Unconstrained";
    case RegimeTag::LocalCapacitary: return "LocalCapacitary";
    case RegimeTag::NonlocalCapacitary: return "NonlocalCapacitary";
    case RegimeTag::TrivialCollapse: return "TrivialCollapse";
    case RegimeTag::Uncharacterized: return "Uncharacterized";
  }
  return "?";
}

struct RegimeClass {
  RegimeTag tag = RegimeTag::Unconstrained;
  ExtReal alpha;
  ExtReal beta;
};

// Pure function of (alpha, beta, side conditions).
inline RegimeClass classify_regime(const ScalingLaw& law) {
  RegimeClass rc;
  rc.alpha = law.alpha;
  rc.beta = law.beta;
  if (!law.alpha.is_inf()) {
    if (law.beta.is_inf()) {
      rc.tag = RegimeTag::TrivialCollapse;
    } else if (law.beta.value() == 0.0) {
      rc.tag = RegimeTag::Unconstrained;
    } else {
      rc.tag = law.alpha.value() == 0.0 ? RegimeTag::LocalCapacitary
                                        : RegimeTag::NonlocalCapacitary;
    }
  } else {
    rc.tag = (law.cond_a || law.cond_b) ? RegimeTag::Unconstrained
                                        : RegimeTag::Uncharacterized;
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Reaction densities tabulated on sampled data and extended by
// p-homogeneity (and rotational invariance for isotropic kernels).

struct DensityTable {
  double p = 2;
  bool isotropic = true;
  double iso_coeff = 0;
  struct Entry {
    std::vector<double> dir;
    double coeff = 0;
  };
  std::vector<Entry> entries;

  double eval(const double* z, int m) const {
    const double a = norm_m(z, m);
    if (a == 0) return 0;
    if (isotropic || entries.empty()) return iso_coeff * std::pow(a, p);
    double best = -2, coeff = entries.front().coeff;
    for (const auto& e : entries) {
      double c = 0;
      for (int i = 0; i < m; ++i) c += e.dir[i] * z[i];
      c /= a;
      if (c > best) {
        best = c;
        coeff = e.coeff;
      }
    }
    return coeff * std::pow(a, p);
  }
};

inline DensityTable build_density_table(double p, bool isotropic,
                                        const std::vector<std::pair<std::vector<double>, double>>&
                                            samples) {
  DensityTable tab;
  tab.p = p;
  tab.isotropic = isotropic;
  double acc = 0;
  int n = 0;
  for (const auto& [z, value] : samples) {
    const int m = static_cast<int>(z.size());
    const double a = norm_m(z.data(), m);
    if (a <= 0) continue;
    const double coeff = value / std::pow(a, p);
    acc += coeff;
    ++n;
    DensityTable::Entry e;
    e.dir.assign(z.begin(), z.end());
    for (auto& v : e.dir) v /= a;
    e.coeff = coeff;
    tab.entries.push_back(std::move(e));
  }
  tab.iso_coeff = n > 0 ? acc / n : 0.0;
  return tab;
}

// Candidate limit functional per regime: bulk term + beta^{d-p} reaction.
inline EnergyResult limit_functional(const LocalDensity& bulk, const RegimeClass& regime,
                                     const GridFunction& u, const DensityTable* reaction) {
  const GridDomain& dom = u.domain();
  if (regime.tag == RegimeTag::TrivialCollapse) {
    for (double v : u.values) {
      if (v != 0.0) return EnergyResult::infeasible();
    }
    return EnergyResult::of(0.0);
  }
  double total = local_energy(u, bulk);
  if (regime.tag == RegimeTag::LocalCapacitary || regime.tag == RegimeTag::NonlocalCapacitary) {
    require(reaction != nullptr, "limit_functional: missing density table");
    const double factor =
        std::pow(regime.beta.value(), static_cast<double>(dom.d) - bulk.p);
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(dom.ncells));
    for (Index lin = 0; lin < dom.ncells; ++lin) {
      if (!dom.active(lin)) continue;
      terms.push_back(reaction->eval(u.cell(lin), u.m));
    }
    total += factor * dom.cell_volume() * pairwise_sum(terms);
  }
  return EnergyResult::of(total);
}

// ---------------------------------------------------------------------------
// Supercritical negligibility: pinning a smooth field costs at most
// C r^d / (eps^p delta^d) in energy.

struct NegligibilityRow {
  double eps = 0;
  double delta = 0;
  double r = 0;
  double energy_free = 0;
  double energy_pinned = 0;
  double gap = 0;
  double bound = 0;  // r^d / (eps^p delta^d)
  double ratio = 0;  // gap / bound
};

struct NegligibilityTable {
  std::vector<NegligibilityRow> rows;
  double recorded_constant = 0;  // ratio at the first schedule point
  bool bounded_by_first = true;  // later ratios <= recorded constant
  bool scale_stable = true;      // max/min ratio <= 2
};

inline NegligibilityTable negligibility_check(
    const KernelSpec& k, const ScalingLaw& law,
    const std::function<void(const double*, double*)>& field, const GridDomain& omega_box,
    const std::vector<double>& eps_schedule,
    const std::function<double(double eps, double r)>& h_rule) {
  NegligibilityTable table;
  for (double eps : eps_schedule) {
    const double delta = law.delta_of_eps(eps);
    const double r = law.r_of_delta(delta);
    const double h = h_rule(eps, r);

    Coord lo = omega_box.lo, hi{};
    for (int i = 0; i < omega_box.d; ++i) hi[i] = omega_box.hi(i);
    auto dom = std::make_shared<GridDomain>(
        make_box_domain(omega_box.d, lo.data(), hi.data(), h));

    GridFunction u = make_field(dom, k.m);
    fill_field(u, field);
    GridFunction up = u;
    const Perforation P(delta, r);
    apply_pinning(up, P);

    const EnergyParams pp = make_energy_params(*dom, eps, k);
    NegligibilityRow row;
    row.eps = eps;
    row.delta = delta;
    row.r = r;
    row.energy_free = nonlocal_energy(u, k, pp);
    const EnergyResult pe = pinned_energy(up, *dom, k, pp, P);
    row.energy_pinned = pe.value;
    row.gap = row.energy_pinned - row.energy_free;
    row.bound = std::pow(r, k.d) / (std::pow(eps, k.p) * std::pow(delta, k.d));
    row.ratio = row.bound > 0 ? row.gap / row.bound : 0.0;
    table.rows.push_back(row);
  }
  if (!table.rows.empty()) {
    table.recorded_constant = table.rows.front().ratio;
    double lo = table.rows.front().ratio, hi = lo;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      if (table.rows[i].ratio > table.recorded_constant * (1.0 + 1e-12)) {
        table.bounded_by_first = false;
      }
      lo = std::min(lo, table.rows[i].ratio);
      hi = std::max(hi, table.rows[i].ratio);
    }
    if (lo > 0 && hi / lo > 2.0) table.scale_stable = false;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Recovery construction: paste rescaled capacitary minimizers into the
// perforations, with datum the annulus average rho/2 < |x - delta i| < rho,
// rho = delta/8.

struct RecoverySite {
  Coord center{};
  std::vector<double> z;
  double perf_energy = 0;   // F_eps^T(u_j, B_rho(site)) on the parent grid
  double sub_value = 0;     // r^{d-p} * minimized sub-problem energy
  double rel_gap = 0;       // exact rescaling identity residual
};

struct RecoveryResult {
  GridFunction field;
  double total = 0;
  double bulk = 0;
  double perforation = 0;
  double cross = 0;
  std::vector<RecoverySite> sites;
  bool feasible = false;
  double delta = 0, r = 0, rho = 0;
};

inline RecoveryResult recovery_construction(const KernelSpec& k, double delta, double r,
                                            const GridFunction& u, double eps, double T,
                                            const MinimizeOptions& opts = {}) {
  const GridDomain& dom = u.domain();
  const int d = dom.d;
  const int m = u.m;
  const double rho = delta / 8.0;
  require(r < rho / 2, "recovery: need r < rho/2 = delta/16");
  require(eps / dom.h >= 4 - 1e-12 && r / dom.h >= 4 - 1e-12,
          "recovery: unresolvable scales (need eps/h >= 4 and r/h >= 4)");
  {
    const double cells = rho / dom.h;
    require(std::abs(cells - std::round(cells)) <= 1e-9 * cells,
            "recovery: rho = delta/8 must sit on the cell lattice");
  }

  RecoveryResult out;
  out.field = u;
  out.delta = delta;
  out.r = r;
  out.rho = rho;

  // lattice sites whose rho-ball lies strictly inside the box
  std::vector<Coord> sites;
  {
    MultiIndex ilo{}, ihi{};
    for (int i = 0; i < d; ++i) {
      ilo[i] = static_cast<Index>(std::ceil((dom.lo[i] + rho) / delta - 1e-12));
      ihi[i] = static_cast<Index>(std::floor((dom.hi(i) - rho) / delta + 1e-12));
      require(ilo[i] <= ihi[i], "recovery: no perforation site fits in the box");
    }
    MultiIndex it = ilo;
    while (true) {
      Coord c{};
      for (int i = 0; i < d; ++i) c[i] = delta * static_cast<double>(it[i]);
      sites.push_back(c);
      int axis = d - 1;
      for (; axis >= 0; --axis) {
        if (++it[axis] <= ihi[axis]) break;
        it[axis] = ilo[axis];
      }
      if (axis < 0) break;
    }
  }

  const EnergyParams pp = make_energy_params(dom, eps, T, k.support_radius);
  const double scale = r;  // pullback factor
  const EnergyParams sub_pp = rescale_params(pp, scale);  // bitwise-identical lattice
  GridDomain patch_union = dom;  // mask accumulates all pasted patches
  patch_union.mask.assign(static_cast<std::size_t>(dom.ncells), 0);
  std::vector<GridDomain> patches;

  for (const Coord& site : sites) {
    // annulus datum
    std::vector<Index> annulus;
    {
      MultiIndex mi{};
      Coord x{};
      for (Index lin = 0; lin < dom.ncells; ++lin) {
        dom.center(mi, x.data());
        double r2 = 0;
        for (int i = 0; i < d; ++i) r2 += (x[i] - site[i]) * (x[i] - site[i]);
        if (r2 > rho * rho / 4 && r2 < rho * rho && dom.active(lin)) annulus.push_back(lin);
        for (int i = d - 1; i >= 0; --i) {
          if (++mi[i] < dom.shape[i]) break;
          mi[i] = 0;
        }
      }
    }
    const std::vector<double> z = cell_average(u, annulus);

    // sub-problem on the pulled-back ball B_{rho/r}, on the exact pullback
    // of the parent shift lattice
    PhiApproxSolve sub =
        phi_approx_solve(k, eps / scale, T, rho / scale, z, dom.h / scale, opts, &sub_pp);

    // exact index correspondence between the sub-grid and the parent patch
    MultiIndex corner{};
    for (int i = 0; i < d; ++i) {
      const double t = (site[i] - rho - dom.lo[i]) / dom.h;
      require(std::abs(t - std::round(t)) <= 1e-6,
              "recovery: perforation site not aligned with the cell lattice");
      corner[i] = static_cast<Index>(std::llround(t));
    }
    const GridDomain& sdom = *sub.domain;
    GridDomain patch = dom;
    patch.mask.assign(static_cast<std::size_t>(dom.ncells), 0);
    MultiIndex smi{};
    for (Index slin = 0; slin < sdom.ncells; ++slin) {
      if (sdom.active(slin)) {
        Index plin = 0;
        for (int i = 0; i < d; ++i) plin += (corner[i] + smi[i]) * dom.stride[i];
        patch.mask[plin] = 1;
        patch_union.mask[plin] = 1;
        for (int c = 0; c < m; ++c) {
          out.field.values[plin * m + c] = sub.minimizer.values[slin * m + c];
        }
      }
      for (int i = d - 1; i >= 0; --i) {
        if (++smi[i] < sdom.shape[i]) break;
        smi[i] = 0;
      }
    }
    patches.push_back(std::move(patch));

    RecoverySite rec;
    rec.center = site;
    rec.z = z;
    rec.sub_value = std::pow(scale, d - k.p) * sub.result.value;
    out.sites.push_back(std::move(rec));
  }

  // keep the construction feasible: any pinned cell the paste left nonzero
  // (possible only on degenerate cell/sphere alignments) is zeroed
  {
    const Perforation P(delta, r);
    for (Index lin : pinned_cell_indices(dom, P)) {
      for (int c = 0; c < m; ++c) out.field.values[lin * m + c] = 0.0;
    }
  }

  for (std::size_t si = 0; si < out.sites.size(); ++si) {
    RecoverySite& rec = out.sites[si];
    rec.perf_energy = nonlocal_energy(out.field, patches[si], k, pp);
    rec.rel_gap = std::abs(rec.perf_energy - rec.sub_value) /
                  std::max({std::abs(rec.perf_energy), std::abs(rec.sub_value), 1e-300});
  }

  out.total = nonlocal_energy(out.field, dom, k, pp);
  GridDomain complement = dom;
  complement.mask.assign(static_cast<std::size_t>(dom.ncells), 0);
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    complement.mask[lin] = (dom.active(lin) && !patch_union.mask[lin]) ? 1 : 0;
  }
  out.bulk = nonlocal_energy(out.field, complement, k, pp);
  double perf = 0;
  for (const auto& s : out.sites) perf += s.perf_energy;
  out.perforation = perf;
  out.cross = out.total - out.bulk - out.perforation;

  const Perforation P(delta, r);
  const EnergyResult pe = pinned_energy(out.field, dom, k, pp, P);
  out.feasible = pe.feasible;
  return out;
}

}  // namespace nlhg

#endif  // NLHG_REGIMES_HPP

// Batch experiment front-end: wires configurations to the library,
// emits CSV tables, field dumps, and a run manifest.
//
// Exit codes: 0 all asserted invariants passed, 1 invariant violation
// (named in the manifest), 2 invalid configuration, 3 solver failure.
#ifndef NLHG_RUN_HPP
#define NLHG_RUN_HPP

#include <filesystem>
#include <thread>

#include "nlhg/config.hpp"
#include "nlhg/inequalities.hpp"
#include "nlhg/io.hpp"
#include "nlhg/regimes.hpp"
#include "nlhg/version.hpp"

namespace nlhg {

namespace detail {

struct RunContext {
  const RunConfig& cfg;
  std::string outdir;
  std::vector<std::string> notes;
  std::vector<std::string> violations;

  void note(const std::string& s) { notes.push_back(s); }
  void violate(const std::string& name, const std::string& detail) {
    violations.push_back(name + ": " + detail);
  }

  std::string path(const std::string& name) const { return outdir + "/" + name; }

  FieldSink sink(const std::string& prefix) const {
    if (!cfg.dump_fields) return {};
    const std::string dir = outdir;
    return [dir, prefix](const std::string& tag, const GridFunction& u) {
      dump_field(dir + "/" + prefix + "_" + tag + ".nlhg", u);
    };
  }
};

inline KernelSpec make_kernel(const RunConfig& cfg) {
  std::vector<std::pair<std::string, double>> params = {
      {"rho", cfg.rho}, {"c", cfg.c}, {"cprime", cfg.cprime}};
  for (std::size_t i = 0; i < cfg.axis.size(); ++i) {
    params.emplace_back("a" + std::to_string(i + 1), cfg.axis[i]);
  }
  KernelSpec k = builtin_kernel(cfg.family, cfg.d, cfg.m, cfg.p, params);
  if (cfg.normalize) {
    require(k.phom && !k.phom->aniso, "normalize requires an isotropic kernel");
    k = normalize_isotropic(k);
  }
  return k;
}

inline std::vector<double> z_vector(double magnitude, int m) {
  std::vector<double> z(static_cast<std::size_t>(m), 0.0);
  z[0] = magnitude;
  return z;
}

inline MinimizeOptions solver_options(const RunConfig& cfg) {
  MinimizeOptions o;
  o.tol = cfg.tol;
  o.max_iter = cfg.max_iter;
  return o;
}

// detects pairs z_j = t z_i in a magnitude schedule and checks value scaling
inline void check_schedule_homogeneity(RunContext& ctx, const std::string& what, double p,
                                       const std::vector<double>& mags,
                                       const std::vector<double>& values) {
  for (std::size_t i = 0; i < mags.size(); ++i) {
    for (std::size_t j = 0; j < mags.size(); ++j) {
      if (i == j || mags[i] == 0) continue;
      const double t = mags[j] / mags[i];
      if (t <= 0) continue;
      const double predicted = std::pow(t, p) * values[i];
      const double tol = 10 * ctx.cfg.tol * (std::abs(predicted) + std::abs(values[j]) + 1);
      if (std::abs(values[j] - predicted) > tol) {
        ctx.violate(what + "-homogeneity",
                    "value(" + format_double(mags[j]) + ") = " + format_double(values[j]) +
                        " vs " + format_double(predicted) + " predicted from value(" +
                        format_double(mags[i]) + ")");
        return;
      }
    }
  }
}

// ---------------------------------------------------------------------------

inline void cmd_verify_kernel(RunContext& ctx) {
  const KernelSpec k = make_kernel(ctx.cfg);
  const AssumptionReport rep = verify_assumptions(k, ctx.cfg.samples, ctx.cfg.seed);
  CsvWriter csv(ctx.path("kernel_report.csv"),
                {"family", "d", "m", "p", "samples", "homogeneity_max_rel_violation",
                 "envelope_min_short_range", "lambda0", "g0_ok", "g1_integral",
                 "g1_error_estimate", "g1_finite", "lipschitz_constant"});
  csv.row({k.name, CsvWriter::num(k.d), CsvWriter::num(k.m), CsvWriter::num(k.p),
           CsvWriter::num(rep.samples), CsvWriter::num(rep.homogeneity_max_rel_violation),
           CsvWriter::num(rep.envelope_min_short_range), CsvWriter::num(rep.lambda0),
           rep.g0_ok ? "1" : "0", CsvWriter::num(rep.g1_integral),
           CsvWriter::num(rep.g1_error_estimate), rep.g1_finite ? "1" : "0",
           CsvWriter::num(rep.lipschitz_constant)});
  if (rep.homogeneity_max_rel_violation > 1e-9) {
    ctx.violate("kernel-homogeneity",
                "max relative violation " + format_double(rep.homogeneity_max_rel_violation));
  }
  if (!rep.g0_ok) {
    ctx.violate("kernel-G0", "short-range envelope dips below lambda0");
  }
  if (!rep.g1_finite) ctx.violate("kernel-G1", "growth integral not finite");
  ctx.note("lipschitz constant " + format_double(rep.lipschitz_constant));
}

inline void cmd_fhom(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  const std::vector<double> hs = cfg.h_schedule.empty() ? std::vector<double>{cfg.h}
                                                        : cfg.h_schedule;
  std::vector<std::string> header;
  for (int i = 0; i < k.m * k.d; ++i) header.push_back("S" + std::to_string(i + 1));
  for (const char* c : {"R", "h", "value", "grad_norm", "extrapolated", "convex_formula"}) {
    header.push_back(c);
  }
  CsvWriter csv(ctx.path("fhom.csv"), header);

  std::vector<double> extrap_per_mag;
  for (double mag : cfg.z_schedule) {
    std::vector<double> S(static_cast<std::size_t>(k.m) * k.d, 0.0);
    S[0] = mag;  // S = mag * e1 in the first row
    double last_extrap = 0;
    for (double h : hs) {
      const CellProblemResult res =
          fhom_cell_schedule(k, S, cfg.R_schedule, h, solver_options(cfg), ctx.sink("fhom"));
      for (std::size_t i = 0; i < res.per_R_values.size(); ++i) {
        std::vector<std::string> row;
        for (double s : S) row.push_back(CsvWriter::num(s));
        row.push_back(CsvWriter::num(res.R_schedule[i]));
        row.push_back(CsvWriter::num(h));
        row.push_back(CsvWriter::num(res.per_R_values[i]));
        row.push_back(CsvWriter::num(res.grad_norms[i]));
        row.push_back(CsvWriter::num(res.extrapolated));
        row.push_back(res.has_formula ? CsvWriter::num(res.convex_formula_value) : "");
        csv.row(row);
      }
      last_extrap = res.extrapolated;
      if (res.has_formula && res.per_R_values.size() >= 3) {
        const auto gap = [&](std::size_t i) {
          return std::abs(res.per_R_values[i] - res.convex_formula_value);
        };
        if (gap(res.per_R_values.size() - 1) > gap(0)) {
          ctx.violate("fhom-gap-trend", "cell values do not approach the convex formula");
        }
      }
    }
    extrap_per_mag.push_back(last_extrap);
  }
  check_schedule_homogeneity(ctx, "fhom", k.p, cfg.z_schedule, extrap_per_mag);

  const FhomBounds bounds = fhom_bounds(k);
  ctx.note("fhom bounds m0 = " + format_double(bounds.m0) +
           ", M0 = " + format_double(bounds.M0));
}

inline void cmd_phi(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  require(k.phom && !k.phom->aniso,
          "phi: the local density route needs an isotropic kernel");
  const LocalDensity density = pnorm_density(isotropic_dirichlet_constant(k), k.p);

  std::vector<std::string> header;
  for (int i = 0; i < k.m; ++i) header.push_back("z" + std::to_string(i + 1));
  for (const char* c : {"R", "value", "grad_norm", "fit_tail", "fit_plain"}) {
    header.push_back(c);
  }
  CsvWriter csv(ctx.path("phi.csv"), header);

  std::vector<double> extrap;
  for (double mag : cfg.z_schedule) {
    const std::vector<double> z = z_vector(mag, k.m);
    const CapacitaryResult res = phi_local(density, k.d, z, cfg.R_schedule, cfg.h,
                                           solver_options(cfg),
                                           ctx.sink("phi_z" + format_double(mag)));
    for (std::size_t i = 0; i < res.schedule_values.size(); ++i) {
      std::vector<std::string> row;
      for (double zc : z) row.push_back(CsvWriter::num(zc));
      row.push_back(CsvWriter::num(res.schedule_R[i]));
      row.push_back(CsvWriter::num(res.schedule_values[i]));
      row.push_back(CsvWriter::num(res.grad_norm));
      row.push_back(CsvWriter::num(res.fit_tail));
      row.push_back(CsvWriter::num(res.fit_plain));
      csv.row(row);
    }
    if (!res.monotone && mag != 0) {
      ctx.violate("phi-R-monotonicity",
                  "schedule not nonincreasing at z = " + format_double(mag));
    }
    extrap.push_back(res.value);
  }
  check_schedule_homogeneity(ctx, "phi", k.p, cfg.z_schedule, extrap);
}

inline void cmd_phi_nl(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  const double alpha = cfg.eps_schedule.front();

  std::vector<std::string> header;
  for (int i = 0; i < k.m; ++i) header.push_back("z" + std::to_string(i + 1));
  for (const char* c : {"T", "R", "value", "grad_norm", "limit_estimate"}) {
    header.push_back(c);
  }
  CsvWriter csv(ctx.path("phinl.csv"), header);

  for (double mag : cfg.z_schedule) {
    const std::vector<double> z = z_vector(mag, k.m);
    std::vector<double> limits;
    for (double T : cfg.T_schedule) {
      const CapacitaryResult res =
          phi_nonlocal(k, alpha, T, z, cfg.R_schedule, cfg.h, solver_options(cfg),
                       ctx.sink("phinl_z" + format_double(mag) + "_T" + format_double(T)));
      for (std::size_t i = 0; i < res.schedule_values.size(); ++i) {
        std::vector<std::string> row;
        for (double zc : z) row.push_back(CsvWriter::num(zc));
        row.push_back(CsvWriter::num(T));
        row.push_back(CsvWriter::num(res.schedule_R[i]));
        row.push_back(CsvWriter::num(res.schedule_values[i]));
        row.push_back(CsvWriter::num(res.grad_norm));
        row.push_back(CsvWriter::num(res.value));
        csv.row(row);
      }
      if (!res.monotone && mag != 0) {
        ctx.violate("phinl-R-monotonicity", "schedule not nonincreasing at T = " +
                                                format_double(T));
      }
      limits.push_back(res.value);
    }
    for (std::size_t i = 1; i < limits.size(); ++i) {
      const double tol = 10 * cfg.tol * (std::abs(limits[i]) + 1);
      if (cfg.T_schedule[i] >= cfg.T_schedule[i - 1] && limits[i] < limits[i - 1] - tol) {
        ctx.violate("phinl-T-monotonicity", "limit estimates not nondecreasing in T");
      }
    }
  }
}

inline void cmd_capterm(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  require(k.phom && !k.phom->aniso, "capterm: needs an isotropic kernel");
  require(cfg.eps_schedule.size() == cfg.R_schedule.size(),
          "capterm: eps and R schedules must pair up");
  const double T = cfg.T_schedule.front();
  const std::vector<double> z = z_vector(cfg.z_schedule.front(), k.m);

  // phi^T from the truncated kernel through the local route
  const KernelSpec kT = truncate_kernel(k, T);
  const LocalDensity densityT = pnorm_density(isotropic_dirichlet_constant(kT), k.p);
  std::vector<double> localR = {4.0, 6.0, 8.0};
  const CapacitaryResult phiT =
      phi_local(densityT, k.d, z, localR, cfg.h, solver_options(cfg));

  std::vector<CaptermPoint> schedule;
  for (std::size_t i = 0; i < cfg.eps_schedule.size(); ++i) {
    CaptermPoint pt;
    pt.eps = cfg.eps_schedule[i];
    pt.R = cfg.R_schedule[i];
    const double target = pt.eps / static_cast<double>(cfg.eps_over_h);
    const double cells = std::max(1.0, std::round(2.0 * pt.R / target));
    pt.h = 2.0 * pt.R / cells;
    schedule.push_back(pt);
  }
  const CaptermTable table = capterm_convergence(k, T, z, schedule, phiT.value,
                                                 solver_options(cfg), ctx.sink("capterm"));

  CsvWriter csv(ctx.path("capterm.csv"),
                {"eps", "R", "h", "value", "phiT", "gap", "under_resolved"});
  for (const auto& row : table.rows) {
    csv.row({CsvWriter::num(row.eps), CsvWriter::num(row.R), CsvWriter::num(row.h),
             CsvWriter::num(row.value), CsvWriter::num(table.phiT), CsvWriter::num(row.gap),
             row.under_resolved ? "1" : "0"});
    if (row.under_resolved) {
      ctx.note("under-resolved point at eps = " + format_double(row.eps));
    }
  }
  if (!table.gaps_decreasing_last3) {
    ctx.violate("capterm-gap-trend", "gaps do not decrease over the last three points");
  }
}

inline void cmd_gns(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require(cfg.p < cfg.d, "gns-suite: needs p < d");
  auto dom = std::make_shared<GridDomain>(
      make_cube_domain(cfg.d, 0.5 * (cfg.box_hi - cfg.box_lo), cfg.h));
  const auto corpus = make_inequality_corpus(dom, cfg.m, 32, cfg.seed);

  CsvWriter csv(ctx.path("gns.csv"), {"corpus_id", "eps", "lhs", "rhs_raw", "ratio"});
  CsvWriter pwcsv(ctx.path("pw.csv"), {"corpus_id", "eps", "lhs", "rhs_raw", "ratio"});

  // Poincare-Wirtinger geometry: A = box, E = central ball of half radius
  const double half = 0.5 * (cfg.box_hi - cfg.box_lo);
  std::vector<Index> E;
  {
    MultiIndex mi{};
    Coord x{};
    for (Index lin = 0; lin < dom->ncells; ++lin) {
      dom->center(mi, x.data());
      if (norm_m(x.data(), cfg.d) < 0.5 * half) E.push_back(lin);
      for (int i = cfg.d - 1; i >= 0; --i) {
        if (++mi[i] < dom->shape[i]) break;
        mi[i] = 0;
      }
    }
  }

  std::vector<double> max_ratio_gns, max_ratio_pw;
  for (double eps : cfg.eps_schedule) {
    double worst_gns = 0, worst_pw = 0;
    for (const auto& cf : corpus) {
      const InequalityReport rep = gns_check(cf.u, eps, cfg.r_short, cfg.p, cf.id);
      csv.row({rep.corpus_id, CsvWriter::num(rep.eps), CsvWriter::num(rep.lhs),
               CsvWriter::num(rep.rhs_raw), CsvWriter::num(rep.ratio)});
      worst_gns = std::max(worst_gns, rep.ratio);

      const InequalityReport pw = pw_check(cf.u, *dom, E, eps, cfg.r_short, cfg.p, 1.0, cf.id);
      pwcsv.row({pw.corpus_id, CsvWriter::num(pw.eps), CsvWriter::num(pw.lhs),
                 CsvWriter::num(pw.rhs_raw), CsvWriter::num(pw.ratio)});
      worst_pw = std::max(worst_pw, pw.ratio);
    }
    max_ratio_gns.push_back(worst_gns);
    max_ratio_pw.push_back(worst_pw);
    ctx.note("eps " + format_double(eps) + ": corpus-max GNS ratio " +
             format_double(worst_gns) + ", PW ratio " + format_double(worst_pw));
  }

  auto stable = [](const std::vector<double>& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return lo > 0 && hi / lo < 2.0;
  };
  if (!stable(max_ratio_gns)) {
    ctx.violate("gns-eps-stability", "corpus-max ratios vary by a factor >= 2");
  }
  if (!stable(max_ratio_pw)) {
    ctx.violate("pw-eps-stability", "corpus-max ratios vary by a factor >= 2");
  }

  // exact scale invariance of the ratio on one corpus field
  {
    GridFunction scaled = corpus.front().u;
    for (auto& v : scaled.values) v *= 2.0;
    const double e0 = cfg.eps_schedule.front();
    const InequalityReport a = gns_check(corpus.front().u, e0, cfg.r_short, cfg.p);
    const InequalityReport b = gns_check(scaled, e0, cfg.r_short, cfg.p);
    if (std::abs(a.ratio - b.ratio) > 1e-12 * (std::abs(a.ratio) + 1e-30)) {
      ctx.violate("gns-scale-invariance", "ratio moved under field scaling");
    }
  }
}

inline void cmd_regime_sweep(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const int d = cfg.d;
  const double p = cfg.p;
  const double kappa = static_cast<double>(d) / (d - p);

  struct Fixture {
    std::string name;
    PowerLaw de, rd;
    RegimeTag expected;
  };
  std::vector<Fixture> fixtures = {
      {"critical-slow-eps", PowerLaw{1.0, 1.0 / (2 * kappa)}, PowerLaw{1.0, kappa},
       RegimeTag::LocalCapacitary},
      {"critical-matched-eps", PowerLaw{1.0, 1.0 / kappa}, PowerLaw{1.0, kappa},
       RegimeTag::NonlocalCapacitary},
      {"subcritical-radius", PowerLaw{1.0, 1.0 / (kappa + 1)}, PowerLaw{1.0, kappa + 1},
       RegimeTag::Unconstrained},
      {"supercritical-radius", PowerLaw{4.0, 1.0}, PowerLaw{0.25, 1.0},
       RegimeTag::TrivialCollapse},
      {"fast-radius-slow-eps", PowerLaw{1.0, 1.0}, PowerLaw{1.0, kappa},
       RegimeTag::Unconstrained},
      {"uncharacterized-corner", PowerLaw{1.0, 1.0}, PowerLaw{1.0, 1.0 + p / (2 * d)},
       RegimeTag::Uncharacterized},
  };

  CsvWriter csv(ctx.path("regimes.csv"),
                {"name", "delta_coeff", "delta_expo", "r_coeff", "r_expo", "alpha", "beta",
                 "cond_a", "cond_b", "tag", "expected", "match"});
  auto ext_str = [](const ExtReal& e) {
    return e.is_inf() ? std::string("inf") : format_double(e.value());
  };
  for (const auto& f : fixtures) {
    const ScalingLaw law = make_scaling_law(d, p, f.de, f.rd);
    const RegimeClass rc = classify_regime(law);
    const bool match = rc.tag == f.expected;
    csv.row({f.name, CsvWriter::num(f.de.coeff), CsvWriter::num(f.de.expo),
             CsvWriter::num(f.rd.coeff), CsvWriter::num(f.rd.expo), ext_str(rc.alpha),
             ext_str(rc.beta), law.cond_a ? "1" : "0", law.cond_b ? "1" : "0",
             regime_name(rc.tag), regime_name(f.expected), match ? "1" : "0"});
    if (!match) {
      ctx.violate("regime-" + f.name, std::string("classified ") + regime_name(rc.tag) +
                                          ", expected " + regime_name(f.expected));
    }
  }
  if (cfg.law_set) {
    const ScalingLaw law = make_scaling_law(
        d, p, PowerLaw{cfg.delta_coeff, cfg.delta_expo}, PowerLaw{cfg.r_coeff, cfg.r_expo});
    const RegimeClass rc = classify_regime(law);
    csv.row({"config", CsvWriter::num(cfg.delta_coeff), CsvWriter::num(cfg.delta_expo),
             CsvWriter::num(cfg.r_coeff), CsvWriter::num(cfg.r_expo), ext_str(rc.alpha),
             ext_str(rc.beta), law.cond_a ? "1" : "0", law.cond_b ? "1" : "0",
             regime_name(rc.tag), "", ""});
    ctx.note(std::string("config law classified as ") + regime_name(rc.tag));
  }
}

inline void cmd_recovery(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  require(cfg.delta > 0 && cfg.r > 0, "recovery: geometry.delta and geometry.r required");
  const double eps = cfg.eps_schedule.front();
  const double T = cfg.T_schedule.front();

  auto dom = std::make_shared<GridDomain>(make_cube_domain(k.d, cfg.delta / 2, cfg.h));
  GridFunction u = make_field(dom, k.m);
  const std::vector<double> z = z_vector(cfg.z_schedule.front(), k.m);
  set_constant(u, z.data());

  const RecoveryResult res =
      recovery_construction(k, cfg.delta, cfg.r, u, eps, T, solver_options(cfg));
  if (cfg.dump_fields) dump_field(ctx.path("recovery_field.nlhg"), res.field);

  std::vector<std::string> header = {"site"};
  for (int i = 0; i < k.m; ++i) header.push_back("z" + std::to_string(i + 1));
  for (const char* c : {"perf_energy", "sub_value", "rel_gap"}) header.push_back(c);
  CsvWriter csv(ctx.path("recovery.csv"), header);
  double worst_gap = 0;
  for (std::size_t i = 0; i < res.sites.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i)};
    for (double zc : res.sites[i].z) row.push_back(CsvWriter::num(zc));
    row.push_back(CsvWriter::num(res.sites[i].perf_energy));
    row.push_back(CsvWriter::num(res.sites[i].sub_value));
    row.push_back(CsvWriter::num(res.sites[i].rel_gap));
    csv.row(row);
    worst_gap = std::max(worst_gap, res.sites[i].rel_gap);
  }
  CsvWriter brk(ctx.path("recovery_breakdown.csv"),
                {"total", "bulk", "perforation", "cross", "feasible", "delta", "r", "rho"});
  brk.row({CsvWriter::num(res.total), CsvWriter::num(res.bulk),
           CsvWriter::num(res.perforation), CsvWriter::num(res.cross),
           res.feasible ? "1" : "0", CsvWriter::num(res.delta), CsvWriter::num(res.r),
           CsvWriter::num(res.rho)});

  if (!res.feasible) ctx.violate("recovery-feasibility", "pinning constraint violated");
  if (worst_gap > 1e-9) {
    ctx.violate("recovery-identity",
                "rescaling identity residual " + format_double(worst_gap));
  }
}

inline void cmd_negligibility(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const KernelSpec k = make_kernel(cfg);
  require(cfg.law_set, "negligibility: [law] section required");
  const ScalingLaw law = make_scaling_law(
      k.d, k.p, PowerLaw{cfg.delta_coeff, cfg.delta_expo}, PowerLaw{cfg.r_coeff, cfg.r_expo});
  const RegimeClass rc = classify_regime(law);
  require(law.alpha.is_inf() && rc.tag == RegimeTag::Unconstrained,
          "negligibility: law must fall in the supercritical unconstrained regime");

  const GridDomain box =
      make_cube_domain(k.d, 0.5 * (cfg.box_hi - cfg.box_lo), cfg.box_hi - cfg.box_lo);
  const double L = cfg.box_hi - cfg.box_lo;
  auto h_rule = [L](double, double r) {
    const double target = r / 4.0;
    const double n = std::min(4096.0, std::max(8.0, std::ceil(L / target)));
    return L / n;
  };

  struct Field {
    std::string name;
    std::function<void(const double*, double*)> f;
  };
  const int m = k.m;
  std::vector<Field> fields = {
      {"constant",
       [m](const double*, double* v) {
         for (int c = 0; c < m; ++c) v[c] = c == 0 ? 1.0 : 0.0;
       }},
      {"smooth",
       [m, L](const double* x, double* v) {
         double s = 1.0;
         for (int i = 0; i < 2; ++i) s *= 1.0 + 0.5 * std::sin(2 * 3.14159265358979 * x[i] / L);
         for (int c = 0; c < m; ++c) v[c] = c == 0 ? s : 0.0;
       }},
  };

  CsvWriter csv(ctx.path("negligibility.csv"),
                {"field", "eps", "delta", "r", "energy_free", "energy_pinned", "gap", "bound",
                 "ratio"});
  for (const auto& fld : fields) {
    const NegligibilityTable table =
        negligibility_check(k, law, fld.f, box, cfg.eps_schedule, h_rule);
    for (const auto& row : table.rows) {
      csv.row({fld.name, CsvWriter::num(row.eps), CsvWriter::num(row.delta),
               CsvWriter::num(row.r), CsvWriter::num(row.energy_free),
               CsvWriter::num(row.energy_pinned), CsvWriter::num(row.gap),
               CsvWriter::num(row.bound), CsvWriter::num(row.ratio)});
    }
    ctx.note("field " + fld.name + ": recorded constant " +
             format_double(table.recorded_constant));
    if (!table.bounded_by_first) {
      ctx.violate("negligibility-bound",
                  "gap exceeds the first-point constant times the bound (" + fld.name + ")");
    }
    if (!table.scale_stable) {
      ctx.violate("negligibility-stability", "gap/bound ratio varies by a factor >= 2 (" +
                                                 fld.name + ")");
    }
  }
}

}  // namespace detail

inline int run(const RunConfig& cfg) {
  detail::RunContext ctx{cfg, cfg.output_dir, {}, {}};
  int status = 0;
  std::string error;

  try {
    std::filesystem::create_directories(cfg.output_dir);
    int workers = cfg.threads;
    if (cfg.deterministic) {
      workers = 1;
    } else if (workers == 0) {
      workers = static_cast<int>(std::thread::hardware_concurrency());
      if (workers < 1) workers = 1;
    }
    set_worker_count(workers);

    if (cfg.command == "verify-kernel") detail::cmd_verify_kernel(ctx);
    else if (cfg.command == "fhom") detail::cmd_fhom(ctx);
    else if (cfg.command == "phi") detail::cmd_phi(ctx);
    else if (cfg.command == "phi-nl") detail::cmd_phi_nl(ctx);
    else if (cfg.command == "capterm") detail::cmd_capterm(ctx);
    else if (cfg.command == "gns-suite") detail::cmd_gns(ctx);
    else if (cfg.command == "regime-sweep") detail::cmd_regime_sweep(ctx);
    else if (cfg.command == "recovery") detail::cmd_recovery(ctx);
    else if (cfg.command == "negligibility") detail::cmd_negligibility(ctx);
    else throw ConfigError("unknown command '" + cfg.command + "'");
  } catch (const ConfigError& e) {
    status = 2;
    error = e.what();
  } catch (const std::invalid_argument& e) {
    status = 2;
    error = e.what();
  } catch (const SolverFailure& e) {
    status = 3;
    error = e.what();
  } catch (const std::exception& e) {
    status = 3;
    error = e.what();
  }

  if (status == 0 && !ctx.violations.empty()) status = 1;

  try {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream man(cfg.output_dir + "/manifest.txt");
    man << "nlhg " << kVersion << "\n";
    man << "status " << status << "\n";
    if (!error.empty()) man << "error " << error << "\n";
    man << "[config]\n";
    for (const auto& [k, v] : cfg.echo()) man << k << " = " << v << "\n";
    man << "[notes]\n";
    for (const auto& n : ctx.notes) man << n << "\n";
    man << "[violations]\n";
    for (const auto& v : ctx.violations) man << v << "\n";
  } catch (const std::exception&) {
    // manifest failure must not mask the run status
  }
  return status;
}

inline int run_config_text(const std::string& text) { return run(parse_config(text)); }

}  // namespace nlhg

#endif  // NLHG_RUN_HPP

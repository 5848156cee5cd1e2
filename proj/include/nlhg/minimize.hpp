// Constrained minimization of the discrete energies. Frozen cells are
// eliminated (their gradient components are zeroed and steps never move
// them), not penalized. Quadratic objectives run matrix-free conjugate
// gradients; everything else runs a spectral projected gradient method with
// a nonmonotone line search, with mu-continuation for 1 < p < 2.
#ifndef NLHG_MINIMIZE_HPP
#define NLHG_MINIMIZE_HPP

#include <deque>
#include <functional>
#include <vector>

#include "nlhg/energy.hpp"
#include "nlhg/grid.hpp"

namespace nlhg {

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstraintMask {
  std::vector<std::uint8_t> frozen;  // per cell
  std::vector<double> values;        // ncells * m; meaningful on frozen cells

  static ConstraintMask none(const GridDomain& dom, int m) {
    ConstraintMask c;
    c.frozen.assign(static_cast<std::size_t>(dom.ncells), 0);
    c.values.assign(static_cast<std::size_t>(dom.ncells) * m, 0.0);
    return c;
  }

  void freeze(Index lin, const double* z, int m) {
    frozen[lin] = 1;
    for (int c = 0; c < m; ++c) values[lin * m + c] = z[c];
  }

  Index frozen_count() const {
    Index n = 0;
    for (auto f : frozen) n += (f != 0);
    return n;
  }
};

// Freezes every active cell whose center satisfies pred to value(x).
template <class Pred, class Value>
inline void freeze_where(ConstraintMask& mask, const GridDomain& dom, int m, Pred&& pred,
                         Value&& value) {
  Coord x{};
  MultiIndex mi{};
  std::vector<double> z(static_cast<std::size_t>(m));
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    dom.center(mi, x.data());
    if (dom.active(lin) && pred(x.data())) {
      value(x.data(), z.data());
      mask.freeze(lin, z.data(), m);
    }
    for (int i = dom.d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
}

struct SolveReport {
  double objective = 0;
  double grad_norm = 0;  // normalized projected-gradient measure at exit
  int iterations = 0;
  std::vector<double> mu_path;
  std::vector<double> stage_objectives;  // true (mu = 0) energy per stage
  bool converged = false;
};

struct Objective {
  std::function<double(const GridFunction&, double mu)> value;
  std::function<GridFunction(const GridFunction&, double mu,
                             const std::vector<std::uint8_t>* frozen)>
      gradient;
  // tangent quadratic majorant at a reference field, when the energy has
  // the separable power form; drives the reweighted solver for p < 2
  std::function<Objective(const GridFunction& uref, double mu)> reweighted;
  double degree = 2;  // p-homogeneity degree; enters the stopping rule
  bool quadratic = false;
  bool convex = true;
};

struct MinimizeOptions {
  double tol = 1e-6;
  int max_iter = 20000;
  double clamp_radius = 0;           // 0 = off; else per-cell |u| <= radius
  std::vector<double> mu_schedule;   // empty => automatic (only p < 2 needs one)
};

struct MinimizeResult {
  GridFunction u;
  SolveReport report;
};

namespace detail {

inline void apply_constraints(GridFunction& u, const ConstraintMask& mask) {
  const Index n = u.domain().ncells;
  for (Index lin = 0; lin < n; ++lin) {
    if (mask.frozen[lin]) {
      for (int c = 0; c < u.m; ++c) u.values[lin * u.m + c] = mask.values[lin * u.m + c];
    }
  }
}

inline void clamp_cells(GridFunction& u, const ConstraintMask& mask, double radius) {
  if (radius <= 0) return;
  const Index n = u.domain().ncells;
  for (Index lin = 0; lin < n; ++lin) {
    if (mask.frozen[lin]) continue;
    double* v = u.cell(lin);
    const double a = norm_m(v, u.m);
    if (a > radius) {
      const double f = radius / a;
      for (int c = 0; c < u.m; ++c) v[c] *= f;
    }
  }
}

inline double vec_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Normalized stationarity measure: for p-homogeneous energies
// <g, u> = p E at the unconstrained field, so ||g|| ~ p|E| / ||u|| sets the
// natural gradient scale. The measure depends only on the current state, so
// restarting from a converged point reports convergence immediately.
inline double stationarity(double gnorm, double unorm, double degree, double energy) {
  return gnorm * std::max(unorm, 1e-30) / (degree * std::abs(energy) + 1e-300);
}

// Matrix-free CG on the free coordinates; gradient must be affine in u.
// Inner rounds run on the residual recurrence; each round ends with a fresh
// gradient, and the solve restarts if the authoritative measure disagrees.
inline SolveReport solve_cg(const Objective& obj, const ConstraintMask& mask,
                            GridFunction& u, const MinimizeOptions& opts) {
  SolveReport rep;
  rep.mu_path = {0.0};
  int total_it = 0;

  for (int round = 0; round < 6; ++round) {
    double energy = obj.value(u, 0.0);
    if (!std::isfinite(energy)) throw SolverFailure("cg: non-finite objective");
    GridFunction grad = obj.gradient(u, 0.0, &mask.frozen);
    const double measure =
        stationarity(vec_norm(grad.values), vec_norm(u.values), obj.degree, energy);
    rep.objective = energy;
    rep.grad_norm = measure;
    rep.iterations = total_it;
    if (measure <= opts.tol || total_it >= opts.max_iter) {
      rep.converged = measure <= opts.tol;
      return rep;
    }

    // target ||r|| for this round, from the current stationarity scale
    const double target =
        0.5 * opts.tol * (obj.degree * std::abs(energy) + 1e-300) /
        std::max(vec_norm(u.values), 1e-30);

    std::vector<double> r(grad.values.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = -grad.values[i];
    std::vector<double> p = r;
    double rho = vec_dot(r, r);
    GridFunction probe = u;

    while (total_it < opts.max_iter && std::sqrt(rho) > target) {
      // A p = grad(u + p) - grad(u), exact for affine gradients
      for (std::size_t i = 0; i < probe.values.size(); ++i) {
        probe.values[i] = u.values[i] + p[i];
      }
      GridFunction gp = obj.gradient(probe, 0.0, &mask.frozen);
      std::vector<double>& Ap = gp.values;
      for (std::size_t i = 0; i < Ap.size(); ++i) Ap[i] -= grad.values[i];

      const double pAp = vec_dot(p, Ap);
      if (!(pAp > 0) || !std::isfinite(pAp)) break;  // flat or indefinite direction
      const double alpha = rho / pAp;
      for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] += alpha * p[i];
      for (std::size_t i = 0; i < r.size(); ++i) {
        grad.values[i] += alpha * Ap[i];
        r[i] = -grad.values[i];
      }
      const double rho_new = vec_dot(r, r);
      const double beta = rho_new / rho;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
      rho = rho_new;
      ++total_it;
    }
  }

  const double energy = obj.value(u, 0.0);
  GridFunction grad = obj.gradient(u, 0.0, &mask.frozen);
  rep.objective = energy;
  rep.grad_norm = stationarity(vec_norm(grad.values), vec_norm(u.values), obj.degree, energy);
  rep.iterations = total_it;
  rep.converged = rep.grad_norm <= opts.tol;
  return rep;
}

// Reweighted least squares for p < 2: each outer step minimizes the
// tangent quadratic majorant at the current iterate with the fast CG,
// which drives the smoothed energy down monotonically.
inline StageResult irls_stage(const Objective& obj, const ConstraintMask& mask,
                              GridFunction& u, double mu, double tol, int budget,
                              double clamp_radius) {
  StageResult out;
  for (int outer = 0; outer < 100 && out.iterations < budget; ++outer) {
    const double energy = obj.value(u, mu);
    if (!std::isfinite(energy)) throw SolverFailure("irls: non-finite objective");
    GridFunction grad = obj.gradient(u, mu, &mask.frozen);
    out.measure = stationarity(vec_norm(grad.values), vec_norm(u.values), obj.degree, energy);
    ++out.iterations;
    if (out.measure <= tol) {
      out.converged = true;
      return out;
    }

    const Objective q = obj.reweighted(u, mu);
    MinimizeOptions inner;
    inner.tol = std::max(tol * 0.1, 1e-10);
    inner.max_iter = std::min(600, std::max(1, budget - out.iterations));
    const SolveReport inner_rep = solve_cg(q, mask, u, inner);
    out.iterations += inner_rep.iterations;
    if (clamp_radius > 0) clamp_cells(u, mask, clamp_radius);
    if (inner_rep.iterations == 0 && !inner_rep.converged) break;  // no progress path
  }
  return out;
}

// L-BFGS stage driver for the smooth (mu-regularized) problems. Frozen
// coordinates stay put because their gradient components are zeroed; the
// clamp is applied as a projection inside the line search and any clamped
// step is excluded from the curvature memory.
struct StageResult {
  int iterations = 0;
  bool converged = false;
  double measure = 0;
};

inline StageResult lbfgs_stage(const Objective& obj, const ConstraintMask& mask,
                               GridFunction& u, double mu, double tol, int budget,
                               double clamp_radius, double degree) {
  StageResult out;
  if (budget <= 0) return out;
  double energy = obj.value(u, mu);
  if (!std::isfinite(energy)) throw SolverFailure("lbfgs: non-finite objective");
  GridFunction grad = obj.gradient(u, mu, &mask.frozen);

  constexpr int kMem = 8;
  std::vector<std::vector<double>> S, Y;
  std::vector<double> rho_mem;
  int fails = 0;

  const std::size_t n = grad.values.size();
  std::vector<double> d(n);
  while (out.iterations < budget) {
    const double gnorm = vec_norm(grad.values);
    out.measure = stationarity(gnorm, vec_norm(u.values), degree, energy);
    if (out.measure <= tol) {
      out.converged = true;
      return out;
    }

    // two-loop recursion
    for (std::size_t i = 0; i < n; ++i) d[i] = -grad.values[i];
    std::vector<double> acoef(S.size());
    for (int j = static_cast<int>(S.size()) - 1; j >= 0; --j) {
      acoef[j] = rho_mem[j] * vec_dot(S[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= acoef[j] * Y[j][i];
    }
    if (!S.empty()) {
      const double yy = vec_dot(Y.back(), Y.back());
      const double sy = vec_dot(S.back(), Y.back());
      const double h0 = (yy > 0) ? sy / yy : 1.0;
      for (std::size_t i = 0; i < n; ++i) d[i] *= h0;
    } else {
      const double h0 = 1.0 / std::max(gnorm, 1e-12);
      for (std::size_t i = 0; i < n; ++i) d[i] *= h0;
    }
    for (std::size_t j = 0; j < S.size(); ++j) {
      const double b = rho_mem[j] * vec_dot(Y[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (acoef[j] - b) * S[j][i];
    }

    double gd = vec_dot(grad.values, d);
    if (!(gd < 0)) {  // bad curvature model: restart from steepest descent
      S.clear();
      Y.clear();
      rho_mem.clear();
      const double h0 = 1.0 / std::max(gnorm, 1e-12);
      for (std::size_t i = 0; i < n; ++i) d[i] = -h0 * grad.values[i];
      gd = vec_dot(grad.values, d);
      if (!(gd < 0)) return out;  // stationary to rounding: let the caller decide
    }

    GridFunction next = u;
    double t = 1.0, enew = 0;
    bool ok = false, clamped = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t i = 0; i < n; ++i) next.values[i] = u.values[i] + t * d[i];
      if (clamp_radius > 0) {
        clamp_cells(next, mask, clamp_radius);
        clamped = false;
        for (std::size_t i = 0; i < n && !clamped; ++i) {
          clamped = next.values[i] != u.values[i] + t * d[i];
        }
      }
      enew = obj.value(next, mu);
      if (std::isfinite(enew) && enew <= energy + 1e-4 * t * gd) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    ++out.iterations;
    if (!ok) {
      if (!S.empty()) {  // drop the memory and retry from steepest descent
        S.clear();
        Y.clear();
        rho_mem.clear();
        continue;
      }
      if (++fails > 3) return out;  // caller falls back to the projected loop
      continue;
    }
    fails = 0;

    GridFunction gnew = obj.gradient(next, mu, &mask.frozen);
    if (!clamped) {
      std::vector<double> svec(n), yvec(n);
      double sy = 0, snorm2 = 0, ynorm2 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        svec[i] = next.values[i] - u.values[i];
        yvec[i] = gnew.values[i] - grad.values[i];
        sy += svec[i] * yvec[i];
        snorm2 += svec[i] * svec[i];
        ynorm2 += yvec[i] * yvec[i];
      }
      if (sy > 1e-12 * std::sqrt(snorm2 * ynorm2)) {
        S.push_back(std::move(svec));
        Y.push_back(std::move(yvec));
        rho_mem.push_back(1.0 / sy);
        if (static_cast<int>(S.size()) > kMem) {
          S.erase(S.begin());
          Y.erase(Y.begin());
          rho_mem.erase(rho_mem.begin());
        }
      }
    }
    u = std::move(next);
    grad = std::move(gnew);
    energy = enew;
  }
  return out;
}

// Spectral projected gradient with a nonmonotone (GLL) line search;
// stages are driven by L-BFGS first, with this loop as the fallback.
inline SolveReport solve_spg(const Objective& obj, const ConstraintMask& mask,
                             GridFunction& u, const MinimizeOptions& opts,
                             const std::vector<double>& mu_schedule) {
  SolveReport rep;
  rep.mu_path = mu_schedule;
  int total_it = 0;
  double measure_out = 0;
  double energy = 0;
  bool converged = false;

  for (std::size_t stage = 0; stage < mu_schedule.size(); ++stage) {
    const double mu = mu_schedule[stage];
    const bool final_stage = stage + 1 == mu_schedule.size();
    const double stage_tol = final_stage ? opts.tol : std::max(opts.tol * 10.0, 1e-5);
    const int stage_budget =
        final_stage ? opts.max_iter : std::min(total_it + 600, opts.max_iter);

    if (obj.reweighted) {
      const StageResult sr = irls_stage(obj, mask, u, mu, stage_tol,
                                        stage_budget - total_it, opts.clamp_radius);
      total_it += sr.iterations;
      measure_out = sr.measure;
      converged = sr.converged;
      if (sr.converged || total_it >= stage_budget) {
        rep.stage_objectives.push_back(obj.value(u, 0.0));
        continue;
      }
    }
    {
      const StageResult sr = lbfgs_stage(obj, mask, u, mu, stage_tol,
                                         stage_budget - total_it, opts.clamp_radius,
                                         obj.degree);
      total_it += sr.iterations;
      measure_out = sr.measure;
      converged = sr.converged;
      if (sr.converged || total_it >= stage_budget) {
        rep.stage_objectives.push_back(obj.value(u, 0.0));
        continue;
      }
    }

    energy = obj.value(u, mu);
    if (!std::isfinite(energy)) throw SolverFailure("spg: non-finite objective");
    GridFunction grad = obj.gradient(u, mu, &mask.frozen);
    double gnorm = vec_norm(grad.values);
    double alpha = 1.0 / std::max(gnorm, 1e-12);
    std::deque<double> history{energy};
    int bad_steps = 0;
    double best = energy;
    int above_best = 0;

    while (total_it < stage_budget) {
      if (energy < best) {
        best = energy;
        above_best = 0;
      } else if (energy > best + 1e-9 * (std::abs(best) + 1)) {
        if (++above_best > 30) {
          throw SolverFailure("spg: objective increases persistently (divergence)");
        }
      }
      measure_out = stationarity(gnorm, vec_norm(u.values), obj.degree, energy);
      if (measure_out <= stage_tol) {
        converged = true;
        break;
      }
      converged = false;

      GridFunction trial = u;
      for (std::size_t i = 0; i < trial.values.size(); ++i) {
        trial.values[i] = u.values[i] - alpha * grad.values[i];
      }
      apply_constraints(trial, mask);
      clamp_cells(trial, mask, opts.clamp_radius);

      std::vector<double> dvec(trial.values.size());
      for (std::size_t i = 0; i < dvec.size(); ++i) dvec[i] = trial.values[i] - u.values[i];
      const double gd = vec_dot(grad.values, dvec);
      if (gd >= 0) {  // projection produced an ascent direction: shrink alpha
        alpha *= 0.1;
        if (++bad_steps > 40) throw SolverFailure("spg: no descent direction");
        ++total_it;
        continue;
      }

      const double emax = *std::max_element(history.begin(), history.end());
      double lambda = 1.0;
      double enew = 0;
      GridFunction next = u;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        for (std::size_t i = 0; i < next.values.size(); ++i) {
          next.values[i] = u.values[i] + lambda * dvec[i];
        }
        enew = obj.value(next, mu);
        if (std::isfinite(enew) && enew <= emax + 1e-4 * lambda * gd) {
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) {
        if (++bad_steps > 5) {
          throw SolverFailure("spg: persistent line-search failure (divergence)");
        }
        alpha = std::max(alpha * 0.01, 1e-16);
        ++total_it;
        continue;
      }

      if (!(enew < emax) && lambda <= 1e-8) {
        // accepted only at rounding level: no real progress toward a
        // stationary point, so count it against the divergence budget
        if (++bad_steps > 25) {
          throw SolverFailure("spg: no descent progress (divergent or inconsistent gradient)");
        }
      } else {
        bad_steps = 0;
      }
      GridFunction gnew = obj.gradient(next, mu, &mask.frozen);
      double sy = 0, ss = 0;
      for (std::size_t i = 0; i < dvec.size(); ++i) {
        const double si = lambda * dvec[i];
        const double yi = gnew.values[i] - grad.values[i];
        sy += si * yi;
        ss += si * si;
      }
      alpha = (sy > 1e-300) ? std::min(1e12, std::max(1e-16, ss / sy))
                            : std::min(1e12, alpha * 2.0);

      u = std::move(next);
      grad = std::move(gnew);
      energy = enew;
      gnorm = vec_norm(grad.values);
      history.push_back(energy);
      if (history.size() > 10) history.pop_front();
      ++total_it;
    }
    rep.stage_objectives.push_back(obj.value(u, 0.0));
  }

  rep.objective = obj.value(u, 0.0);
  rep.grad_norm = measure_out;
  rep.iterations = total_it;
  rep.converged = converged;
  return rep;
}

}  // namespace detail

// Mean |D_eps^xi u| over all lattice pairs; sets the mu-continuation scale.
inline double mean_abs_difference(const GridFunction& u, const EnergyParams& pp) {
  const GridDomain& dom = u.domain();
  const int m = u.m;
  double acc = 0;
  Index count = 0;
  for (const Shift& sh : pp.shifts) {
    const Index off = shift_offset(dom, sh.s.data());
    detail::for_each_pair(dom, sh.s.data(), [&](Index lin) {
      if (!dom.active(lin) || !dom.active(lin + off)) return;
      double s2 = 0;
      for (int c = 0; c < m; ++c) {
        const double diff = u.values[(lin + off) * m + c] - u.values[lin * m + c];
        s2 += diff * diff;
      }
      acc += std::sqrt(s2) / pp.epsilon;
      ++count;
    });
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

inline std::vector<double> default_mu_schedule(double p, double scale) {
  if (p >= 2.0 || scale <= 0) return {0.0};
  std::vector<double> mus;
  for (int k = 0; k < 4; ++k) mus.push_back(0.1 * scale / static_cast<double>(1 << k));
  mus.push_back(1e-8 * scale);
  return mus;
}

inline MinimizeResult minimize_energy(const Objective& obj, const ConstraintMask& mask,
                                      const GridFunction& init, const MinimizeOptions& opts) {
  MinimizeResult out;
  out.u = init;
  detail::apply_constraints(out.u, mask);
  detail::clamp_cells(out.u, mask, opts.clamp_radius);

  if (obj.quadratic && opts.clamp_radius <= 0) {
    out.report = detail::solve_cg(obj, mask, out.u, opts);
    return out;
  }
  std::vector<double> mus = opts.mu_schedule;
  if (mus.empty()) mus = {0.0};
  if (obj.degree < 2.0 && mus.size() == 1 && mus[0] == 0.0) {
    // p < 2 with mu = 0 stalls on zero differences; refuse silently bad input
    mus = default_mu_schedule(obj.degree, 1.0);
  }
  out.report = detail::solve_spg(obj, mask, out.u, opts, mus);
  return out;
}

// ---------------------------------------------------------------------------
// Objective adapters.

inline Objective make_nonlocal_objective(std::shared_ptr<const GridDomain> A,
                                         const KernelSpec& k, const EnergyParams& pp) {
  Objective obj;
  obj.degree = k.p;
  obj.quadratic = (k.p == 2.0) && k.phom.has_value();
  obj.convex = k.convex_in_z;
  obj.value = [A, &k, &pp](const GridFunction& u, double mu) {
    return nonlocal_energy(u, *A, k, pp, mu);
  };
  obj.gradient = [A, &k, &pp](const GridFunction& u, double mu,
                              const std::vector<std::uint8_t>* frozen) {
    return energy_gradient(u, *A, k, pp, frozen, mu);
  };
  if (k.phom) {
    obj.reweighted = [A, &k, &pp](const GridFunction& uref, double mu) {
      auto ref = std::make_shared<GridFunction>(uref);
      Objective q;
      q.degree = 2;
      q.quadratic = true;
      q.value = [A, &k, &pp, ref, mu](const GridFunction& v, double) {
        return reweighted_energy(v, *ref, *A, k, pp, mu);
      };
      q.gradient = [A, &k, &pp, ref, mu](const GridFunction& v, double,
                                         const std::vector<std::uint8_t>* frozen) {
        return reweighted_gradient(v, *ref, *A, k, pp, mu, frozen);
      };
      return q;
    };
  }
  return obj;
}

// ---------------------------------------------------------------------------
// Local functionals  sum_x h^d density(grad_h u(x))  with forward differences.

struct LocalDensity {
  double C = 1;
  double p = 2;
  // optional generic integrand on m x d matrices (row-major), with gradient
  std::function<double(const double* S, int m, int d, double mu)> eval;
  std::function<void(const double* S, int m, int d, double mu, double* G)> grad;

  bool analytic() const { return !eval; }
};

inline LocalDensity pnorm_density(double C, double p) { return LocalDensity{C, p, {}, {}}; }

namespace detail {

inline double local_density_eval(const LocalDensity& rho, const double* S, int m, int d,
                                 double mu) {
  if (!rho.analytic()) return rho.eval(S, m, d, mu);
  double s2 = mu * mu;
  for (int i = 0; i < m * d; ++i) s2 += S[i] * S[i];
  return rho.C * std::pow(s2, 0.5 * rho.p);
}

inline void local_density_grad(const LocalDensity& rho, const double* S, int m, int d,
                               double mu, double* G) {
  if (!rho.analytic()) {
    rho.grad(S, m, d, mu, G);
    return;
  }
  double s2 = mu * mu;
  for (int i = 0; i < m * d; ++i) s2 += S[i] * S[i];
  const double c = rho.C * rho.p * std::pow(s2, 0.5 * rho.p - 1.0);
  if (!std::isfinite(c)) {
    throw SolverFailure("local gradient: singular gradient; use mu > 0 for p < 2");
  }
  for (int i = 0; i < m * d; ++i) G[i] = c * S[i];
}

// Forward-difference matrix S(x) into row-major m x d scratch; rows with a
// missing forward neighbor are zero and stay zero in the gradient.
template <class Fn>
inline void for_each_local_cell(const GridFunction& u, Fn&& fn) {
  const GridDomain& dom = u.domain();
  const int d = dom.d;
  const int m = u.m;
  std::vector<double> S(static_cast<std::size_t>(m) * d);
  std::vector<std::uint8_t> has(static_cast<std::size_t>(d));
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    for (int i = 0; i < d; ++i) {
      has[i] = mi[i] + 1 < dom.shape[i];
      if (has[i]) {
        const Index j = lin + dom.stride[i];
        for (int c = 0; c < m; ++c) {
          S[c * d + i] = (u.values[j * m + c] - u.values[lin * m + c]) / dom.h;
        }
      } else {
        for (int c = 0; c < m; ++c) S[c * d + i] = 0.0;
      }
    }
    fn(lin, S.data(), has.data());
    for (int i = d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
}

}  // namespace detail

inline double local_energy(const GridFunction& u, const LocalDensity& rho, double mu = 0) {
  const GridDomain& dom = u.domain();
  require(dom.all_active(), "local energy: needs a full box domain");
  const double hV = dom.cell_volume();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(dom.ncells));
  detail::for_each_local_cell(u, [&](Index, const double* S, const std::uint8_t*) {
    terms.push_back(detail::local_density_eval(rho, S, u.m, dom.d, mu));
  });
  return hV * pairwise_sum(terms);
}

inline GridFunction local_gradient(const GridFunction& u, const LocalDensity& rho, double mu,
                                   const std::vector<std::uint8_t>* frozen) {
  const GridDomain& dom = u.domain();
  require(dom.all_active(), "local gradient: needs a full box domain");
  const int d = dom.d;
  const int m = u.m;
  // pass 1: density gradients per cell
  std::vector<double> W(static_cast<std::size_t>(dom.ncells) * m * d, 0.0);
  detail::for_each_local_cell(u, [&](Index lin, const double* S, const std::uint8_t* has) {
    double* G = W.data() + static_cast<std::size_t>(lin) * m * d;
    detail::local_density_grad(rho, S, m, d, mu, G);
    for (int i = 0; i < d; ++i) {
      if (!has[i]) {
        for (int c = 0; c < m; ++c) G[c * d + i] = 0.0;
      }
    }
  });
  // pass 2: divergence-style gather
  GridFunction grad = make_field(u.dom, m);
  const double scale = dom.cell_volume() / dom.h;
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    double* g = grad.cell(lin);
    const double* Gh = W.data() + static_cast<std::size_t>(lin) * m * d;
    for (int i = 0; i < d; ++i) {
      for (int c = 0; c < m; ++c) g[c] -= scale * Gh[c * d + i];
      if (mi[i] > 0) {
        const double* Gb = W.data() + static_cast<std::size_t>(lin - dom.stride[i]) * m * d;
        for (int c = 0; c < m; ++c) g[c] += scale * Gb[c * d + i];
      }
    }
    for (int i = d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
  if (frozen != nullptr) {
    for (Index lin = 0; lin < dom.ncells; ++lin) {
      if ((*frozen)[lin]) {
        for (int c = 0; c < m; ++c) grad.values[lin * m + c] = 0.0;
      }
    }
  }
  return grad;
}

inline double local_reweighted_energy(const GridFunction& v, const GridFunction& uref,
                                      const LocalDensity& rho, double mu) {
  const GridDomain& dom = v.domain();
  require(dom.all_active(), "local reweighted energy: needs a full box domain");
  require(rho.analytic(), "local reweighted energy: power densities only");
  const int d = dom.d;
  const int m = v.m;
  const double fold = rho.C * 0.5 * rho.p;
  const double pexp = 0.5 * rho.p - 1.0;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(dom.ncells));
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    double sref = mu * mu, sv = 0;
    for (int i = 0; i < d; ++i) {
      if (mi[i] + 1 < dom.shape[i]) {
        const Index j = lin + dom.stride[i];
        for (int c = 0; c < m; ++c) {
          const double dr = (uref.values[j * m + c] - uref.values[lin * m + c]) / dom.h;
          const double dv = (v.values[j * m + c] - v.values[lin * m + c]) / dom.h;
          sref += dr * dr;
          sv += dv * dv;
        }
      }
    }
    terms.push_back(fold * std::pow(sref, pexp) * sv);
    for (int i = d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
  return dom.cell_volume() * pairwise_sum(terms);
}

inline GridFunction local_reweighted_gradient(const GridFunction& v, const GridFunction& uref,
                                              const LocalDensity& rho, double mu,
                                              const std::vector<std::uint8_t>* frozen) {
  const GridDomain& dom = v.domain();
  require(dom.all_active(), "local reweighted gradient: needs a full box domain");
  const int d = dom.d;
  const int m = v.m;
  const double fold = rho.C * 0.5 * rho.p;
  const double pexp = 0.5 * rho.p - 1.0;

  // pass 1: weighted difference rows W(x)_ci = 2 w(x) S_v(x)_ci
  std::vector<double> W(static_cast<std::size_t>(dom.ncells) * m * d, 0.0);
  {
    MultiIndex mi{};
    for (Index lin = 0; lin < dom.ncells; ++lin) {
      double sref = mu * mu;
      for (int i = 0; i < d; ++i) {
        if (mi[i] + 1 < dom.shape[i]) {
          const Index j = lin + dom.stride[i];
          for (int c = 0; c < m; ++c) {
            const double dr = (uref.values[j * m + c] - uref.values[lin * m + c]) / dom.h;
            sref += dr * dr;
          }
        }
      }
      const double w2 = 2.0 * fold * std::pow(sref, pexp);
      double* row = W.data() + static_cast<std::size_t>(lin) * m * d;
      for (int i = 0; i < d; ++i) {
        if (mi[i] + 1 < dom.shape[i]) {
          const Index j = lin + dom.stride[i];
          for (int c = 0; c < m; ++c) {
            row[c * d + i] = w2 * (v.values[j * m + c] - v.values[lin * m + c]) / dom.h;
          }
        }
      }
      for (int i = d - 1; i >= 0; --i) {
        if (++mi[i] < dom.shape[i]) break;
        mi[i] = 0;
      }
    }
  }
  // pass 2: divergence-style gather
  GridFunction grad = make_field(v.dom, m);
  const double scale = dom.cell_volume() / dom.h;
  MultiIndex mi{};
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    double* g = grad.cell(lin);
    const double* Gh = W.data() + static_cast<std::size_t>(lin) * m * d;
    for (int i = 0; i < d; ++i) {
      for (int c = 0; c < m; ++c) g[c] -= scale * Gh[c * d + i];
      if (mi[i] > 0) {
        const double* Gb = W.data() + static_cast<std::size_t>(lin - dom.stride[i]) * m * d;
        for (int c = 0; c < m; ++c) g[c] += scale * Gb[c * d + i];
      }
    }
    for (int i = d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
  if (frozen != nullptr) {
    for (Index lin = 0; lin < dom.ncells; ++lin) {
      if ((*frozen)[lin]) {
        for (int c = 0; c < m; ++c) grad.values[lin * m + c] = 0.0;
      }
    }
  }
  return grad;
}

inline Objective make_local_objective(const LocalDensity& rho) {
  Objective obj;
  obj.degree = rho.p;
  obj.quadratic = rho.analytic() && rho.p == 2.0;
  obj.value = [rho](const GridFunction& u, double mu) { return local_energy(u, rho, mu); };
  obj.gradient = [rho](const GridFunction& u, double mu,
                       const std::vector<std::uint8_t>* frozen) {
    return local_gradient(u, rho, mu, frozen);
  };
  if (rho.analytic()) {
    obj.reweighted = [rho](const GridFunction& uref, double mu) {
      auto ref = std::make_shared<GridFunction>(uref);
      Objective q;
      q.degree = 2;
      q.quadratic = true;
      q.value = [rho, ref, mu](const GridFunction& v, double) {
        return local_reweighted_energy(v, *ref, rho, mu);
      };
      q.gradient = [rho, ref, mu](const GridFunction& v, double,
                                  const std::vector<std::uint8_t>* frozen) {
        return local_reweighted_gradient(v, *ref, rho, mu, frozen);
      };
      return q;
    };
  }
  return obj;
}

inline MinimizeResult minimize_local_dirichlet(const LocalDensity& rho,
                                               const ConstraintMask& mask,
                                               const GridFunction& init,
                                               const MinimizeOptions& opts) {
  return minimize_energy(make_local_objective(rho), mask, init, opts);
}

}  // namespace nlhg

#endif  // NLHG_MINIMIZE_HPP

// Numerical checks of the coarse-grained Sobolev-type inequality and the
// Poincare-Wirtinger analogue for the short-range energy. The unknown
// constants are recorded as ratios, never asserted against absolute values.
#ifndef NLHG_INEQUALITIES_HPP
#define NLHG_INEQUALITIES_HPP

#include <string>
#include <vector>

#include "nlhg/energy.hpp"

namespace nlhg {

struct InequalityReport {
  std::string corpus_id;
  double eps = 0;
  double r = 0;
  double p = 0;
  double lhs = 0;
  double rhs_raw = 0;  // right side without the unknown constant
  double ratio = 0;    // lhs / rhs_raw, 0 when both sides vanish
  bool trivial = false;
};

// (int |T_eps u|^{p*})^{p/p*} against G_eps^{r,p}(u, R^d) for compactly
// supported u (exterior value zero).
inline InequalityReport gns_check(const GridFunction& u, double eps, double r, double p,
                                  const std::string& corpus_id = "") {
  const GridDomain& dom = u.domain();
  require(p >= 1 && p < dom.d, "gns_check: need 1 <= p < d");
  require(u.exterior.has_value(), "gns_check: field needs an exterior value");
  for (double v : *u.exterior) require(v == 0.0, "gns_check: exterior must be zero");

  InequalityReport rep;
  rep.corpus_id = corpus_id;
  rep.eps = eps;
  rep.r = r;
  rep.p = p;

  const double pstar = p * dom.d / (dom.d - p);
  const CoarsenedField coarse = coarsen(u, eps, r);
  rep.lhs = std::pow(lp_norm(coarse.field, pstar), p);
  rep.rhs_raw = short_range_energy_extended(u, r, p, eps);

  if (rep.rhs_raw <= 0.0) {
    if (rep.lhs > 1e-14 * (1.0 + std::abs(rep.lhs))) {
      throw std::logic_error("gns_check: zero energy with a nonzero left side");
    }
    rep.trivial = true;
    rep.ratio = 0;
    return rep;
  }
  rep.ratio = rep.lhs / rep.rhs_raw;
  return rep;
}

// int_A |u - u_E|^p against lambda^p G_eps^{r,p}(u, A); lambda covers the
// scaled variant, lambda = 1 the plain one.
inline InequalityReport pw_check(const GridFunction& u, const GridDomain& A,
                                 const std::vector<Index>& E, double eps, double r, double p,
                                 double lambda = 1.0, const std::string& corpus_id = "") {
  require(!E.empty(), "pw_check: E must be nonempty");
  const GridDomain& dom = u.domain();
  require(dom.same_geometry(A), "pw_check: A must share the grid of u");

  InequalityReport rep;
  rep.corpus_id = corpus_id;
  rep.eps = eps;
  rep.r = r;
  rep.p = p;

  const std::vector<double> mean = cell_average(u, E);
  std::vector<double> terms;
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    if (!A.active(lin)) continue;
    double s2 = 0;
    for (int c = 0; c < u.m; ++c) {
      const double dv = u.values[lin * u.m + c] - mean[c];
      s2 += dv * dv;
    }
    terms.push_back(std::pow(s2, 0.5 * p));
  }
  rep.lhs = dom.cell_volume() * pairwise_sum(terms);
  rep.rhs_raw = std::pow(lambda, p) * short_range_energy(u, A, r, p, eps);
  if (rep.rhs_raw <= 0.0) {
    rep.trivial = true;
    rep.ratio = 0;
    return rep;
  }
  rep.ratio = rep.lhs / rep.rhs_raw;
  return rep;
}

// ---------------------------------------------------------------------------
// Seeded corpus: smooth fields (coarse random nodes, multilinear refinement,
// compact-support envelope), tents, and ball indicators.

struct CorpusField {
  GridFunction u;
  std::string id;
};

inline std::vector<CorpusField> make_inequality_corpus(std::shared_ptr<const GridDomain> dom,
                                                       int m, int count, std::uint64_t seed) {
  std::vector<CorpusField> corpus;
  Rng rng(seed);
  const int d = dom->d;
  Coord lo = dom->lo, hi{};
  for (int i = 0; i < d; ++i) hi[i] = dom->hi(i);

  for (int idx = 0; idx < count; ++idx) {
    const int kind = idx % 3;
    GridFunction u = make_field(dom, m);
    u.exterior = std::vector<double>(static_cast<std::size_t>(m), 0.0);
    std::vector<double> dir(static_cast<std::size_t>(m));
    rng.unit_vector(m, dir.data());
    const double amp = rng.uniform(0.5, 2.0);

    if (kind == 0) {
      // coarse random nodes, multilinear interpolation, envelope to zero
      const Index n0 = 6;
      std::vector<double> nodes;
      Index total = 1;
      for (int i = 0; i < d; ++i) total *= (n0 + 1);
      nodes.resize(static_cast<std::size_t>(total) * m);
      for (auto& v : nodes) v = rng.uniform(-1.0, 1.0);
      fill_field(u, [&](const double* x, double* v) {
        // position in node coordinates
        Coord t{};
        MultiIndex base{};
        for (int i = 0; i < d; ++i) {
          const double s = (x[i] - lo[i]) / (hi[i] - lo[i]) * n0;
          base[i] = std::min<Index>(n0 - 1, static_cast<Index>(std::floor(s)));
          t[i] = s - static_cast<double>(base[i]);
        }
        for (int c = 0; c < m; ++c) v[c] = 0.0;
        const Index corners = Index{1} << d;
        for (Index corner = 0; corner < corners; ++corner) {
          double w = 1.0;
          Index lin = 0, stride = 1;
          for (int i = d - 1; i >= 0; --i) {
            const Index bit = (corner >> i) & 1;
            w *= bit ? t[i] : 1.0 - t[i];
            lin += (base[i] + bit) * stride;
            stride *= (n0 + 1);
          }
          for (int c = 0; c < m; ++c) v[c] += w * nodes[lin * m + c];
        }
        double env = 1.0;
        for (int i = 0; i < d; ++i) {
          const double margin = std::min(x[i] - lo[i], hi[i] - x[i]) / (hi[i] - lo[i]);
          env *= std::min(1.0, margin / 0.2);
          env = std::max(env, 0.0);
        }
        for (int c = 0; c < m; ++c) v[c] *= amp * env;
      });
      corpus.push_back({std::move(u), "smooth-" + std::to_string(idx)});
    } else {
      Coord x0{};
      for (int i = 0; i < d; ++i) {
        x0[i] = rng.uniform(lo[i] + 0.3 * (hi[i] - lo[i]), hi[i] - 0.3 * (hi[i] - lo[i]));
      }
      const double w = rng.uniform(0.1, 0.25) * (hi[0] - lo[0]);
      if (kind == 1) {
        fill_field(u, [&](const double* x, double* v) {
          double r2 = 0;
          for (int i = 0; i < d; ++i) r2 += (x[i] - x0[i]) * (x[i] - x0[i]);
          const double f = std::max(0.0, 1.0 - std::sqrt(r2) / w);
          for (int c = 0; c < m; ++c) v[c] = amp * f * dir[c];
        });
        corpus.push_back({std::move(u), "tent-" + std::to_string(idx)});
      } else {
        fill_field(u, [&](const double* x, double* v) {
          double r2 = 0;
          for (int i = 0; i < d; ++i) r2 += (x[i] - x0[i]) * (x[i] - x0[i]);
          const double f = r2 < w * w ? 1.0 : 0.0;
          for (int c = 0; c < m; ++c) v[c] = amp * f * dir[c];
        });
        corpus.push_back({std::move(u), "indicator-" + std::to_string(idx)});
      }
    }
  }
  return corpus;
}

}  // namespace nlhg

#endif  // NLHG_INEQUALITIES_HPP

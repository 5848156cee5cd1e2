#include <gtest/gtest.h>

#include "nlhg/inequalities.hpp"
#include "oracles.hpp"

using namespace nlhg;

namespace {

std::shared_ptr<const GridDomain> corpus_domain() {
  static auto dom = std::make_shared<GridDomain>(make_cube_domain(2, 2.0, 0.025));
  return dom;
}

}  // namespace

TEST(Gns, ZeroFieldIsTrivial) {
  GridFunction u = make_field(corpus_domain(), 1);
  u.exterior = std::vector<double>{0.0};
  const InequalityReport rep = gns_check(u, 0.2, 1.0, 1.5);
  EXPECT_TRUE(rep.trivial);
  EXPECT_EQ(rep.lhs, 0.0);
  EXPECT_EQ(rep.ratio, 0.0);
}

TEST(Gns, RequiresZeroExterior) {
  GridFunction u = make_field(corpus_domain(), 1);
  EXPECT_THROW(gns_check(u, 0.2, 1.0, 1.5), std::invalid_argument);  // no exterior
  u.exterior = std::vector<double>{1.0};
  EXPECT_THROW(gns_check(u, 0.2, 1.0, 1.5), std::invalid_argument);  // nonzero
}

TEST(Gns, RatioInvariantUnderFieldScaling) {
  auto dom = corpus_domain();
  const auto corpus = make_inequality_corpus(dom, 1, 3, 99);
  for (const auto& cf : corpus) {
    const InequalityReport a = gns_check(cf.u, 0.2, 1.0, 1.5, cf.id);
    GridFunction scaled = cf.u;
    for (auto& v : scaled.values) v *= 2.0;
    const InequalityReport b = gns_check(scaled, 0.2, 1.0, 1.5, cf.id);
    EXPECT_NEAR(a.ratio, b.ratio, 1e-12 * (std::abs(a.ratio) + 1e-30));
  }
}

TEST(Gns, RatioInvariantUnderCubeCommensurateTranslation) {
  // translating by whole coarsening cubes maps cube contents exactly
  auto dom = corpus_domain();
  const auto corpus = make_inequality_corpus(dom, 1, 2, 7);
  const GridFunction& u = corpus[1].u;  // tent: compactly supported
  const double eps = 0.2, r = std::sqrt(5.0);  // snapped cube side 0.2 = 8 h
  const CoarsenedField cf = coarsen(u, eps, r);
  const Index cube_cells = static_cast<Index>(std::llround(cf.cube_side / dom->h));
  ASSERT_GT(cube_cells, 0);

  GridFunction moved = make_field(dom, 1);
  moved.exterior = std::vector<double>{0.0};
  const Index shift0 = cube_cells;  // one cube along axis 0
  for (Index lin = 0; lin < dom->ncells; ++lin) {
    const MultiIndex mi = dom->multi(lin);
    if (mi[0] + shift0 < dom->shape[0]) {
      MultiIndex mj = mi;
      mj[0] += shift0;
      moved.values[dom->linear(mj)] = u.values[lin];
    }
  }
  // the tent's support is interior, so nothing falls off the box
  const InequalityReport a = gns_check(u, eps, r, 1.5);
  const InequalityReport b = gns_check(moved, eps, r, 1.5);
  EXPECT_NEAR(a.ratio, b.ratio, 1e-11 * (std::abs(a.ratio) + 1e-30));
}

TEST(Gns, TentRatiosStableAcrossEps) {
  auto dom = corpus_domain();
  GridFunction u = make_field(dom, 1);
  u.exterior = std::vector<double>{0.0};
  fill_field(u, [](const double* x, double* v) {
    const double r = std::hypot(x[0], x[1]);
    v[0] = std::max(0.0, 1.0 - r / 0.8);
  });
  std::vector<double> ratios;
  for (double eps : {0.2, 0.1, 0.05}) {
    ratios.push_back(gns_check(u, eps, 1.0, 1.5).ratio);
    EXPECT_GT(ratios.back(), 0.0);
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  EXPECT_LT(hi / lo, 2.0);
}

TEST(Pw, ConstantFieldHasZeroLeftSide) {
  auto dom = corpus_domain();
  GridFunction u = make_field(dom, 1);
  const double c = 3.0;
  set_constant(u, &c);
  const InequalityReport rep = pw_check(u, *dom, {0, 1, 2}, 0.2, 1.0, 1.5);
  EXPECT_EQ(rep.lhs, 0.0);
}

TEST(Pw, DilationIdentity) {
  // lambda-dilated field and geometry evaluated at the same eps: the scaled
  // ratio equals the undilated ratio computed at eps/lambda exactly
  const double lambda = 2.0;
  auto base = std::make_shared<GridDomain>(make_cube_domain(2, 1.0, 0.03125));
  auto dil = std::make_shared<GridDomain>(make_cube_domain(2, lambda, lambda * 0.03125));

  GridFunction w = make_field(base, 1);
  Rng rng(15);
  for (auto& v : w.values) v = rng.uniform(-1, 1);
  GridFunction u = make_field(dil, 1);
  u.values = w.values;  // same cell layout: u(lambda y) = w(y)

  std::vector<Index> E_base, E_dil;
  {
    MultiIndex mi{};
    Coord x{};
    for (Index lin = 0; lin < base->ncells; ++lin) {
      base->center(mi, x.data());
      if (norm_m(x.data(), 2) < 0.5) E_base.push_back(lin);
      for (int i = 1; i >= 0; --i) {
        if (++mi[i] < base->shape[i]) break;
        mi[i] = 0;
      }
    }
    E_dil = E_base;  // identical linear indices under the dilation
  }

  const double eps = 0.25, r = 1.0, p = 1.5;
  const InequalityReport undilated = pw_check(w, *base, E_base, eps / lambda, r, p, 1.0);
  const InequalityReport dilated = pw_check(u, *dil, E_dil, eps, r, p, lambda);
  // lhs scales by lambda^d, rhs_raw (with the lambda^p factor) likewise
  EXPECT_NEAR(dilated.ratio, undilated.ratio, 1e-6 * (std::abs(undilated.ratio) + 1e-30));
}

TEST(Pw, CorpusRatiosStableUnderEpsHalving) {
  auto dom = std::make_shared<GridDomain>(make_cube_domain(2, 2.0, 0.025));
  GridDomain ball = *dom;
  Coord c{};
  set_ball_mask(ball, c.data(), 2.0);
  std::vector<Index> E;
  {
    MultiIndex mi{};
    Coord x{};
    for (Index lin = 0; lin < dom->ncells; ++lin) {
      dom->center(mi, x.data());
      if (norm_m(x.data(), 2) < 1.0) E.push_back(lin);
      for (int i = 1; i >= 0; --i) {
        if (++mi[i] < dom->shape[i]) break;
        mi[i] = 0;
      }
    }
  }
  // smooth corpus members only: stability of the empirical constant
  const auto corpus = make_inequality_corpus(dom, 1, 6, 2024);
  std::vector<double> worst;
  for (double eps : {0.2, 0.1}) {
    double w = 0;
    for (const auto& cf : corpus) {
      if (cf.id.rfind("smooth", 0) != 0) continue;
      const InequalityReport rep = pw_check(cf.u, ball, E, eps, 1.0, 1.5, 1.0, cf.id);
      w = std::max(w, rep.ratio);
    }
    worst.push_back(w);
  }
  EXPECT_GT(worst[0], 0.0);
  EXPECT_LT(worst[1], 2.0 * worst[0]);
  EXPECT_GT(worst[1], worst[0] / 2.0);
}

TEST(Corpus, DeterministicAndDiverse) {
  auto dom = corpus_domain();
  const auto a = make_inequality_corpus(dom, 2, 9, 12345);
  const auto b = make_inequality_corpus(dom, 2, 9, 12345);
  ASSERT_EQ(a.size(), 9u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].u.values, b[i].u.values);
    EXPECT_EQ(a[i].id, b[i].id);
  }
  EXPECT_EQ(a[0].id.rfind("smooth", 0), 0u);
  EXPECT_EQ(a[1].id.rfind("tent", 0), 0u);
  EXPECT_EQ(a[2].id.rfind("indicator", 0), 0u);
  // all corpus members are compactly supported: zero on the box margin
  for (const auto& cf : a) {
    const MultiIndex corner{};
    EXPECT_EQ(cf.u.values[cf.u.domain().linear(corner)], 0.0);
  }
}

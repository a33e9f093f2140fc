#include "carnot/catalog.hpp"
#include "carnot/divergence.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace carnot;

namespace {

const double kPi = std::acos(-1.0);

Eigen::VectorXd vec(std::initializer_list<double> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  int i = 0;
  for (double c : x) v(i++) = c;
  return v;
}

}  // namespace

TEST(DivergenceDisplacement, StepTwoClosedForm) {
  for (const std::string name : {"heisenberg", "free2-3"}) {
    CarnotGroup g(catalog::builtin(name));
    const GradedAlgebra& a = g.algebra();
    const int d1 = a.horizontal_dim();
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(d1, 0.5, 1.5);
    AlgebraVector w = a.zero();
    for (int i = 0; i < d1; ++i) w(i) = i % 2 ? -0.7 : 0.3;
    for (double t : {1.0, 3.5, -2.0, 64.0}) {
      const AlgebraVector p = divergence_displacement(g, v, w, t);
      // e^{w + t[w, v]}; for negative t the conventions give t[w, v] as well
      const AlgebraVector expect = w + t * bracket(a, w, a.embed_horizontal(v));
      EXPECT_LT((p - expect).lpNorm<Eigen::Infinity>(), 1e-10 * std::max(1.0, std::abs(t))) << name << " " << t;
    }
  }
}

TEST(DivergenceDisplacement, EvaluationOrdersAgree) {
  CarnotGroup g(catalog::engel());
  const GradedAlgebra& a = g.algebra();
  const Eigen::VectorXd v = vec({0.4, -1.1});
  const AlgebraVector w = vec({0.2, 0.5, -0.3, 0.7});
  for (double t : {1.0, 2.0, 11.0}) {
    const GroupElement ev(a.embed_horizontal(v));
    const GroupElement g1 = dilate(g, t, ev);
    const GroupElement g2 = bch(g, GroupElement(w), g1);
    const AlgebraVector direct = displacement(g, g1, g2);
    const AlgebraVector reduced = divergence_displacement(g, v, w, t);
    EXPECT_LT((direct - reduced).lpNorm<Eigen::Infinity>(), 1e-10 * std::pow(t, 3)) << t;
  }
}

TEST(DivergenceProfile, HeisenbergSquareRootGrowth) {
  CcEstimator est(CarnotGroup(catalog::heisenberg()), std::nullopt, {}, 7);
  const DivergenceFit f = divergence_profile(est, {vec({1, 0}), vec({0, 1, 0}), geometric_grid(1, 128, 8)});
  EXPECT_TRUE(f.complete);
  EXPECT_NEAR(f.exponent, 0.5, 0.1);
  EXPECT_TRUE(f.sandwich);
  EXPECT_GT(f.alpha, 0.0);
  EXPECT_LT(f.alpha, f.exponent);
  EXPECT_GT(f.beta, f.exponent);
  EXPECT_LT(f.beta, 1.0);
  for (std::size_t i = 1; i < f.rows.size(); ++i) EXPECT_GE(f.rows[i].upper, f.rows[i - 1].upper);
  // the vertical part dominates: d(e^{Y - tZ}) >= sqrt(4 pi t) - 1
  for (const auto& r : f.rows) EXPECT_GE(r.upper, std::sqrt(4 * kPi * r.t) - 1.0);
}

TEST(DivergenceProfile, CommutingAndAbelianPairsAreFlat) {
  CcEstimator est(CarnotGroup(catalog::heisenberg()), std::nullopt, {}, 7);
  const DivergenceFit same = divergence_profile(est, {vec({1, 0}), vec({2, 0, 0}), geometric_grid(1, 128, 6)});
  EXPECT_NEAR(same.exponent, 0.0, 1e-9);
  for (const auto& r : same.rows) EXPECT_NEAR(r.upper, 2.0, 1e-12);
  CcEstimator ab(CarnotGroup(catalog::abelian(3)), std::nullopt, {}, 1);
  const DivergenceFit f = divergence_profile(ab, {vec({1, 0, 0}), vec({0, 3, 4}), geometric_grid(1, 128, 6)});
  for (const auto& r : f.rows) EXPECT_NEAR(r.upper, 5.0, 1e-12);
  EXPECT_EQ(f.classification, "bounded");
  EXPECT_EQ(obstruction_report(f, {f}).verdict, "inconclusive");
}

TEST(DivergenceProfile, Validation) {
  CcEstimator est(CarnotGroup(catalog::heisenberg()), std::nullopt, {}, 7);
  EXPECT_THROW(divergence_profile(est, {vec({1, 0}), vec({0, 1, 0}), {0.5, 2.0}}), InputError);
  EXPECT_THROW(divergence_profile(est, {vec({1, 0, 0}), vec({0, 1, 0}), {1.0, 2.0}}), InputError);
  EXPECT_THROW(divergence_profile(est, {vec({1, 0}), vec({0, 1, 0}), {1.0}}), InputError);
}

TEST(ModelSpace, EuclideanExamples) {
  const auto grid = geometric_grid(1, 128, 15);
  const auto e2 = ModelSpace::euclidean(2);
  const auto par = model_divergence(e2, e2.line(vec({0, 0}), vec({1, 0})), e2.line(vec({0, 1}), vec({1, 0})), grid);
  EXPECT_EQ(par.classification, "bounded");
  for (const auto& r : par.rows) EXPECT_NEAR(r.upper, 1.0, 1e-12);
  const auto cross =
      model_divergence(e2, e2.line(vec({0, 0}), vec({1, 0})), e2.line(vec({0, 0}), vec({0.5, std::sqrt(3.0) / 2})), grid);
  EXPECT_EQ(cross.classification, "linear");
  for (const auto& r : cross.rows) EXPECT_NEAR(r.upper, 2.0 * std::sin(kPi / 6) * r.t, 1e-12 * r.t);
  const auto e3 = ModelSpace::euclidean(3);
  const auto skew =
      model_divergence(e3, e3.line(vec({0, 0, 0}), vec({1, 0, 0})), e3.line(vec({0, 1, 0}), vec({0, 0, 1})), grid);
  EXPECT_EQ(skew.classification, "linear");
  for (const auto& r : skew.rows) EXPECT_NEAR(r.upper, std::sqrt(2 * r.t * r.t + 1), 1e-12 * r.t);
  const ObstructionReport rep = obstruction_report(par, {par, cross});
  EXPECT_EQ(rep.verdict, "inconclusive");
}

TEST(ModelSpace, CurvedModels) {
  const auto grid = geometric_grid(1, 64, 13);
  const auto h = ModelSpace::hyperbolic(-1.0);
  const auto l1 = h.line(vec({0, 0, 1}), vec({1, 0, 0})), l2 = h.line(vec({0, 0, 1}), vec({0, 1, 0}));
  EXPECT_EQ(model_divergence(h, l1, l2, grid).classification, "linear");
  // unit speed along the line and the triangle inequality on samples
  EXPECT_NEAR(h.distance(h.at(l1, 0.0), h.at(l1, 2.5)), 2.5, 1e-12);
  const auto a = h.at(l1, 0.7), b = h.at(l2, -1.2), c = h.at(l1, 3.0);
  EXPECT_LE(h.distance(a, c), h.distance(a, b) + h.distance(b, c) + 1e-12);
  EXPECT_NEAR(h.distance(a, b), h.distance(b, a), 1e-12);
  const auto s = ModelSpace::sphere(1.0);
  const auto s1 = s.line(vec({0, 0, 1}), vec({1, 0, 0})), s2 = s.line(vec({0, 0, 1}), vec({0, 1, 0}));
  EXPECT_EQ(model_divergence(s, s1, s2, grid).classification, "bounded");
  EXPECT_NEAR(s.distance(s.at(s1, 0.0), s.at(s1, kPi)), kPi, 1e-12);
  EXPECT_THROW(ModelSpace::hyperbolic(1.0), InputError);
  EXPECT_THROW(h.line(vec({0, 0, -1}), vec({1, 0, 0})), InputError);
}

TEST(Obstruction, Verdicts) {
  DivergenceFit carnot;
  carnot.label = "carnot";
  carnot.exponent = 0.5;
  DivergenceFit lin;
  lin.label = "l";
  lin.classification = "linear";
  EXPECT_EQ(obstruction_report(carnot, {lin}).verdict, "obstruction witnessed");
  carnot.complete = false;
  EXPECT_EQ(obstruction_report(carnot, {lin}).verdict, "inconclusive");
  carnot.complete = true;
  carnot.exponent = 0.95;
  EXPECT_EQ(obstruction_report(carnot, {lin}).verdict, "inconclusive");
  carnot.exponent = 0.5;
  lin.classification = "neither";
  EXPECT_EQ(obstruction_report(carnot, {lin}).verdict, "inconclusive");
}

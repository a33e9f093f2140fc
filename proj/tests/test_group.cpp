#include "carnot/catalog.hpp"
#include "carnot/group.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace carnot;

namespace {

AlgebraVector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  AlgebraVector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

GroupElement random_element(const CarnotGroup& g, std::mt19937_64& rng, double scale = 1.0) {
  return GroupElement(random_vector(g.dim(), rng, scale));
}

double rel(const AlgebraVector& a, const AlgebraVector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
}

AlgebraVector vec(std::initializer_list<double> xs) {
  AlgebraVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(BchCoefficients, LowOrderWords) {
  const auto c = bch_word_coefficients(3);
  EXPECT_EQ(c.at("X"), Rational(1));
  EXPECT_EQ(c.at("XY"), Rational(1, 2));
  EXPECT_EQ(c.at("YX"), Rational(-1, 2));
  EXPECT_EQ(c.count("XX"), 0u);
  // Lie part of degree 3: 1/12 [X,[X,Y]] - 1/12 [Y,[X,Y]].
  EXPECT_EQ(c.at("XXY"), Rational(1, 12));
  EXPECT_EQ(c.at("XYX"), Rational(-1, 6));
}

TEST(BchTable, TrieTermsAtOrderThree) {
  const BchTable table(3);
  // Left-normed: 1/2 [X,Y], and [[X,Y],X] = -[X,[X,Y]], [[X,Y],Y] = -[Y,[X,Y]].
  ASSERT_EQ(table.words(), (std::vector<std::string>{"XY", "XYX", "XYY"}));
  EXPECT_EQ(table.nodes()[0].exact, Rational(1, 2));
  EXPECT_EQ(table.nodes()[1].exact, Rational(-1, 12));
  EXPECT_EQ(table.nodes()[2].exact, Rational(1, 12));
}

TEST(BchTable, OrderLimits) {
  EXPECT_THROW(BchTable{0}, InputError);
  EXPECT_THROW(BchTable{kMaxBchOrder + 1}, InputError);
  EXPECT_NO_THROW(BchTable{kMaxBchOrder});
}

TEST(BchTable, PlanHasIdentityArguments) {
  const CarnotGroup g(catalog::engel());
  std::mt19937_64 rng(1);
  const AlgebraVector x = random_vector(4, rng);
  EXPECT_EQ(g.multiply(x, AlgebraVector::Zero(4)), x);
  EXPECT_EQ(g.multiply(AlgebraVector::Zero(4), x), x);
  for (const auto& node : g.bch_table().nodes()) EXPECT_LE(node.depth, g.nilpotency_degree());
}

TEST(Bch, HeisenbergExample) {
  const CarnotGroup g(catalog::heisenberg());
  const auto z = bch(g, g.exp(vec({1, 0, 0})), g.exp(vec({0, 1, 0})));
  EXPECT_TRUE(z.coords().isApprox(vec({1, 1, 0.5})));
  const auto parts = bch_components(g, g.exp(vec({1, 0, 0})), g.exp(vec({0, 1, 0})));
  EXPECT_TRUE(parts[0].isApprox(vec({1, 1, 0})));
  EXPECT_TRUE(parts[1].isApprox(vec({0, 0, 0.5})));
}

TEST(Bch, IdentityIsNeutral) {
  const CarnotGroup g(catalog::free_step2(3));
  std::mt19937_64 rng(2);
  const auto x = random_element(g, rng);
  EXPECT_EQ(bch(g, x, g.identity()).coords(), x.coords());
}

TEST(Bch, EngelExample) {
  // Oracle: hand-written depth-3 Dynkin series and the 4x4 matrix representation.
  const CarnotGroup g(catalog::engel());
  const AlgebraVector x1 = vec({1, 0, 0, 0}), x2 = vec({0, 1, 0, 0});
  const AlgebraVector expected = vec({1, 1, 0.5, 1.0 / 12.0});
  EXPECT_LE(rel(oracle::dynkin_depth3(g.algebra(), x1, x2), expected), 1e-15);
  EXPECT_LE(rel(oracle::engel_rep().product(x1, x2), expected), 1e-14);
  EXPECT_LE(rel(bch(g, g.exp(x1), g.exp(x2)).coords(), expected), 1e-15);
}

TEST(Bch, AlgebraMismatchIsInputError) {
  const CarnotGroup g(catalog::heisenberg());
  EXPECT_THROW(bch(g, g.identity(), GroupElement(AlgebraVector::Zero(4))), InputError);
}

TEST(Bch, RejectsInvalidAlgebra) {
  EXPECT_THROW(CarnotGroup(GradedAlgebra::from_brackets("bad", {1, 2}, {{0, 1, 2, 1.0}})), InputError);
}

TEST(Bch, MatchesMatrixRepresentations) {
  std::mt19937_64 rng(4);
  const CarnotGroup h(catalog::heisenberg());
  const CarnotGroup e(catalog::engel());
  for (int trial = 0; trial < 200; ++trial) {
    const AlgebraVector a = random_vector(3, rng, 2.0), b = random_vector(3, rng, 2.0);
    EXPECT_LE(rel(h.multiply(a, b), oracle::heisenberg_rep().product(a, b)), 1e-12);
    const AlgebraVector c = random_vector(4, rng, 2.0), d = random_vector(4, rng, 2.0);
    EXPECT_LE(rel(e.multiply(c, d), oracle::engel_rep().product(c, d)), 1e-12);
    EXPECT_LE(rel(e.multiply(c, d), oracle::dynkin_depth3(e.algebra(), c, d)), 1e-12);
  }
}

TEST(Bch, OrderSixAgainstUpperTriangularMatrices) {
  // Strictly upper-triangular 7x7 matrices: step 6, so every coefficient of
  // the table up to order 6 matters.
  const auto ut = oracle::upper_triangular(7);
  const CarnotGroup g(ut.algebra);
  ASSERT_EQ(g.nilpotency_degree(), 6);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const AlgebraVector a = random_vector(g.dim(), rng), b = random_vector(g.dim(), rng);
    EXPECT_LE(rel(g.multiply(a, b), ut.rep.product(a, b)), 1e-11);
  }
}

TEST(Bch, JetDerivativesMatchFiniteDifferences) {
  const auto ut = oracle::upper_triangular(5);
  const CarnotGroup g(ut.algebra);
  const int n = g.dim();
  std::mt19937_64 rng(6);
  const AlgebraVector x = random_vector(n, rng), y = random_vector(n, rng);
  Eigen::MatrixXd xd = Eigen::MatrixXd::Zero(n, 2 * n), yd = Eigen::MatrixXd::Zero(n, 2 * n);
  xd.leftCols(n).setIdentity();
  yd.rightCols(n).setIdentity();
  AlgebraVector out(n);
  Eigen::MatrixXd outd(n, 2 * n);
  BchTable::Workspace ws;
  g.bch_table().product_jet(g.algebra(), x.data(), xd.data(), y.data(), yd.data(), 2 * n, out.data(), outd.data(), ws);
  EXPECT_LE(rel(out, g.multiply(x, y)), 1e-14);
  const double h = 1e-6;
  for (int k = 0; k < n; ++k) {
    AlgebraVector dx = AlgebraVector::Zero(n);
    dx(k) = h;
    const AlgebraVector fdx = (g.multiply(x + dx, y) - g.multiply(x - dx, y)) / (2 * h);
    const AlgebraVector fdy = (g.multiply(x, y + dx) - g.multiply(x, y - dx)) / (2 * h);
    EXPECT_LE((fdx - outd.col(k)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((fdy - outd.col(n + k)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Inverse, Examples) {
  const CarnotGroup g(catalog::heisenberg());
  EXPECT_EQ(inverse(g.exp(vec({1, 0, 1}))).coords(), vec({-1, 0, -1}));
  const auto x = g.exp(vec({1, 0, 0}));
  EXPECT_LE(bch(g, x, inverse(x)).coords().norm(), 1e-15);
  // (e^X e^Y)^{-1} = e^{-Y} e^{-X}
  const auto xy = bch(g, g.exp(vec({1, 0, 0})), g.exp(vec({0, 1, 0})));
  const auto rhs = bch(g, g.exp(vec({0, -1, 0})), g.exp(vec({-1, 0, 0})));
  EXPECT_TRUE(inverse(xy).coords().isApprox(vec({-1, -1, -0.5})));
  EXPECT_LE(rel(inverse(xy).coords(), rhs.coords()), 1e-15);
}

TEST(Dilate, Examples) {
  const CarnotGroup g(catalog::heisenberg());
  EXPECT_EQ(dilate(g, 2.0, g.exp(vec({1, 0, 1}))).coords(), vec({2, 0, 4}));
  std::mt19937_64 rng(7);
  const auto x = random_element(g, rng);
  EXPECT_EQ(dilate(g, 1.0, x).coords(), x.coords());
  EXPECT_LE(rel(dilate(g, 3.0, dilate(g, 2.0, x)).coords(), dilate(g, 6.0, x).coords()), 1e-15);
}

TEST(Dilate, NegativeParameterConvention) {
  const CarnotGroup g(catalog::heisenberg());
  const auto x = g.exp(vec({1, 2, 3}));
  // h_{-2} g = h_2 (g^{-1})
  EXPECT_EQ(dilate(g, -2.0, x).coords(), vec({-2, -4, -12}));
  // Horizontal elements: agrees with scaling by t.
  EXPECT_EQ(dilate(g, -2.0, g.exp(vec({1, 2, 0}))).coords(), vec({-2, -4, 0}));
}

TEST(Conjugate, Examples) {
  const CarnotGroup g(catalog::heisenberg());
  const double t = 1.7;
  // e^{-tX} e^{Y} e^{tX} = e^{Y + t[Y,X]} = e^{Y - tZ}
  const auto c = conjugate(g, g.exp(vec({t, 0, 0})), g.exp(vec({0, 1, 0})));
  EXPECT_LE(rel(c.coords(), vec({0, 1, -t})), 1e-15);
  std::mt19937_64 rng(8);
  const auto x = random_element(g, rng);
  EXPECT_EQ(conjugate(g, g.identity(), x).coords(), x.coords());
  EXPECT_LE(conjugate(g, x, g.identity()).coords().norm(), 1e-15);
}

TEST(GroupLaw, AssociativityAndAutomorphism) {
  std::mt19937_64 rng(9);
  for (const auto& name : catalog::builtin_names()) {
    const CarnotGroup g(catalog::builtin(name));
    for (int trial = 0; trial < 500; ++trial) {
      const auto a = random_element(g, rng), b = random_element(g, rng), c = random_element(g, rng);
      EXPECT_LE(rel(bch(g, bch(g, a, b), c).coords(), bch(g, a, bch(g, b, c)).coords()), 1e-8) << name;
      const double t = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
      EXPECT_LE(rel(dilate(g, t, bch(g, a, b)).coords(), bch(g, dilate(g, t, a), dilate(g, t, b)).coords()), 1e-8)
          << name;
    }
  }
}

TEST(GroupLaw, OneParameterHorizontal) {
  std::mt19937_64 rng(10);
  const CarnotGroup g(catalog::engel());
  for (int trial = 0; trial < 100; ++trial) {
    const AlgebraVector v = g.algebra().embed_horizontal(random_vector(2, rng));
    const double t = std::uniform_real_distribution<double>(-3, 3)(rng);
    const double s = std::uniform_real_distribution<double>(-3, 3)(rng);
    const auto lhs = bch(g, dilate(g, t, g.exp(v)), dilate(g, s, g.exp(v)));
    EXPECT_LE(rel(lhs.coords(), dilate(g, t + s, g.exp(v)).coords()), 1e-13);
  }
}

TEST(GroupLaw, AbelianIsAddition) {
  std::mt19937_64 rng(11);
  const CarnotGroup g(catalog::abelian(3));
  const auto a = random_element(g, rng), b = random_element(g, rng);
  EXPECT_EQ(bch(g, a, b).coords(), a.coords() + b.coords());
}

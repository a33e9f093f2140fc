#include "carnot/catalog.hpp"
#include "carnot/path.hpp"

#include <gtest/gtest.h>

using namespace carnot;

namespace {

Segment seg(double d, std::initializer_list<double> u) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(u.size()));
  int i = 0;
  for (double x : u) v(i++) = x;
  return {d, v};
}

}  // namespace

TEST(HorizontalMetric, RejectsBadGram) {
  Eigen::MatrixXd g(2, 2);
  g << 1, 0.5, 0.4, 1;
  EXPECT_THROW(HorizontalMetric{g}, InputError);
  g << 1, 2, 2, 1;
  EXPECT_THROW(HorizontalMetric{g}, InputError);
  EXPECT_THROW(HorizontalMetric{Eigen::MatrixXd(2, 3)}, InputError);
}

TEST(HorizontalMetric, OrthonormalFactor) {
  Eigen::MatrixXd g(2, 2);
  g << 2, 0.5, 0.5, 1;
  HorizontalMetric m(g);
  EXPECT_LT((m.orthonormal().transpose() * m.orthonormal() - g).norm(), 1e-14);
  Eigen::VectorXd u(2);
  u << 1, -1;
  EXPECT_NEAR(m.norm(u), std::sqrt(2.0 - 1.0 + 1.0), 1e-14);
}

TEST(Path, SquareLoopEncloses) {
  // unit square traversed counterclockwise: ends at e^{Z}, length 4
  CarnotGroup g(catalog::heisenberg());
  ControlPath p{g.identity(), {seg(1, {1, 0}), seg(1, {0, 1}), seg(1, {-1, 0}), seg(1, {0, -1})}};
  const AlgebraVector end = path_endpoint(g, p).coords();
  EXPECT_NEAR(end(0), 0.0, 1e-15);
  EXPECT_NEAR(end(1), 0.0, 1e-15);
  EXPECT_NEAR(end(2), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(path_length(HorizontalMetric::identity(2), p), 4.0);
}

TEST(Path, Errors) {
  CarnotGroup g(catalog::heisenberg());
  ControlPath bad{g.identity(), {seg(1, {1, 0, 0})}};
  EXPECT_THROW(path_endpoint(g, bad), InputError);
  ControlPath zero{g.identity(), {seg(0, {1, 0})}};
  EXPECT_THROW(path_endpoint(g, zero), InputError);
}

TEST(Path, ReverseReturnsToStart) {
  CarnotGroup g(catalog::engel());
  ControlPath p{GroupElement((AlgebraVector(4) << 0.1, 0.2, 0.3, 0.4).finished()),
                {seg(0.5, {1, 2}), seg(1.5, {-0.3, 0.7}), seg(0.2, {2, 0})}};
  const ControlPath r = reversed(g, p);
  const AlgebraVector back = path_endpoint(g, r).coords();
  EXPECT_LT((back - p.basepoint.coords()).norm(), 1e-13);
  EXPECT_DOUBLE_EQ(path_length(HorizontalMetric::identity(2), r), path_length(HorizontalMetric::identity(2), p));
}

TEST(Path, DilationAndTranslation) {
  CarnotGroup g(catalog::engel());
  ControlPath p{g.identity(), {seg(1, {1, 0}), seg(1, {0, 1}), seg(0.5, {-1, 0.5})}};
  const double t = 1.7;
  const ControlPath d = dilated(g, p, t);
  EXPECT_LT((path_endpoint(g, d).coords() - dilate(g, t, path_endpoint(g, p)).coords()).norm(), 1e-13);
  EXPECT_NEAR(path_length(HorizontalMetric::identity(2), d), t * path_length(HorizontalMetric::identity(2), p), 1e-14);
  const GroupElement h((AlgebraVector(4) << 1, -2, 0.5, 3).finished());
  const ControlPath tr = translated(g, h, p);
  EXPECT_LT((path_endpoint(g, tr).coords() - bch(g, h, path_endpoint(g, p)).coords()).norm(), 1e-12);
}

TEST(Path, ConstantSpeedKeepsEndpoint) {
  CarnotGroup g(catalog::heisenberg());
  ControlPath p{g.identity(), {seg(2, {0.5, 0}), seg(1, {0, 0}), seg(0.25, {0, 4})}};
  HorizontalMetric m = HorizontalMetric::identity(2);
  const ControlPath c = constant_speed(m, p);
  EXPECT_EQ(c.segments.size(), 2u);
  for (const auto& s : c.segments) EXPECT_NEAR(m.norm(s.control), 1.0, 1e-15);
  EXPECT_LT((path_endpoint(g, c).coords() - path_endpoint(g, p).coords()).norm(), 1e-14);
}

TEST(CommutatorLadder, ReachesTargets) {
  for (const std::string name : {"heisenberg", "engel", "free2-3"}) {
    CarnotGroup g(catalog::builtin(name));
    AlgebraVector target(g.dim());
    for (int i = 0; i < g.dim(); ++i) target(i) = 0.3 * (i + 1) * (i % 2 ? -1 : 1);
    std::vector<Segment> segs;
    ASSERT_TRUE(commutator_ladder(g, target, segs)) << name;
    const AlgebraVector end = path_endpoint(g, {g.identity(), segs}).coords();
    EXPECT_LT((end - target).lpNorm<Eigen::Infinity>(), 1e-12) << name;
  }
}

TEST(CommutatorLadder, UnreachableDirection) {
  // layer 2 has a direction no bracket of layer 1 produces
  std::vector<double> c(4 * 4 * 4, 0.0);
  auto at = [](int i, int j, int l) { return static_cast<std::size_t>((i * 4 + j) * 4 + l); };
  c[at(0, 1, 2)] = 1;
  c[at(1, 0, 2)] = -1;
  GradedAlgebra a("degenerate", {2, 2}, c);
  CarnotGroup g(a);
  AlgebraVector target = a.zero();
  target(3) = 1.0;
  std::vector<Segment> segs;
  EXPECT_FALSE(commutator_ladder(g, target, segs));
}

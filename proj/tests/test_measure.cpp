#include "carnot/catalog.hpp"
#include "carnot/measure.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace carnot;

namespace {

const double kPi = std::acos(-1.0);

/// Volume of the Euclidean unit ball in R^n.
double unit_ball(int n) { return std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0 + 1.0); }

/// Box(e, v, eps) for an orthonormal layer 1 is swept out by a hyperplane
/// piece under a volume-preserving flow with unit normal speed |v|:
/// |v| * vol(End) with End a product of Euclidean balls.
double box_oracle(const GradedAlgebra& a, double vlen, double eps) {
  double vol = vlen * unit_ball(a.horizontal_dim() - 1) * std::pow(eps, a.horizontal_dim() - 1);
  for (int j = 2; j <= a.steps(); ++j) vol *= unit_ball(a.layer_dim(j)) * std::pow(eps, j * a.layer_dim(j));
  return vol;
}

}  // namespace

TEST(HomogeneousDimension, Builtins) {
  EXPECT_EQ(homogeneous_dimension(catalog::heisenberg()), 4);
  EXPECT_EQ(homogeneous_dimension(catalog::engel()), 7);
  EXPECT_EQ(homogeneous_dimension(catalog::free_step2(3)), 9);
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(homogeneous_dimension(catalog::abelian(n)), n);
}

TEST(HomogeneousDimension, JacobianOfDilation) {
  for (const std::string& name : catalog::builtin_names()) {
    CarnotGroup g(catalog::builtin(name));
    const double t = 1.3;
    Eigen::MatrixXd jac(g.dim(), g.dim());
    for (int i = 0; i < g.dim(); ++i) jac.col(i) = dilate_coords(g.algebra(), t, g.algebra().basis_vector(i));
    const double q = homogeneous_dimension(g.algebra());
    EXPECT_NEAR(jac.determinant(), std::pow(t, q), 1e-12 * std::pow(t, q)) << name;
    EXPECT_NEAR(dilation_jacobian_determinant(g.algebra(), t), std::pow(t, q), 1e-12 * std::pow(t, q)) << name;
  }
}

TEST(LeastSquares, ExactLine) {
  const DimensionFit f = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}

TEST(FitDimension, Preconditions) {
  VolumeEstimate a, b, c;
  a.radius = 1;
  a.volume = 1;
  b.radius = 2;
  b.volume = 16;
  EXPECT_THROW(fit_dimension({a, b}), InputError);
  c.radius = 3;
  c.volume = 81;
  EXPECT_THROW(fit_dimension({a, b, c}), InputError);  // span 3 < 4
  c.radius = 4;
  c.volume = 256;
  const DimensionFit f = fit_dimension({a, b, c});
  EXPECT_NEAR(f.slope, 4.0, 1e-12);
  EXPECT_EQ(f.r_min, 1.0);
  EXPECT_EQ(f.r_max, 4.0);
}

class AbelianBall : public ::testing::Test {
 protected:
  CcEstimator est{CarnotGroup(catalog::abelian(2)), std::nullopt, {}, 1};
  Calibration cal = calibrate(est, 100, 2);
};

TEST_F(AbelianBall, DiscArea) {
  EXPECT_NEAR(cal.constant.raw_max, 1.0, 1e-12);
  const BallSampler s(est, cal);
  const VolumeEstimate v = ball_volume(s, 1.0, 40000, 9);
  EXPECT_NEAR(v.volume, kPi, 3.0 * v.standard_error);
  EXPECT_EQ(v.band, 0);
}

TEST_F(AbelianBall, Errors) {
  const BallSampler s(est, cal);
  EXPECT_THROW(ball_volume(s, 1.0, 0, 1), InputError);
  EXPECT_THROW(ball_volume(s, -1.0, 10, 1), InputError);
  Calibration empty;
  EXPECT_THROW(BallSampler(est, empty), InputError);
}

TEST(HeisenbergBall, ScalingAndDeterminism) {
  CcEstimator est(CarnotGroup(catalog::heisenberg()), std::nullopt, {}, 7);
  const Calibration cal = calibrate(est, 150, 11);
  const BallSampler s(est, cal);
  const VolumeEstimate a = ball_volume(s, 0.5, 6000, 3), b = ball_volume(s, 1.0, 6000, 3);
  EXPECT_NEAR(b.volume / a.volume, 16.0, 0.15 * 16.0);
  EXPECT_LT(b.band_fraction, 0.03);
  EXPECT_EQ(b.boundary_hits, 0);
  const VolumeEstimate again = ball_volume(s, 1.0, 6000, 3, 3);
  EXPECT_EQ(again.volume, b.volume);
  EXPECT_EQ(again.inside, b.inside);
}

TEST(BoxSpec, MembershipAndEndSamples) {
  CarnotGroup g(catalog::heisenberg());
  Eigen::VectorXd v(2);
  v << 1, 0;
  const BoxSpec box(g, HorizontalMetric::identity(2), v, 0.3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    const AlgebraVector w = box.sample_end(rng);
    ASSERT_TRUE(box.in_end(w));
    const double s = u(rng);
    const AlgebraVector q = g.multiply(w, g.algebra().embed_horizontal(s * v));
    EXPECT_TRUE(box.in_box(q));
  }
  AlgebraVector far = g.algebra().zero();
  far(0) = 1.5;
  EXPECT_FALSE(box.in_box(far));
  EXPECT_THROW(BoxSpec(g, HorizontalMetric::identity(2), Eigen::VectorXd::Zero(2), 0.3), InputError);
}

TEST(BoxVolume, MatchesOracle) {
  for (const std::string name : {"abelian-3", "heisenberg", "engel"}) {
    CarnotGroup g(catalog::builtin(name));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(g.algebra().horizontal_dim());
    v(0) = 0.8;
    v(1) = 0.6;
    const BoxSpec box(g, HorizontalMetric::identity(v.size()), v, 0.4);
    const VolumeEstimate e = box_volume(box, 60000, 4);
    const double oracle = box_oracle(g.algebra(), 1.0, 0.4);
    EXPECT_NEAR(e.volume, oracle, 4.0 * e.standard_error + 1e-12) << name;
  }
}

TEST(BoxBallDensity, AbelianRatioConstant) {
  CcEstimator est(CarnotGroup(catalog::abelian(2)), std::nullopt, {}, 1);
  const Calibration cal = calibrate(est, 100, 2);
  const BallSampler s(est, cal);
  Eigen::VectorXd v(2);
  v << 1, 0;
  const DensityReport r = box_ball_density(s, v, 0.2, {0.1, 0.3, 1.0}, 40000, 5);
  EXPECT_LT(r.max_ratio / r.min_ratio, 1.05);
  // Box is a 2 beta t by t rectangle, ball radius (1 + beta) t
  EXPECT_NEAR(r.rows[0].ratio, 0.4 / (kPi * 1.44), 0.05 * 0.4 / (kPi * 1.44));
}

// Divergence of two radial geodesics in the Heisenberg group next to the
// same experiment for lines in the plane, then a quick look at a group
// loaded from a definition file.

#include "carnot/carnot.hpp"

#include <cstdio>
#include <string>

using namespace carnot;

int main(int argc, char** argv) {
  const std::string file = argc > 1 ? argv[1] : std::string(CARNOT_DEMO_DIR) + "/groups/heisenberg5.json";

  CcEstimator est(CarnotGroup(catalog::heisenberg()), std::nullopt, OptimizerBudget{}, 7);
  Eigen::VectorXd x(2);
  x << 1, 0;
  AlgebraVector y(3);
  y << 0, 1, 0;
  const auto grid = geometric_grid(1, 128, 8);
  const DivergenceFit f = divergence_profile(est, {x, y, grid});
  std::printf("heisenberg  X vs e^Y X: d(t) brackets\n");
  for (const auto& r : f.rows) std::printf("  t=%7.2f  [%.6f, %.6f]\n", r.t, r.lower, r.upper);
  std::printf("  exponent %.3f, alpha %.3f, beta %.3f, sandwich %s\n", f.exponent, f.alpha, f.beta,
              f.sandwich ? "holds" : "fails");

  const auto e2 = ModelSpace::euclidean(2);
  const Eigen::Vector2d o(0, 0), o1(0, 1), ex(1, 0), d(0.5, 0.8660254037844386);
  const DivergenceFit par = model_divergence(e2, e2.line(o, ex), e2.line(o1, ex), grid, "parallel");
  const DivergenceFit cross = model_divergence(e2, e2.line(o, ex), e2.line(o, d), grid, "crossing");
  std::printf("plane  parallel: %s, crossing: %s\n", par.classification.c_str(), cross.classification.c_str());
  std::printf("verdict: %s\n", obstruction_report(f, {par, cross}).verdict.c_str());

  const GradedAlgebra a = load_group_definition(file);
  std::printf("\n%s: dim %d, Q = %d\n", a.name().c_str(), a.dim(), homogeneous_dimension(a));
  CcEstimator est5(CarnotGroup(a), std::nullopt, OptimizerBudget{}, 7);
  AlgebraVector z = a.zero();
  z(a.dim() - 1) = 1.0;
  const DistanceEstimate dz = est5.estimate_displacement(z);
  std::printf("  d(e, e^Z) in [%.5f, %.5f] (%s / %s)\n", dz.lower, dz.upper, dz.lower_method.c_str(),
              dz.upper_method.c_str());
  return 0;
}

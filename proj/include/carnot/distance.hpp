#pragma once

#include "carnot/optimizer.hpp"
#include "carnot/path.hpp"
#include "carnot/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace carnot {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr int kSqpIterations = 200;

/// Thrown when the optimizer or a calibration cannot produce a certified bound.
class OptimizerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BallBoxConstant {
  double A = 1.0;
  double raw_max = 1.0;  // largest observed gauge / upper before the margin
  int samples = 0;
  double confidence_radius = 0.0;
  std::uint64_t seed = 0;
  /// Per-layer extent: max over samples of |v_i|^{1/i} / upper.
  std::vector<double> extents;
};

struct DistanceEstimate {
  double lower = 0.0;
  double upper = kInfinity;
  std::string lower_method;
  std::string upper_method;
  bool lower_empirical = false;  // lower relies on a calibrated constant
  bool feasible = true;          // false: upper is not certified (see failure)
  bool reachable = true;
  ControlPath witness;
  double endpoint_residual = 0.0;
  int segments = 0;
  std::string failure;
};

/**
 * Exact sub-Riemannian distance in the Heisenberg group with [X,Y] = Z and
 * orthonormal X, Y, from the identity to a point whose horizontal part has
 * length r and whose Z coordinate has absolute value area. Geodesics are
 * circular arcs; the arc half-angle is found by bisection and the lower end of
 * the final bracket is used, so the value never exceeds the true distance.
 */
inline double heisenberg_distance(double r, double area) {
  const double pi = std::acos(-1.0);
  area = std::abs(area);
  r = std::abs(r);
  if (area == 0.0) return r;
  if (r == 0.0) return std::sqrt(4.0 * pi * area);
  const double target = area / (r * r);
  auto mu = [](double phi) {
    const double s = std::sin(phi);
    double num;
    if (phi < 1e-3) {
      const double x = 2.0 * phi, x2 = x * x;
      num = x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
    } else {
      num = 2.0 * phi - std::sin(2.0 * phi);
    }
    return num / (8.0 * s * s);
  };
  double lo = 0.0, hi = pi;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (mu(mid) < target ? lo : hi) = mid;
  }
  if (lo == 0.0) return r;
  return r * lo / std::sin(lo);
}

/**
 * d_cc estimator for one group and horizontal metric.
 *
 * Every target is first scaled by the dilation to gauge
 * |p_1| + sum_{i>1} |p_i|^{1/i} = 1, solved there, and the witness dilated
 * back, which is exact because h_t is a homothety.
 */
class CcEstimator {
 public:
  struct UnitSolution {
    SqpState state;  // coefficients, multipliers, Lagrangian Hessian
    int segments = 0;
    double length = kInfinity;  // includes the repair path
    double residual = kInfinity;
    std::vector<Segment> repair;
    bool feasible = false;
  };

  explicit CcEstimator(CarnotGroup g, std::optional<HorizontalMetric> metric = std::nullopt,
                       OptimizerBudget budget = {}, std::uint64_t seed = 0)
      : group_(std::move(g)),
        metric_(metric ? *metric : HorizontalMetric::identity(group_.algebra().horizontal_dim())),
        budget_(budget),
        seed_(seed) {
    const GradedAlgebra& a = group_.algebra();
    if (metric_.dim() != a.horizontal_dim()) throw InputError("metric dimension does not match layer 1");
    if (budget_.segments < 1 || budget_.max_segments < budget_.segments || budget_.basis < 1 || budget_.starts < 1) {
      throw InputError("invalid optimizer budget");
    }
    const int d1 = a.horizontal_dim();
    Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(a.dim(), d1);
    dirs.topRows(d1).setIdentity();
    for (int m = budget_.segments; m <= budget_.max_segments; m *= 2) {
      models_.emplace(m, std::make_shared<const EndpointModel>(group_, m, budget_.basis, dirs, metric_.gram()));
    }
    span_ = horizontal_generated_span(a);
    prepare_quotient();
  }

  const CarnotGroup& group() const { return group_; }
  const HorizontalMetric& metric() const { return metric_; }
  const OptimizerBudget& budget() const { return budget_; }
  std::uint64_t seed() const { return seed_; }
  const EndpointModel& model(int segments) const { return *models_.at(segments); }

  void set_ballbox(const BallBoxConstant& c) { ballbox_ = c; }
  const std::optional<BallBoxConstant>& ballbox() const { return ballbox_; }

  /// |p_1|_G + sum_{i>1} |p_i|^{1/i}; homogeneous of degree 1 under dilation.
  double gauge(const AlgebraVector& p) const {
    const GradedAlgebra& a = group_.algebra();
    double g = metric_.norm(a.layer(p, 1));
    for (int i = 2; i <= a.steps(); ++i) g += std::pow(a.layer(p, i).norm(), 1.0 / i);
    return g;
  }

  bool reachable(const AlgebraVector& p) const {
    if (span_.cols() == group_.dim()) return true;
    const Eigen::VectorXd resid = p - span_ * (span_.transpose() * p);
    return resid.norm() <= 1e-10 * std::max(1.0, p.norm());
  }

  double lower_abelian(const AlgebraVector& p) const { return metric_.norm(group_.algebra().layer(p, 1)); }

  /**
   * Lower bound from a functional l on layer 2. l(p_2) is the l([u, v])
   * area of the horizontal curve, and reflecting coordinate planes turns it
   * into at most sigma_max times the standard symplectic area of a curve of
   * the same length in a Heisenberg group H^k, whose distance depends on
   * |chord| and area only. Rank 2 is the quotient onto H x R^m.
   */
  double lower_quotient(const AlgebraVector& p) const {
    const GradedAlgebra& a = group_.algebra();
    if (a.steps() < 2) return 0.0;
    const Eigen::VectorXd p1 = metric_.orthonormal() * a.layer(p, 1);
    const Eigen::VectorXd p2 = a.layer(p, 2);
    const int d2 = a.layer_dim(2);
    std::vector<Eigen::VectorXd> functionals;
    if (p2.norm() > 0.0) functionals.push_back(p2 / p2.norm());
    if (d2 > 1) {
      for (int l = 0; l < d2; ++l) functionals.push_back(Eigen::VectorXd::Unit(d2, l));
    } else if (functionals.empty()) {
      functionals.push_back(Eigen::VectorXd::Ones(1));
    }
    double best = 0.0;
    for (const auto& ell : functionals) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p1.size(), p1.size());
      for (int l = 0; l < d2; ++l) w += ell(l) * layer2_forms_[l];
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeFullU);
      const auto& sv = svd.singularValues();
      if (sv.size() < 2 || sv(0) <= 1e-14) continue;
      int rank = 0;
      while (rank < sv.size() && sv(rank) > 1e-12 * sv(0)) ++rank;
      const double r = (svd.matrixU().leftCols(rank).transpose() * p1).norm();
      best = std::max(best, heisenberg_distance(r, ell.dot(p2) / sv(0)));
    }
    return best;
  }

  double lower_ballbox(const AlgebraVector& p) const {
    if (!ballbox_) return 0.0;
    return gauge(p) / ballbox_->A;
  }

  /// Best lower bound for d_cc(e^0, e^p), with provenance.
  DistanceEstimate lower_bound(const AlgebraVector& p) const {
    DistanceEstimate e;
    if (!reachable(p)) {
      e.lower = kInfinity;
      e.lower_method = "unreachable";
      e.reachable = false;
      return e;
    }
    e.lower = lower_abelian(p);
    e.lower_method = "abelian";
    const double q = lower_quotient(p);
    if (q > e.lower) {
      e.lower = q;
      e.lower_method = "heisenberg-quotient";
    }
    const double b = lower_ballbox(p);
    if (b > e.lower) {
      e.lower = b;
      e.lower_method = "ballbox";
      e.lower_empirical = true;
    }
    return e;
  }

  /// Witness search for a target normalized to gauge 1: SQP from warm starts
  /// and seeded random starts, augmented Lagrangian where SQP stalls, segment
  /// doubling when nothing is feasible, commutator ladder as last resort.
  UnitSolution solve_unit(const AlgebraVector& target, const std::vector<UnitSolution>& warm = {}) const {
    const GradedAlgebra& a = group_.algebra();
    const int d1 = a.horizontal_dim();
    UnitSolution best;
    UnitSolution best_infeasible;
    const double tol = unit_tolerance();
    std::mt19937_64 rng = derived_rng(seed_, target_stream(target));
    std::normal_distribution<double> normal;
    std::vector<UnitSolution> seeds = warm;
    for (int m = budget_.segments; m <= budget_.max_segments; m *= 2) {
      const EndpointModel& mod = model(m);
      auto consider = [&](const SolveResult& r, const SqpState& st) {
        UnitSolution s{st, m, r.length, r.residual, {}, r.residual <= tol};
        s.state.a = r.a;
        s.state.multipliers = r.multipliers;
        if (s.feasible && s.length < best.length) best = s;
        if (!s.feasible && s.residual < best_infeasible.residual) best_infeasible = s;
        return s.feasible;
      };
      for (const auto& w : seeds) {
        SqpState st = w.state;
        if (w.segments != m) {
          st.a = model(w.segments).transfer(w.state.a, mod);
          st.hessian.resize(0, 0);
        }
        consider(sqp(mod, target, st, kSqpIterations), st);
      }
      for (int s = 0; s < budget_.starts; ++s) {
        Eigen::VectorXd a0 = mod.constant(a.layer(target, 1));
        for (int k = 1; k < mod.basis(); ++k) {
          for (int i = 0; i < d1; ++i) a0(k * d1 + i) = 1.5 * normal(rng) / k;
        }
        SqpState st{a0, {}, {}};
        if (consider(sqp(mod, target, st, kSqpIterations), st)) continue;
        SqpState fallback{a0, {}, {}};
        consider(augmented_lagrangian(mod, target, a0, Eigen::VectorXd(), 100.0, budget_), fallback);
      }
      if (best.feasible) break;
      seeds.clear();
      if (best_infeasible.segments > 0) seeds.push_back(best_infeasible);
    }
    if (best.feasible) return best;
    if (best_infeasible.segments > 0 && best_infeasible.residual < 1e-2) {
      const EndpointModel& mod = model(best_infeasible.segments);
      const AlgebraVector reached = mod.endpoint(best_infeasible.state.a);
      std::vector<Segment> ladder;
      if (commutator_ladder(group_, group_.multiply(-reached, target), ladder)) {
        ControlPath full = unit_path(best_infeasible.state.a, best_infeasible.segments);
        full.segments.insert(full.segments.end(), ladder.begin(), ladder.end());
        const double resid = (path_endpoint(group_, full).coords() - target).lpNorm<Eigen::Infinity>();
        if (resid <= tol) {
          best_infeasible.repair = ladder;
          best_infeasible.length = path_length(metric_, full);
          best_infeasible.residual = resid;
          best_infeasible.feasible = true;
        }
      }
    }
    return best_infeasible;
  }

  /// Local refinement from a nearby solution; no random starts.
  UnitSolution refine_unit(const AlgebraVector& target, const UnitSolution& warm, int iterations) const {
    SqpState st = warm.state;
    const SolveResult r = sqp(model(warm.segments), target, st, iterations);
    st.a = r.a;
    return {st, warm.segments, r.length, r.residual, {}, r.residual <= unit_tolerance()};
  }

  /// Cheap certified upper bound from a nearby solution: projection only.
  UnitSolution project_unit(const AlgebraVector& target, const UnitSolution& warm) const {
    const SolveResult r = project_feasible(model(warm.segments), target, warm.state.a);
    SqpState st = warm.state;
    st.a = r.a;
    return {st, warm.segments, r.length, r.residual, {}, r.residual <= unit_tolerance()};
  }

  double unit_tolerance() const { return budget_.tolerance * 1e-2; }

  /// Witness from the identity for a unit-gauge solution.
  ControlPath unit_path(const Eigen::VectorXd& a, int segments) const {
    const Eigen::MatrixXd u = model(segments).controls_of(a);
    ControlPath p{group_.identity(), {}};
    for (int j = 0; j < segments; ++j) p.segments.push_back({1.0 / segments, u.col(j)});
    return p;
  }

  /// Two-sided estimate of d_cc(e^0, e^p).
  DistanceEstimate estimate_displacement(const AlgebraVector& p, const std::vector<UnitSolution>& warm = {}) const {
    group_.algebra().require_compatible(p);
    DistanceEstimate e = lower_bound(p);
    if (!e.reachable) {
      e.upper_method = "unreachable";
      return e;
    }
    const GradedAlgebra& a = group_.algebra();
    const double rho = gauge(p);
    e.witness.basepoint = group_.identity();
    if (rho == 0.0) {
      e.upper = 0.0;
      e.upper_method = "identity";
      return e;
    }
    // Rounding in BCH products leaves tiny higher layers on horizontal
    // displacements; below the endpoint tolerance the radial segment counts.
    const double vertical = (p - a.project(p, 1)).lpNorm<Eigen::Infinity>();
    if (vertical <= 1e-3 * budget_.tolerance * std::max(1.0, p.lpNorm<Eigen::Infinity>())) {
      e.witness.segments.push_back({1.0, a.layer(p, 1)});
      e.upper = path_length(metric_, e.witness);
      e.upper_method = "radial";
      e.segments = 1;
      e.endpoint_residual = vertical;
      return e;
    }
    const AlgebraVector unit = dilate_coords(a, 1.0 / rho, p);
    const UnitSolution s = solve_unit(unit, warm);
    finish(e, p, rho, s);
    return e;
  }

  /// Fills the upper bound of e from a unit-gauge solution scaled by rho.
  void finish(DistanceEstimate& e, const AlgebraVector& p, double rho, const UnitSolution& s) const {
    e.segments = s.segments;
    e.upper_method = s.repair.empty() ? "optimized" : "optimized+ladder";
    if (s.segments == 0) {
      e.feasible = false;
      e.failure = "optimizer produced no candidate";
      e.upper = kInfinity;
      return;
    }
    ControlPath unit = unit_path(s.state.a, s.segments);
    unit.segments.insert(unit.segments.end(), s.repair.begin(), s.repair.end());
    e.witness = dilated(group_, unit, rho);
    const AlgebraVector end = path_endpoint(group_, e.witness).coords();
    e.endpoint_residual = (end - p).lpNorm<Eigen::Infinity>();
    e.upper = path_length(metric_, e.witness);
    const double scale = std::max(1.0, p.lpNorm<Eigen::Infinity>());
    if (!s.feasible || e.endpoint_residual > budget_.tolerance * scale) {
      e.feasible = false;
      e.failure = "endpoint residual " + std::to_string(e.endpoint_residual) + " above tolerance";
    }
  }

  /// Two-sided estimate of d_cc(x, y); the witness starts at x.
  DistanceEstimate estimate(const GroupElement& x, const GroupElement& y) const {
    DistanceEstimate e = estimate_displacement(displacement(group_, x, y));
    e.witness = translated(group_, x, e.witness);
    return e;
  }

 private:
  std::uint64_t target_stream(const AlgebraVector& t) const {
    std::uint64_t h = 0x243f6a8885a308d3ull;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      std::uint64_t bits;
      const double v = t(i);
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 0x100000001b3ull;
      h ^= h >> 29;
    }
    return h;
  }

  void prepare_quotient() {
    const GradedAlgebra& a = group_.algebra();
    if (a.steps() < 2) return;
    const int d1 = a.horizontal_dim();
    const int off = a.layer_offset(2);
    const Eigen::MatrixXd rinv = metric_.orthonormal_inverse();
    for (int l = 0; l < a.layer_dim(2); ++l) {
      Eigen::MatrixXd w(d1, d1);
      for (int i = 0; i < d1; ++i) {
        for (int j = 0; j < d1; ++j) w(i, j) = a.c(i, j, off + l);
      }
      layer2_forms_.push_back(rinv.transpose() * w * rinv);
    }
  }

  CarnotGroup group_;
  HorizontalMetric metric_;
  OptimizerBudget budget_;
  std::uint64_t seed_;
  std::map<int, std::shared_ptr<const EndpointModel>> models_;
  Eigen::MatrixXd span_;
  std::vector<Eigen::MatrixXd> layer2_forms_;
  std::optional<BallBoxConstant> ballbox_;
};

/// Upper bound with witness; throws OptimizerFailure instead of returning an uncertified value.
inline DistanceEstimate cc_upper(const CcEstimator& est, const GroupElement& x, const GroupElement& y) {
  DistanceEstimate e = est.estimate(x, y);
  if (!e.feasible) throw OptimizerFailure("cc_upper: " + e.failure);
  return e;
}

inline double cc_lower_abelian(const CcEstimator& est, const GroupElement& x, const GroupElement& y) {
  return est.lower_abelian(displacement(est.group(), x, y));
}

inline double cc_lower_ballbox(const CcEstimator& est, const GroupElement& x, const GroupElement& y,
                               const BallBoxConstant& c) {
  return est.gauge(displacement(est.group(), x, y)) / c.A;
}

/// n e^{tv} for horizontal v.
inline GroupElement radial_geodesic(const CarnotGroup& g, const GroupElement& n, const AlgebraVector& v, double t) {
  g.algebra().require_compatible(v);
  if (!g.algebra().is_horizontal(v)) throw InputError("radial geodesic direction must lie in layer 1");
  return bch(g, n, GroupElement(t * v));
}

}  // namespace carnot

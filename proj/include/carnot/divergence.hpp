#pragma once

#include "carnot/measure.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace carnot {

/// gamma_1(t) = h_t e^v and gamma_2(t) = e^w h_t e^v.
struct GeodesicPair {
  Eigen::VectorXd v;  // layer 1
  AlgebraVector w;
  std::vector<double> t_grid;
};

struct DivergenceRow {
  double t = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool feasible = true;
};

struct DivergenceFit {
  std::string label;
  std::vector<DivergenceRow> rows;
  double exponent = 0.0;
  double r_squared = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool sandwich = false;  // C1 t^alpha <= lower and upper <= C2 t^beta on every row
  bool complete = true;
  std::string classification;  // bounded, linear, or neither
};

/// (h_t e^v)^{-1} e^w h_t e^v, which is d_cc-equivalent to the pair at time t.
inline AlgebraVector divergence_displacement(const CarnotGroup& g, const Eigen::VectorXd& v, const AlgebraVector& w,
                                             double t) {
  const GroupElement ev(g.algebra().embed_horizontal(v));
  const GroupElement left = bch(g, dilate(g, t, inverse(ev)), GroupElement(w));
  return bch(g, left, dilate(g, t, ev)).coords();
}

namespace detail {

inline double geometric_tolerance(double a, double b) { return 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

/// Exponent by OLS of log midpoint on log |t|; alpha and beta as the extreme
/// consecutive log-slopes of the lower and upper profiles; C1, C2 as the
/// min / max of f / t^alpha, f / t^beta over the grid.
inline void fit_profile(DivergenceFit& f) {
  std::vector<double> lt, lm;
  for (const auto& r : f.rows) {
    if (!r.feasible || !(r.lower > 0.0) || !(r.upper > 0.0)) continue;
    lt.push_back(std::log(std::abs(r.t)));
    lm.push_back(std::log(0.5 * (r.lower + r.upper)));
  }
  if (lt.size() < 2) {
    f.complete = false;
    return;
  }
  const DimensionFit ls = least_squares(lt, lm);
  f.exponent = ls.slope;
  f.r_squared = ls.r_squared;
  double lo_slope = kInfinity, hi_slope = -kInfinity;
  for (std::size_t i = 1; i < f.rows.size(); ++i) {
    const auto& p = f.rows[i - 1];
    const auto& q = f.rows[i];
    const double dt = std::log(std::abs(q.t)) - std::log(std::abs(p.t));
    if (dt == 0.0 || !(p.lower > 0 && q.lower > 0 && p.upper > 0 && q.upper > 0)) continue;
    lo_slope = std::min(lo_slope, (std::log(q.lower) - std::log(p.lower)) / dt);
    hi_slope = std::max(hi_slope, (std::log(q.upper) - std::log(p.upper)) / dt);
  }
  if (!std::isfinite(lo_slope)) {
    lo_slope = hi_slope = f.exponent;
  }
  f.alpha = lo_slope;
  f.beta = hi_slope;
  f.c1 = kInfinity;
  f.c2 = 0.0;
  for (const auto& r : f.rows) {
    const double at = std::abs(r.t);
    f.c1 = std::min(f.c1, r.lower / std::pow(at, f.alpha));
    f.c2 = std::max(f.c2, r.upper / std::pow(at, f.beta));
  }
  f.sandwich = true;
  for (const auto& r : f.rows) {
    const double at = std::abs(r.t);
    const double lo = f.c1 * std::pow(at, f.alpha), hi = f.c2 * std::pow(at, f.beta);
    f.sandwich = f.sandwich && lo <= r.lower + geometric_tolerance(lo, r.lower) &&
                 r.upper <= hi + geometric_tolerance(hi, r.upper);
  }
}

/**
 * bounded: the running maximum of f is flat over the upper half of the grid
 * (log-log slope below 0.01). linear: f/t at the last point agrees within 10%
 * with f/t at the middle of the upper half.
 */
inline std::string classify_growth(const std::vector<DivergenceRow>& rows) {
  if (rows.size() < 3) return "neither";
  std::vector<double> lt, lm;
  double running = 0.0;
  const std::size_t half = rows.size() / 2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    running = std::max(running, rows[i].upper);
    if (i >= half) {
      lt.push_back(std::log(std::abs(rows[i].t)));
      lm.push_back(std::log(std::max(running, 1e-300)));
    }
  }
  if (running == 0.0 || least_squares(lt, lm).slope < 0.01) return "bounded";
  const auto& last = rows.back();
  const auto& mid = rows[half + (rows.size() - half) / 2];
  const double a = last.upper / std::abs(last.t), b = mid.upper / std::abs(mid.t);
  if (a > 0 && b > 0 && std::abs(a / b - 1.0) <= 0.10) return "linear";
  return "neither";
}

}  // namespace detail

/// f(t) = d_cc(gamma_1(t), gamma_2(t)) bracketed on the grid, with the
/// log-log exponent and sandwich constants.
inline DivergenceFit divergence_profile(const CcEstimator& est, const GeodesicPair& pair, int threads = 1) {
  const CarnotGroup& g = est.group();
  if (pair.v.size() != g.algebra().horizontal_dim()) throw InputError("divergence v must be a layer-1 vector");
  g.algebra().require_compatible(pair.w);
  if (pair.t_grid.size() < 2) throw InputError("divergence needs at least two t values");
  for (double t : pair.t_grid) {
    if (!(std::abs(t) >= 1.0)) throw InputError("divergence t values must satisfy |t| >= 1");
  }
  DivergenceFit f;
  f.label = "carnot";
  f.rows.resize(pair.t_grid.size());
  parallel_for(pair.t_grid.size(), threads, [&](std::size_t i) {
    const double t = pair.t_grid[i];
    const DistanceEstimate e = est.estimate_displacement(divergence_displacement(g, pair.v, pair.w, t));
    f.rows[i] = {t, e.lower, e.feasible ? e.upper : kInfinity, e.feasible};
  });
  for (const auto& r : f.rows) f.complete = f.complete && r.feasible;
  detail::fit_profile(f);
  f.classification = detail::classify_growth(f.rows);
  return f;
}

/// Closed-form constant curvature spaces: Euclidean R^n, the hyperbolic
/// plane (hyperboloid model) and the round sphere S^2.
class ModelSpace {
 public:
  enum class Kind { Euclidean, Hyperbolic, Sphere };

  struct Line {
    Eigen::VectorXd point;
    Eigen::VectorXd direction;  // unit tangent at point
  };

  static ModelSpace euclidean(int n) {
    if (n < 1) throw InputError("euclidean dimension must be positive");
    return ModelSpace(Kind::Euclidean, n, 0.0);
  }
  static ModelSpace hyperbolic(double curvature = -1.0) {
    if (!(curvature < 0.0)) throw InputError("hyperbolic curvature must be negative");
    return ModelSpace(Kind::Hyperbolic, 2, curvature);
  }
  static ModelSpace sphere(double curvature = 1.0) {
    if (!(curvature > 0.0)) throw InputError("sphere curvature must be positive");
    return ModelSpace(Kind::Sphere, 2, curvature);
  }

  Kind kind() const { return kind_; }
  int dim() const { return n_; }
  double curvature() const { return kappa_; }
  std::string name() const {
    switch (kind_) {
      case Kind::Euclidean: return "euclidean-" + std::to_string(n_);
      case Kind::Hyperbolic: return "hyperbolic";
      case Kind::Sphere: return "sphere";
    }
    return "";
  }

  /// Unit-speed geodesic through a point. For the curved models the point is
  /// given in ambient R^3 coordinates (hyperboloid or unit sphere) and the
  /// direction is projected onto its tangent plane.
  Line line(Eigen::VectorXd point, Eigen::VectorXd direction) const {
    const int amb = kind_ == Kind::Euclidean ? n_ : 3;
    if (point.size() != amb || direction.size() != amb) throw InputError("model line has wrong ambient dimension");
    if (kind_ == Kind::Euclidean) {
      if (direction.norm() == 0.0) throw InputError("model line direction must be nonzero");
      return {point, direction.normalized()};
    }
    if (kind_ == Kind::Sphere) {
      point.normalize();
      direction -= direction.dot(point) * point;
      if (direction.norm() == 0.0) throw InputError("model line direction must be tangent");
      return {point, direction.normalized()};
    }
    if (!(minkowski(point, point) < 0.0) || point(2) <= 0.0) throw InputError("point is not on the hyperboloid");
    point /= std::sqrt(-minkowski(point, point));
    direction += minkowski(direction, point) * point;
    const double len = minkowski(direction, direction);
    if (!(len > 0.0)) throw InputError("model line direction must be tangent");
    return {point, direction / std::sqrt(len)};
  }

  Eigen::VectorXd at(const Line& l, double t) const {
    switch (kind_) {
      case Kind::Euclidean: return l.point + t * l.direction;
      case Kind::Hyperbolic: {
        const double s = std::sqrt(-kappa_) * t;
        return std::cosh(s) * l.point + std::sinh(s) * l.direction;
      }
      case Kind::Sphere: {
        const double s = std::sqrt(kappa_) * t;
        return std::cos(s) * l.point + std::sin(s) * l.direction;
      }
    }
    return {};
  }

  double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    switch (kind_) {
      case Kind::Euclidean: return (x - y).norm();
      case Kind::Hyperbolic: return std::acosh(std::max(1.0, -minkowski(x, y))) / std::sqrt(-kappa_);
      case Kind::Sphere: {
        // atan2 form stays accurate for nearby and antipodal points
        const Eigen::Vector3d a = x.head<3>(), b = y.head<3>();
        const double c = a.dot(b), s = a.cross(b).norm();
        return std::atan2(s, c) / std::sqrt(kappa_);
      }
    }
    return 0.0;
  }

 private:
  ModelSpace(Kind k, int n, double kappa) : kind_(k), n_(n), kappa_(kappa) {}
  static double minkowski(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a(0) * b(0) + a(1) * b(1) - a(2) * b(2);
  }

  Kind kind_;
  int n_;
  double kappa_;
};

/// Exact d(line1(t), line2(t)) on the grid, classified bounded or linear.
inline DivergenceFit model_divergence(const ModelSpace& m, const ModelSpace::Line& l1, const ModelSpace::Line& l2,
                                      const std::vector<double>& t_grid, std::string label = "") {
  if (t_grid.size() < 3) throw InputError("model divergence needs at least three t values");
  DivergenceFit f;
  f.label = label.empty() ? m.name() : label;
  for (double t : t_grid) {
    const double d = m.distance(m.at(l1, t), m.at(l2, t));
    f.rows.push_back({t, d, d, true});
  }
  detail::fit_profile(f);
  f.classification = detail::classify_growth(f.rows);
  return f;
}

struct ObstructionReport {
  std::string verdict;  // "obstruction witnessed" or "inconclusive"
  double exponent = 0.0;
  double margin = 0.1;
  std::vector<std::string> diagnostics;
};

/**
 * Empirical witness: the Carnot pair diverges with an exponent strictly
 * inside (margin, 1 - margin) while every model pair is bounded or linear.
 */
inline ObstructionReport obstruction_report(const DivergenceFit& carnot_fit, const std::vector<DivergenceFit>& model_fits,
                                            double margin = 0.1) {
  ObstructionReport r;
  r.exponent = carnot_fit.exponent;
  r.margin = margin;
  bool ok = true;
  if (!carnot_fit.complete) {
    ok = false;
    r.diagnostics.push_back("carnot profile incomplete");
  }
  if (!(carnot_fit.exponent > margin && carnot_fit.exponent < 1.0 - margin)) {
    ok = false;
    r.diagnostics.push_back("carnot exponent " + std::to_string(carnot_fit.exponent) + " outside (" +
                            std::to_string(margin) + ", " + std::to_string(1.0 - margin) + ")");
  }
  if (model_fits.empty()) {
    ok = false;
    r.diagnostics.push_back("no model pairs");
  }
  for (const auto& m : model_fits) {
    if (m.classification != "bounded" && m.classification != "linear") {
      ok = false;
      r.diagnostics.push_back("model pair " + m.label + " is " + m.classification);
    }
  }
  r.verdict = ok ? "obstruction witnessed" : "inconclusive";
  return r;
}

/// Geometric grid lo, lo*r, ..., hi with n points.
inline std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > 0.0) || n < 1) throw InputError("geometric grid needs positive bounds and n >= 1");
  if (n == 1) {
    if (lo != hi) throw InputError("single-point grid needs lo == hi");
    return {lo};
  }
  if (!(hi > lo)) throw InputError("geometric grid needs lo < hi");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

}  // namespace carnot

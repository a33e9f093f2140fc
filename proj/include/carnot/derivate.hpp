#pragma once

#include "carnot/measure.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace carnot {

/// Raised when a distance exceeds its declared Lipschitz bound against d_cc.
class LipschitzViolation : public std::runtime_error {
 public:
  LipschitzViolation(const std::string& what, GroupElement x, GroupElement y, double value, double bound)
      : std::runtime_error(what), x_(std::move(x)), y_(std::move(y)), value_(value), bound_(bound) {}
  const GroupElement& x() const { return x_; }
  const GroupElement& y() const { return y_; }
  double value() const { return value_; }
  double bound() const { return bound_; }

 private:
  GroupElement x_, y_;
  double value_, bound_;
};

/// A distance with a declared Lipschitz constant against d_cc. The evaluator
/// must be pure and safe to call concurrently.
struct LipschitzDistance {
  std::string name;
  std::function<double(const GroupElement&, const GroupElement&)> evaluate;
  double lipschitz = 1.0;
  bool approximate = false;  // value is itself an optimized upper bound
};

namespace detail {

inline std::string format_coords(const AlgebraVector& v) {
  std::ostringstream s;
  s.precision(17);
  s << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? "," : "") << v(i);
  s << "]";
  return s.str();
}

inline void check_pair(const LipschitzDistance& d, const GroupElement& x, const GroupElement& y, double value,
                       double cc_upper) {
  const double bound = d.lipschitz * cc_upper;
  if (value > bound * (1.0 + 1e-9) + 1e-12) {
    std::ostringstream s;
    s.precision(17);
    s << d.name << " violates its Lipschitz constant " << d.lipschitz << " at x=" << format_coords(x.coords())
      << " y=" << format_coords(y.coords()) << ": d=" << value << " > L*d_cc_upper=" << bound;
    throw LipschitzViolation(s.str(), x, y, value, bound);
  }
}

}  // namespace detail

/// d_cc itself: the certified upper bound (exact along radial geodesics).
inline LipschitzDistance cc_distance(std::shared_ptr<const CcEstimator> est) {
  return {"cc", [est](const GroupElement& x, const GroupElement& y) {
            const DistanceEstimate e = est->estimate(x, y);
            if (!e.feasible) throw OptimizerFailure("cc distance: " + e.failure);
            return e.upper;
          },
          1.0, false};
}

/**
 * Distance of the left-invariant Riemannian completion: the horizontal
 * metric on layer 1 extended by unit weights on an orthogonal completion.
 * Horizontal paths keep their length, so it never exceeds d_cc. Evaluated as
 * the shortest of the one-parameter subgroup, an SQP path over full-algebra
 * controls started from it, and the d_cc witness.
 */
class RiemannianEstimator {
 public:
  explicit RiemannianEstimator(std::shared_ptr<const CcEstimator> cc, int segments = 32) : cc_(std::move(cc)) {
    const GradedAlgebra& a = cc_->group().algebra();
    const int n = a.dim(), d1 = a.horizontal_dim();
    gram_ = Eigen::MatrixXd::Identity(n, n);
    gram_.topLeftCorner(d1, d1) = cc_->metric().gram();
    model_ = std::make_shared<const EndpointModel>(cc_->group(), segments, cc_->budget().basis,
                                                   Eigen::MatrixXd::Identity(n, n), gram_);
  }

  double norm(const AlgebraVector& p) const { return std::sqrt(std::max(0.0, p.dot(gram_ * p))); }

  double distance(const GroupElement& x, const GroupElement& y) const {
    const AlgebraVector p = displacement(cc_->group(), x, y);
    const GradedAlgebra& a = cc_->group().algebra();
    double best = norm(p);
    // the layer-1 projection is 1-Lipschitz, so horizontal targets are done
    if (best == 0.0 || (p - a.project(p, 1)).norm() <= 1e-12 * std::max(1.0, p.norm())) return best;
    SqpState st{model_->constant(p), {}, {}};
    const SolveResult r = sqp(*model_, p, st, kSqpIterations);
    if (r.residual <= cc_->budget().tolerance * std::max(1.0, p.lpNorm<Eigen::Infinity>())) {
      best = std::min(best, r.length);
    }
    const DistanceEstimate e = cc_->estimate_displacement(p);
    if (e.feasible) best = std::min(best, e.upper);
    return best;
  }

 private:
  std::shared_ptr<const CcEstimator> cc_;
  Eigen::MatrixXd gram_;
  std::shared_ptr<const EndpointModel> model_;
};

inline LipschitzDistance riemannian_distance(std::shared_ptr<const CcEstimator> est) {
  auto r = std::make_shared<const RiemannianEstimator>(est);
  return {"riemannian", [r](const GroupElement& x, const GroupElement& y) { return r->distance(x, y); }, 1.0, true};
}

/// |layer 1 of x^{-1} y|: pullback of the abelianization, 1-Lipschitz.
inline LipschitzDistance abelian_distance(std::shared_ptr<const CcEstimator> est) {
  return {"abelian",
          [est](const GroupElement& x, const GroupElement& y) {
            return est->lower_abelian(displacement(est->group(), x, y));
          },
          1.0, false};
}

/// d_cc^power for power in (0, 1): a metric, but not Lipschitz at small scales.
inline LipschitzDistance snowflake_distance(std::shared_ptr<const CcEstimator> est, double power = 0.5) {
  if (!(power > 0.0 && power <= 1.0)) throw InputError("snowflake power must be in (0, 1]");
  auto base = cc_distance(est);
  return {"snowflake", [base, power](const GroupElement& x, const GroupElement& y) {
            return std::pow(base.evaluate(x, y), power);
          },
          1.0, false};
}

/// Euclidean distance of exponential coordinates: not left-invariant and
/// not Lipschitz against d_cc once the group is not abelian.
inline LipschitzDistance coordinate_distance() {
  return {"euclidean-coordinates",
          [](const GroupElement& x, const GroupElement& y) { return (x.coords() - y.coords()).norm(); }, 1.0, false};
}

inline LipschitzDistance distance_by_name(const std::string& name, std::shared_ptr<const CcEstimator> est) {
  if (name == "cc") return cc_distance(est);
  if (name == "riemannian") return riemannian_distance(est);
  if (name == "abelian") return abelian_distance(est);
  if (name == "snowflake") return snowflake_distance(est);
  if (name == "euclidean-coordinates") return coordinate_distance();
  throw InputError("unknown distance '" + name + "'");
}

inline std::vector<std::string> distance_names() {
  return {"cc", "riemannian", "abelian", "snowflake", "euclidean-coordinates"};
}

/**
 * Point of B_cc(x, t): x times the endpoint of a random horizontal path of
 * length at most t. Membership is certified by the path itself.
 */
inline GroupElement sample_in_ball(const CcEstimator& est, const GroupElement& x, double t, std::mt19937_64& rng,
                                   int pieces = 4) {
  const GradedAlgebra& a = est.group().algebra();
  const int d1 = a.horizontal_dim(), q = homogeneous_dimension(a);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double total = t * std::pow(unif(rng), 1.0 / q);
  std::vector<double> cut(static_cast<std::size_t>(pieces));
  double sum = 0.0;
  for (auto& c : cut) sum += (c = -std::log(1.0 - unif(rng)));
  ControlPath p{x, {}};
  for (double c : cut) {
    Eigen::VectorXd u(d1);
    for (int i = 0; i < d1; ++i) u(i) = normal(rng);
    const double len = est.metric().norm(u);
    if (len == 0.0 || c == 0.0) continue;
    p.segments.push_back({1.0, u * (total * c / sum / len)});
  }
  return p.segments.empty() ? x : path_endpoint(est.group(), p);
}

/// Sampled d(y, y h_t e^v)/t at one t.
struct QuotientLevel {
  double t = 0.0;
  double inf = 0.0;
  double sup = 0.0;
  long samples = 0;
};

struct TailFit {
  double value = 0.0;   // intercept at t = 0
  double slope = 0.0;
  double stderr_value = 0.0;
  int points = 0;
};

struct DerivateEstimate {
  GroupElement x;
  Eigen::VectorXd v;
  std::vector<QuotientLevel> levels;
  TailFit lower_fit;
  TailFit upper_fit;
  double lower = 0.0;  // extrapolated lim inf
  double upper = 0.0;  // extrapolated lim sup
};

/// Linear fit of y against t on the smallest-t half of the levels,
/// extrapolated to t = 0.
inline TailFit tail_fit(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  const std::size_t k = std::max<std::size_t>(2, (n + 1) / 2);
  std::vector<double> tt(t.end() - static_cast<std::ptrdiff_t>(std::min(k, n)), t.end());
  std::vector<double> yy(y.end() - static_cast<std::ptrdiff_t>(std::min(k, n)), y.end());
  TailFit f;
  f.points = static_cast<int>(tt.size());
  if (tt.size() < 2) {
    f.value = yy.empty() ? 0.0 : yy.back();
    return f;
  }
  const DimensionFit ls = least_squares(tt, yy);
  f.value = ls.intercept;
  f.slope = ls.slope;
  double ss = 0.0, tm = 0.0, stt = 0.0;
  for (double x : tt) tm += x;
  tm /= static_cast<double>(tt.size());
  for (std::size_t i = 0; i < tt.size(); ++i) {
    const double r = yy[i] - (ls.intercept + ls.slope * tt[i]);
    ss += r * r;
    stt += (tt[i] - tm) * (tt[i] - tm);
  }
  if (tt.size() > 2 && stt > 0.0) {
    const double s2 = ss / static_cast<double>(tt.size() - 2);
    f.stderr_value = std::sqrt(s2 * (1.0 / static_cast<double>(tt.size()) + tm * tm / stt));
  }
  return f;
}

/**
 * Lower and upper derivates of d at x in direction v: for each t in a
 * decreasing grid, inf and sup of d(y, y h_t e^v)/t over y sampled in
 * B_cc(x, t), then a linear tail fit to t = 0. Each sampled pair is checked
 * against L t |v|, the length of the radial segment joining it.
 */
inline DerivateEstimate derivate(const LipschitzDistance& d, const CcEstimator& est, const GroupElement& x,
                                 const Eigen::VectorXd& v, const std::vector<double>& t_grid, long samples_per_t,
                                 std::uint64_t seed, int threads = 1) {
  const CarnotGroup& g = est.group();
  g.require_compatible(x);
  if (v.size() != g.algebra().horizontal_dim()) throw InputError("derivate direction must be a layer-1 vector");
  if (t_grid.empty()) throw InputError("t grid is empty");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 1e-5)) throw InputError("t grid values must be at least 1e-5");
    if (i > 0 && !(t_grid[i] < t_grid[i - 1])) throw InputError("t grid must be strictly decreasing");
  }
  if (samples_per_t < 1) throw InputError("samples per t must be positive");
  DerivateEstimate out;
  out.x = x;
  out.v = v;
  const double vlen = est.metric().norm(v);
  const AlgebraVector step_dir = g.algebra().embed_horizontal(v);
  for (std::size_t level = 0; level < t_grid.size(); ++level) {
    const double t = t_grid[level];
    const std::size_t n = static_cast<std::size_t>(samples_per_t);
    std::vector<double> q(n);
    parallel_for(n, threads, [&](std::size_t i) {
      auto rng = derived_rng(seed, stream_id("derivate", level), i);
      const GroupElement y = sample_in_ball(est, x, t, rng);
      const GroupElement z = bch(g, y, GroupElement(t * step_dir));
      const double value = d.evaluate(y, z);
      detail::check_pair(d, y, z, value, t * vlen);
      q[i] = value / t;
    });
    QuotientLevel l{t, *std::min_element(q.begin(), q.end()), *std::max_element(q.begin(), q.end()), samples_per_t};
    out.levels.push_back(l);
  }
  std::vector<double> ts, lo, hi;
  for (const auto& l : out.levels) {
    ts.push_back(l.t);
    lo.push_back(l.inf);
    hi.push_back(l.sup);
  }
  out.lower_fit = tail_fit(ts, lo);
  out.upper_fit = tail_fit(ts, hi);
  out.lower = std::max(0.0, out.lower_fit.value);
  out.upper = std::max(out.lower, out.upper_fit.value);
  return out;
}

/// Samples pairs in a ball of the given radius around the identity and
/// throws LipschitzViolation at the first pair with d > L * d_cc upper.
inline void check_lipschitz_distance(const LipschitzDistance& d, const CcEstimator& est, int pairs, double radius,
                                     std::uint64_t seed) {
  for (int i = 0; i < pairs; ++i) {
    auto rng = derived_rng(seed, stream_id("lipschitz"), static_cast<std::uint64_t>(i));
    const GroupElement x = sample_in_ball(est, est.group().identity(), radius, rng);
    const GroupElement y = sample_in_ball(est, x, radius, rng);
    const DistanceEstimate e = est.estimate(x, y);
    if (!e.feasible) continue;
    detail::check_pair(d, x, y, d.evaluate(x, y), e.upper);
  }
}

struct HomogeneityRow {
  double tau = 0.0;
  double lower = 0.0;  // derivates at tau v
  double upper = 0.0;
  double residual_lower = 0.0;  // |rho(tau v) - |tau| rho(v)|
  double residual_upper = 0.0;
};

struct HomogeneityReport {
  double base_lower = 0.0;
  double base_upper = 0.0;
  std::vector<HomogeneityRow> rows;
  double symmetry_residual = 0.0;  // max over lower/upper of |rho(-v) - rho(v)|, if tau = -1 present
  bool has_symmetry = false;
  double max_residual = 0.0;
};

inline HomogeneityReport check_homogeneity(const DerivateEstimate& base,
                                           const std::vector<std::pair<double, DerivateEstimate>>& scaled) {
  HomogeneityReport r;
  r.base_lower = base.lower;
  r.base_upper = base.upper;
  for (const auto& [tau, e] : scaled) {
    HomogeneityRow row{tau, e.lower, e.upper, std::abs(e.lower - std::abs(tau) * base.lower),
                       std::abs(e.upper - std::abs(tau) * base.upper)};
    r.max_residual = std::max({r.max_residual, row.residual_lower, row.residual_upper});
    if (tau == -1.0) {
      r.has_symmetry = true;
      r.symmetry_residual = std::max(row.residual_lower, row.residual_upper);
    }
    r.rows.push_back(row);
  }
  return r;
}

/// Derivates at tau v for each tau, sharing the sampling seed; tau = 0 is
/// reported as 0 without sampling.
inline HomogeneityReport homogeneity_sweep(const LipschitzDistance& d, const CcEstimator& est, const GroupElement& x,
                                           const Eigen::VectorXd& v, const std::vector<double>& taus,
                                           const std::vector<double>& t_grid, long samples_per_t, std::uint64_t seed,
                                           int threads = 1) {
  const DerivateEstimate base = derivate(d, est, x, v, t_grid, samples_per_t, seed, threads);
  std::vector<std::pair<double, DerivateEstimate>> scaled;
  for (double tau : taus) {
    if (tau == 0.0) {
      DerivateEstimate zero;
      zero.x = x;
      zero.v = Eigen::VectorXd::Zero(v.size());
      scaled.push_back({tau, zero});
      continue;
    }
    scaled.push_back({tau, derivate(d, est, x, tau * v, t_grid, samples_per_t, seed, threads)});
  }
  return check_homogeneity(base, scaled);
}

struct SpreadCell {
  double epsilon = 0.0;
  double t = 0.0;
  double sup_upper = 0.0;  // sup over z of the certified upper bound
  double sup_lower = 0.0;
  long samples = 0;
  long failures = 0;
};

struct SpreadReport {
  std::vector<SpreadCell> cells;
  std::vector<double> epsilons;
  std::vector<double> ts;
  /// Per epsilon: max / min of sup/t over the t grid, minus 1.
  std::vector<double> linearity_spread;
  /// Per epsilon: mean over t of sup/t.
  std::vector<double> constants;
  bool linear_within_10pct = false;
  bool decreasing_in_epsilon = false;
};

/**
 * sup over z in End(y, t v, t eps) of d_cc(y h_t e^v, z h_t e^v). Left
 * invariance removes y; End(e, t v, t eps) = h_t h_eps End(e, v, 1), so a
 * single batch of unit End samples is reused for every (eps, t).
 */
inline SpreadReport spread_estimate(const CcEstimator& est, const Eigen::VectorXd& v,
                                    const std::vector<double>& epsilons, const std::vector<double>& ts,
                                    long samples, std::uint64_t seed, int threads = 1) {
  if (epsilons.empty() || ts.empty()) throw InputError("spread needs epsilon and t grids");
  for (double e : epsilons) {
    if (!(e > 0.0)) throw InputError("spread epsilons must be positive");
  }
  for (double t : ts) {
    if (!(t > 0.0)) throw InputError("spread t values must be positive");
  }
  if (samples < 1) throw InputError("spread needs at least one sample");
  const CarnotGroup& g = est.group();
  const GradedAlgebra& a = g.algebra();
  const BoxSpec unit(g, est.metric(), v, 1.0);
  std::vector<AlgebraVector> ends(static_cast<std::size_t>(samples));
  for (std::size_t i = 0; i < ends.size(); ++i) {
    auto rng = derived_rng(seed, stream_id("spread"), i);
    ends[i] = unit.sample_end(rng);
  }
  SpreadReport rep;
  rep.epsilons = epsilons;
  rep.ts = ts;
  for (double eps : epsilons) {
    std::vector<double> ratios;
    for (double t : ts) {
      const AlgebraVector tv = a.embed_horizontal(t * v);
      std::vector<double> up(ends.size()), lo(ends.size());
      std::vector<char> ok(ends.size());
      parallel_for(ends.size(), threads, [&](std::size_t i) {
        const AlgebraVector w = dilate_coords(a, t * eps, ends[i]);
        // (y h_t e^v)^{-1} (y e^w h_t e^v) = e^{-tv} e^w e^{tv}
        const AlgebraVector p = g.multiply(g.multiply(-tv, w), tv);
        const DistanceEstimate e = est.estimate_displacement(p);
        ok[i] = e.feasible;
        up[i] = e.feasible ? e.upper : 0.0;
        lo[i] = e.lower;
      });
      SpreadCell c{eps, t, 0.0, 0.0, samples, 0};
      for (std::size_t i = 0; i < ends.size(); ++i) {
        if (!ok[i]) {
          ++c.failures;
          continue;
        }
        c.sup_upper = std::max(c.sup_upper, up[i]);
        c.sup_lower = std::max(c.sup_lower, lo[i]);
      }
      ratios.push_back(c.sup_upper / t);
      rep.cells.push_back(c);
    }
    const auto [mn, mx] = std::minmax_element(ratios.begin(), ratios.end());
    rep.linearity_spread.push_back(*mn > 0 ? *mx / *mn - 1.0 : kInfinity);
    double mean = 0.0;
    for (double r : ratios) mean += r;
    rep.constants.push_back(mean / static_cast<double>(ratios.size()));
  }
  rep.linear_within_10pct = true;
  for (double s : rep.linearity_spread) rep.linear_within_10pct = rep.linear_within_10pct && s <= 0.10;
  // Ordered by epsilon: constants must shrink with epsilon.
  std::vector<std::pair<double, double>> by_eps;
  for (std::size_t i = 0; i < epsilons.size(); ++i) by_eps.push_back({epsilons[i], rep.constants[i]});
  std::sort(by_eps.begin(), by_eps.end());
  rep.decreasing_in_epsilon = true;
  for (std::size_t i = 1; i < by_eps.size(); ++i) {
    rep.decreasing_in_epsilon = rep.decreasing_in_epsilon && by_eps[i - 1].second < by_eps[i].second;
  }
  return rep;
}

}  // namespace carnot

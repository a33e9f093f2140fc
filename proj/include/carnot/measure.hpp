#pragma once

#include "carnot/atlas.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <vector>

namespace carnot {

/// Q = sum_i i * dim V^i.
inline int homogeneous_dimension(const GradedAlgebra& a) {
  int q = 0;
  for (int i = 1; i <= a.steps(); ++i) q += i * a.layer_dim(i);
  return q;
}

/// Determinant of the coordinate Jacobian of h_t: product of t^i over layer i.
inline double dilation_jacobian_determinant(const GradedAlgebra& a, double t) {
  double det = 1.0;
  for (int i = 1; i <= a.steps(); ++i) det *= std::pow(std::abs(t), i * a.layer_dim(i));
  return det;
}

struct VolumeEstimate {
  double radius = 0.0;
  double volume = 0.0;
  double standard_error = 0.0;
  long samples = 0;
  std::uint64_t seed = 0;
  long inside = 0;
  long band = 0;              // samples with lower <= r < upper
  double band_fraction = 0.0; // band / inside
  long boundary_hits = 0;     // inside samples in the outer margin of the box
  double box_volume = 0.0;
};

struct DimensionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Ordinary least squares of y on x.
inline DimensionFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  DimensionFit f;
  const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  f.slope = vx > 0 ? cxy / vx : 0.0;
  f.intercept = (sy - f.slope * sx) / n;
  f.r_squared = (vx > 0 && vy > 0) ? std::min(1.0, cxy * cxy / (vx * vy)) : 1.0;
  return f;
}

/**
 * Decides d_cc(e^0, e^p) <= r with certified bounds. Points whose certified
 * lower bound exceeds r are outside; otherwise a witness is sought by
 * projecting the nearest atlas solution onto the target, with SQP refinement
 * when the projected length lands near r. Membership means upper <= r.
 */
class BallSampler {
 public:
  struct Decision {
    bool inside = false;
    double lower = 0.0;
    double upper = kInfinity;
  };

  BallSampler(const CcEstimator& est, const Calibration& cal, double box_safety = 1.25)
      : est_(est), cal_(cal), safety_(box_safety) {
    if (cal_.atlas.empty()) throw InputError("ball sampler needs a calibrated witness atlas");
    if (static_cast<int>(cal_.constant.extents.size()) != est_.group().algebra().steps()) {
      throw InputError("calibration does not match the group");
    }
  }

  const CcEstimator& estimator() const { return est_; }

  /// Half-widths of the coordinate box enclosing B(e, r).
  Eigen::VectorXd half_widths(double r) const {
    const GradedAlgebra& a = est_.group().algebra();
    Eigen::VectorXd w(a.dim());
    const Eigen::MatrixXd ginv = est_.metric().gram().inverse();
    for (int layer = 1; layer <= a.steps(); ++layer) {
      const double extent = std::pow(safety_ * cal_.constant.extents[static_cast<std::size_t>(layer - 1)] * r, layer);
      for (int c = 0; c < a.layer_dim(layer); ++c) {
        // Layer 1 is bounded in the metric norm; coordinate c is at most
        // |u|_G sqrt((G^{-1})_cc).
        const double coord = layer == 1 ? extent * std::sqrt(ginv(c, c)) : extent;
        w(a.layer_offset(layer) + c) = coord;
      }
    }
    return w;
  }

  Decision classify(const AlgebraVector& p, double r) const {
    Decision d;
    if (!est_.reachable(p)) {
      d.lower = kInfinity;
      return d;
    }
    d.lower = std::max(est_.lower_abelian(p), est_.lower_quotient(p));
    if (d.lower > r) return d;
    const double rho = est_.gauge(p);
    if (rho == 0.0) {
      d.upper = 0.0;
      d.inside = true;
      return d;
    }
    const GradedAlgebra& a = est_.group().algebra();
    if (a.is_horizontal(p)) {
      d.upper = est_.lower_abelian(p);
      d.inside = d.upper <= r;
      return d;
    }
    const AlgebraVector unit = dilate_coords(a, 1.0 / rho, p);
    const auto near = cal_.atlas.nearest(unit, 2);
    auto accept = [&](const CcEstimator::UnitSolution& s) {
      if (s.feasible && s.length * rho < d.upper) d.upper = s.length * rho;
    };
    accept(est_.project_unit(unit, cal_.atlas.entries()[near[0]].solution));
    if (d.upper <= r) {
      d.inside = true;
      return d;
    }
    if (d.upper > 1.15 * r && d.lower < 0.85 * r) return d;
    for (std::size_t k : near) {
      accept(est_.refine_unit(unit, cal_.atlas.entries()[k].solution, 40));
      if (d.upper <= r) break;
    }
    d.inside = d.upper <= r;
    return d;
  }

 private:
  const CcEstimator& est_;
  const Calibration& cal_;
  double safety_;
};

/// Lebesgue measure of {p : certified upper d_cc(e^0, e^p) <= r}, sampled
/// uniformly in the enclosing box.
inline VolumeEstimate ball_volume(const BallSampler& sampler, double r, long samples, std::uint64_t seed,
                                  int threads = 1) {
  if (!(r > 0.0)) throw InputError("radius must be positive");
  if (samples <= 0) throw InputError("sample budget must be positive");
  const int n = sampler.estimator().group().dim();
  const Eigen::VectorXd w = sampler.half_widths(r);
  double box = 1.0;
  for (int i = 0; i < n; ++i) box *= 2.0 * w(i);
  const std::size_t blocks = (static_cast<std::size_t>(samples) + kSampleBlock - 1) / kSampleBlock;
  std::vector<long> inside(blocks, 0), band(blocks, 0), edge(blocks, 0);
  const double margin = 1.0 / 1.25;
  parallel_for(blocks, threads, [&](std::size_t b) {
    auto rng = derived_rng(seed, stream_id("ball", static_cast<std::uint64_t>(std::llround(r * 1e9))), b);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const std::size_t end = std::min<std::size_t>(static_cast<std::size_t>(samples), (b + 1) * kSampleBlock);
    AlgebraVector p(n);
    for (std::size_t i = b * kSampleBlock; i < end; ++i) {
      for (int c = 0; c < n; ++c) p(c) = unif(rng) * w(c);
      const auto d = sampler.classify(p, r);
      if (d.inside) {
        ++inside[b];
        for (int c = 0; c < n; ++c) {
          if (std::abs(p(c)) > margin * w(c)) {
            ++edge[b];
            break;
          }
        }
      }
      if (d.lower <= r && r < d.upper) ++band[b];
    }
  });
  VolumeEstimate v;
  v.radius = r;
  v.samples = samples;
  v.seed = seed;
  for (std::size_t b = 0; b < blocks; ++b) {
    v.inside += inside[b];
    v.band += band[b];
    v.boundary_hits += edge[b];
  }
  const double f = static_cast<double>(v.inside) / static_cast<double>(samples);
  v.box_volume = box;
  v.volume = box * f;
  v.standard_error = box * std::sqrt(f * (1.0 - f) / static_cast<double>(samples));
  v.band_fraction = static_cast<double>(v.band) / static_cast<double>(std::max<long>(1, v.inside));
  return v;
}

/// Least-squares slope of log volume against log radius.
inline DimensionFit fit_dimension(const std::vector<VolumeEstimate>& estimates) {
  if (estimates.size() < 3) throw InputError("dimension fit needs at least 3 radii");
  std::vector<double> x, y;
  double lo = kInfinity, hi = 0.0;
  for (const auto& e : estimates) {
    if (!(e.volume > 0.0) || !(e.radius > 0.0)) throw InputError("dimension fit needs positive volumes and radii");
    x.push_back(std::log(e.radius));
    y.push_back(std::log(e.volume));
    lo = std::min(lo, e.radius);
    hi = std::max(hi, e.radius);
  }
  if (hi < 4.0 * lo * (1.0 - 1e-12)) throw InputError("dimension fit radii must span a factor of at least 4");
  DimensionFit f = least_squares(x, y);
  f.r_min = lo;
  f.r_max = hi;
  return f;
}

/**
 * End(e, v, eps) and Box(e, v, eps) in exponential coordinates: End points
 * e^w with w_1 orthogonal to v and |w_j| < eps^j, Box points z e^{sv} for z in
 * End and s in [0, 1]. Left translation carries these to any basepoint.
 */
class BoxSpec {
 public:
  BoxSpec(const CarnotGroup& g, const HorizontalMetric& m, Eigen::VectorXd v, double eps)
      : g_(g), m_(m), v_(std::move(v)), eps_(eps) {
    if (v_.size() != g_.algebra().horizontal_dim()) throw InputError("box direction must be a layer-1 vector");
    if (!(eps_ > 0.0)) throw InputError("box epsilon must be positive");
    if (m_.norm(v_) == 0.0) throw InputError("box direction must be nonzero");
  }

  const Eigen::VectorXd& direction() const { return v_; }
  double epsilon() const { return eps_; }

  bool in_end(const AlgebraVector& w) const {
    const GradedAlgebra& a = g_.algebra();
    const Eigen::VectorXd w1 = a.layer(w, 1);
    if (std::abs(m_.inner(w1, v_)) > 1e-12 * (m_.norm(w1) + 1.0) * m_.norm(v_)) return false;
    if (!(m_.norm(w1) < eps_)) return false;
    for (int j = 2; j <= a.steps(); ++j) {
      if (!(a.layer(w, j).norm() < std::pow(eps_, j))) return false;
    }
    return true;
  }

  /// q = w (*) s v has layer-1 part w_1 + s v, which fixes s; then w is
  /// recovered exactly as q (*) (-s v).
  bool in_box(const AlgebraVector& q) const {
    const GradedAlgebra& a = g_.algebra();
    const double s = m_.inner(a.layer(q, 1), v_) / m_.inner(v_, v_);
    if (s < 0.0 || s > 1.0) return false;
    const AlgebraVector w = g_.multiply(q, a.embed_horizontal(-s * v_));
    AlgebraVector w_clean = w;
    w_clean.head(a.horizontal_dim()) -= (m_.inner(a.layer(w, 1), v_) / m_.inner(v_, v_)) * v_;
    return in_end(w_clean);
  }

  /// Uniform sample of End with respect to Lebesgue measure on its hyperplane.
  AlgebraVector sample_end(std::mt19937_64& rng) const {
    const GradedAlgebra& a = g_.algebra();
    AlgebraVector w = a.zero();
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int d1 = a.horizontal_dim();
    // Layer 1: uniform in the (d1-1)-ball of the G-orthogonal complement of v.
    if (d1 > 1) {
      const Eigen::MatrixXd& r = m_.orthonormal();
      Eigen::VectorXd vo = r * v_;
      vo.normalize();
      Eigen::VectorXd z(d1);
      for (int i = 0; i < d1; ++i) z(i) = normal(rng);
      z -= z.dot(vo) * vo;
      const double zn = z.norm();
      if (zn > 0) z *= eps_ * std::pow(unif(rng), 1.0 / (d1 - 1)) / zn;
      w.head(d1) = m_.orthonormal_inverse() * z;
    }
    for (int j = 2; j <= a.steps(); ++j) {
      const int dj = a.layer_dim(j);
      Eigen::VectorXd z(dj);
      for (int i = 0; i < dj; ++i) z(i) = normal(rng);
      z *= std::pow(eps_, j) * std::pow(unif(rng), 1.0 / dj) / z.norm();
      w.segment(a.layer_offset(j), dj) = z;
    }
    return w;
  }

  /// Certified coordinate half-widths of a box containing Box(e, v, eps),
  /// from per-layer norm bounds propagated through the BCH plan.
  Eigen::VectorXd enclosing_half_widths() const {
    const GradedAlgebra& a = g_.algebra();
    const int k = a.steps();
    const double r_inv = m_.orthonormal_inverse().norm();  // Euclidean <= r_inv * metric norm
    std::vector<double> x(static_cast<std::size_t>(k + 1), 0.0), y(static_cast<std::size_t>(k + 1), 0.0);
    x[1] = eps_ * r_inv;
    for (int j = 2; j <= k; ++j) x[static_cast<std::size_t>(j)] = std::pow(eps_, j);
    y[1] = m_.norm(v_) * r_inv;
    const auto bound = pair_bounds(a);
    const auto& nodes = g_.bch_table().nodes();
    std::vector<std::vector<double>> vals(nodes.size(), std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
    std::vector<double> total(static_cast<std::size_t>(k + 1), 0.0);
    for (int j = 1; j <= k; ++j) total[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] + y[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& left = nodes[i].parent < 0 ? x : vals[static_cast<std::size_t>(nodes[i].parent)];
      const auto& right = nodes[i].letter == 'X' ? x : y;
      for (int p = 1; p <= k; ++p) {
        for (int q = 1; p + q <= k; ++q) {
          vals[i][static_cast<std::size_t>(p + q)] += bound[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] *
                                                      left[static_cast<std::size_t>(p)] * right[static_cast<std::size_t>(q)];
        }
      }
      const double c = std::abs(nodes[i].coeff);
      for (int j = 1; j <= k; ++j) total[static_cast<std::size_t>(j)] += c * vals[i][static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd w(a.dim());
    for (int j = 1; j <= k; ++j) {
      w.segment(a.layer_offset(j), a.layer_dim(j)).setConstant(total[static_cast<std::size_t>(j)] * (1.0 + 1e-12));
    }
    return w;
  }

 private:
  /// bound[p][q] >= |[x, y]| / (|x| |y|) for x in layer p, y in layer q.
  static std::vector<std::vector<double>> pair_bounds(const GradedAlgebra& a) {
    const int k = a.steps();
    std::vector<std::vector<double>> b(static_cast<std::size_t>(k + 1), std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
    for (const auto& e : a.nonzeros()) {
      const int p = a.layer_of(e.i), q = a.layer_of(e.j);
      b[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] += e.value * e.value;
    }
    for (auto& row : b) {
      for (auto& x : row) x = std::sqrt(x);
    }
    return b;
  }

  CarnotGroup g_;
  HorizontalMetric m_;
  Eigen::VectorXd v_;
  double eps_;
};

/// Monte-Carlo Lebesgue measure of Box(e, v, eps).
inline VolumeEstimate box_volume(const BoxSpec& box, long samples, std::uint64_t seed, int threads = 1) {
  if (samples <= 0) throw InputError("sample budget must be positive");
  const Eigen::VectorXd w = box.enclosing_half_widths();
  const int n = static_cast<int>(w.size());
  double vol = 1.0;
  for (int i = 0; i < n; ++i) vol *= 2.0 * w(i);
  const std::size_t blocks = (static_cast<std::size_t>(samples) + kSampleBlock - 1) / kSampleBlock;
  std::vector<long> inside(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    auto rng = derived_rng(seed, stream_id("box"), b);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const std::size_t end = std::min<std::size_t>(static_cast<std::size_t>(samples), (b + 1) * kSampleBlock);
    AlgebraVector q(n);
    for (std::size_t i = b * kSampleBlock; i < end; ++i) {
      for (int c = 0; c < n; ++c) q(c) = unif(rng) * w(c);
      if (box.in_box(q)) ++inside[b];
    }
  });
  VolumeEstimate v;
  v.samples = samples;
  v.seed = seed;
  for (long c : inside) v.inside += c;
  const double f = static_cast<double>(v.inside) / static_cast<double>(samples);
  v.box_volume = vol;
  v.volume = vol * f;
  v.standard_error = vol * std::sqrt(f * (1.0 - f) / static_cast<double>(samples));
  return v;
}

struct DensityRow {
  double t = 0.0;
  VolumeEstimate box;
  VolumeEstimate ball;
  double ratio = 0.0;
};

struct DensityReport {
  std::vector<DensityRow> rows;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

/**
 * vol(Box(e, t v, t beta)) / vol(B(e, t R)) for each t, with R = |v| + beta
 * so the ball covers the box's length scale. Left invariance of Lebesgue
 * measure makes the basepoint irrelevant.
 */
inline DensityReport box_ball_density(const BallSampler& sampler, const Eigen::VectorXd& v, double beta,
                                      const std::vector<double>& t_values, long samples, std::uint64_t seed,
                                      int threads = 1) {
  const CcEstimator& est = sampler.estimator();
  const double radius = est.metric().norm(v) + beta;
  DensityReport rep;
  rep.min_ratio = kInfinity;
  for (std::size_t i = 0; i < t_values.size(); ++i) {
    const double t = t_values[i];
    if (!(t > 0.0)) throw InputError("density t values must be positive");
    DensityRow row;
    row.t = t;
    row.box = box_volume(BoxSpec(est.group(), est.metric(), t * v, t * beta), samples, seed + 2 * i, threads);
    row.ball = ball_volume(sampler, t * radius, samples, seed + 2 * i + 1, threads);
    row.ratio = row.ball.volume > 0 ? row.box.volume / row.ball.volume : kInfinity;
    rep.min_ratio = std::min(rep.min_ratio, row.ratio);
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace carnot

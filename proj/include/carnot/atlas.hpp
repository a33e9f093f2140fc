#pragma once

#include "carnot/distance.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace carnot {

/// Solved unit-gauge targets, used to warm-start nearby solves.
class WitnessAtlas {
 public:
  struct Entry {
    AlgebraVector target;
    CcEstimator::UnitSolution solution;
  };

  void add(Entry e) { entries_.push_back(std::move(e)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Indices of the k entries closest to a unit-gauge target.
  std::vector<std::size_t> nearest(const AlgebraVector& target, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) d.push_back({(entries_[i].target - target).squaredNorm(), i});
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

struct Calibration {
  BallBoxConstant constant;
  WitnessAtlas atlas;
  std::vector<int> failed;  // sample indices without a certified upper bound
};

/// Random target with gauge 1.
inline AlgebraVector random_unit_target(const CcEstimator& est, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const int n = est.group().dim();
  AlgebraVector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return dilate_coords(est.group().algebra(), 1.0 / est.gauge(v), v);
}

/**
 * Calibrates the ball-box constant A on random unit-gauge targets and keeps
 * every solution as an atlas entry. A is the largest observed
 * gauge / upper ratio inflated by (1 + confidence_radius), since an empirical
 * maximum underestimates the supremum. Dilation invariance of the ratio makes
 * unit-scale sampling sufficient.
 */
inline Calibration calibrate(const CcEstimator& est, int samples, std::uint64_t seed, int threads = 1,
                             double confidence_radius = 0.02) {
  if (samples < 1) throw InputError("calibration needs at least one sample");
  const GradedAlgebra& a = est.group().algebra();
  std::vector<AlgebraVector> targets(static_cast<std::size_t>(samples));
  for (std::size_t block = 0; block * kSampleBlock < targets.size(); ++block) {
    auto rng = derived_rng(seed, stream_id("calibrate"), block);
    for (std::size_t i = block * kSampleBlock; i < std::min(targets.size(), (block + 1) * kSampleBlock); ++i) {
      targets[i] = random_unit_target(est, rng);
    }
  }
  std::vector<CcEstimator::UnitSolution> sols(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t i) {
    if (a.is_horizontal(targets[i])) {
      CcEstimator::UnitSolution s;
      s.segments = est.budget().segments;
      s.state.a = est.model(s.segments).constant(a.layer(targets[i], 1));
      s.length = est.metric().norm(a.layer(targets[i], 1));
      s.residual = 0.0;
      s.feasible = true;
      sols[i] = s;
    } else {
      sols[i] = est.solve_unit(targets[i]);
    }
  });
  Calibration c;
  c.constant.samples = samples;
  c.constant.seed = seed;
  c.constant.confidence_radius = confidence_radius;
  c.constant.raw_max = 1.0;
  c.constant.extents.assign(static_cast<std::size_t>(a.steps()), 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!sols[i].feasible || !est.reachable(targets[i])) {
      c.failed.push_back(static_cast<int>(i));
      continue;
    }
    const double upper = sols[i].length;
    c.constant.raw_max = std::max(c.constant.raw_max, 1.0 / upper);
    for (int layer = 1; layer <= a.steps(); ++layer) {
      const double norm = layer == 1 ? est.metric().norm(a.layer(targets[i], 1)) : a.layer(targets[i], layer).norm();
      auto& e = c.constant.extents[static_cast<std::size_t>(layer - 1)];
      e = std::max(e, std::pow(norm, 1.0 / layer) / upper);
    }
    if (sols[i].repair.empty()) c.atlas.add({targets[i], sols[i]});
  }
  c.constant.A = c.constant.raw_max * (1.0 + confidence_radius);
  return c;
}

/// Ball-box constant only; throws OptimizerFailure listing failed samples.
inline BallBoxConstant calibrate_ballbox(const CcEstimator& est, int samples, std::uint64_t seed, int threads = 1,
                                         double confidence_radius = 0.02) {
  if (samples < 100) throw InputError("calibrate_ballbox needs at least 100 samples");
  const Calibration c = calibrate(est, samples, seed, threads, confidence_radius);
  if (!c.failed.empty()) {
    std::string list;
    for (int i : c.failed) list += (list.empty() ? "" : ",") + std::to_string(i);
    throw OptimizerFailure("calibration failed on samples " + list);
  }
  return c.constant;
}

}  // namespace carnot

#pragma once

#include "carnot/group.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace carnot {

/// Inner product on layer-1 coordinates.
class HorizontalMetric {
 public:
  explicit HorizontalMetric(Eigen::MatrixXd gram) : gram_(std::move(gram)) {
    if (gram_.rows() != gram_.cols() || gram_.rows() == 0) throw InputError("metric gram matrix must be square");
    const double scale = std::max(1.0, gram_.cwiseAbs().maxCoeff());
    if ((gram_ - gram_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw InputError("metric gram matrix is not symmetric");
    }
    gram_ = 0.5 * (gram_ + gram_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw InputError("metric gram matrix is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> llt(gram_);
    upper_ = llt.matrixU();
    upper_inv_ = upper_.inverse();
  }

  static HorizontalMetric identity(int d) { return HorizontalMetric(Eigen::MatrixXd::Identity(d, d)); }

  int dim() const { return static_cast<int>(gram_.rows()); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// R with G = R^T R: R u are orthonormal coordinates of u.
  const Eigen::MatrixXd& orthonormal() const { return upper_; }
  const Eigen::MatrixXd& orthonormal_inverse() const { return upper_inv_; }

  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(gram_ * v); }
  double norm(const Eigen::VectorXd& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

 private:
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd upper_;
  Eigen::MatrixXd upper_inv_;
};

struct Segment {
  double duration = 0.0;
  Eigen::VectorXd control;  // layer-1 coordinates
};

/// Piecewise-constant horizontal control from a basepoint.
struct ControlPath {
  GroupElement basepoint;
  std::vector<Segment> segments;
};

/// Layer-1 vector lifted to the algebra and scaled by the segment duration.
inline AlgebraVector segment_step(const GradedAlgebra& a, const Segment& s) {
  return a.embed_horizontal(s.duration * s.control);
}

inline GroupElement path_endpoint(const CarnotGroup& g, const ControlPath& p) {
  g.require_compatible(p.basepoint);
  AlgebraVector x = p.basepoint.coords();
  AlgebraVector next(g.dim());
  BchTable::Workspace ws;
  for (const auto& s : p.segments) {
    if (s.control.size() != g.algebra().horizontal_dim()) throw InputError("segment control has wrong dimension");
    if (!(s.duration > 0.0)) throw InputError("segment durations must be positive");
    const AlgebraVector step = segment_step(g.algebra(), s);
    g.bch_table().product(g.algebra(), x.data(), step.data(), next.data(), ws);
    x.swap(next);
  }
  return GroupElement(x);
}

inline double path_length(const HorizontalMetric& m, const ControlPath& p) {
  double total = 0.0;
  for (const auto& s : p.segments) total += s.duration * m.norm(s.control);
  return total;
}

/// Same curve traversed backwards, starting from the old endpoint.
inline ControlPath reversed(const CarnotGroup& g, const ControlPath& p) {
  ControlPath r{path_endpoint(g, p), {}};
  for (auto it = p.segments.rbegin(); it != p.segments.rend(); ++it) r.segments.push_back({it->duration, -it->control});
  return r;
}

/// p followed by q; q's basepoint is ignored (it is left-translated to p's end).
inline ControlPath concatenated(const ControlPath& p, const ControlPath& q) {
  ControlPath c = p;
  c.segments.insert(c.segments.end(), q.segments.begin(), q.segments.end());
  return c;
}

/// h_t applied to the whole curve (t > 0): length scales by t.
inline ControlPath dilated(const CarnotGroup& g, const ControlPath& p, double t) {
  ControlPath d{dilate(g, t, p.basepoint), {}};
  for (const auto& s : p.segments) d.segments.push_back({s.duration, t * s.control});
  return d;
}

/// Left translate by h: basepoint becomes h * basepoint.
inline ControlPath translated(const CarnotGroup& g, const GroupElement& h, const ControlPath& p) {
  return {bch(g, h, p.basepoint), p.segments};
}

/// Unit-speed reparametrization; drops stationary segments.
inline ControlPath constant_speed(const HorizontalMetric& m, const ControlPath& p) {
  ControlPath c{p.basepoint, {}};
  for (const auto& s : p.segments) {
    const double speed = m.norm(s.control);
    if (speed == 0.0) continue;
    c.segments.push_back({s.duration * speed, s.control / speed});
  }
  return c;
}

namespace detail {

/// Left-normed brackets of layer-1 basis vectors whose values span layer i.
struct LadderWords {
  std::vector<std::vector<int>> words;
  Eigen::MatrixXd values;  // layer-i coordinates, one column per word
};

inline LadderWords ladder_words(const GradedAlgebra& a, int layer) {
  const int d1 = a.horizontal_dim();
  std::vector<std::vector<int>> frontier;
  for (int i = 0; i < d1; ++i) frontier.push_back({i});
  for (int depth = 2; depth <= layer; ++depth) {
    std::vector<std::vector<int>> next;
    for (const auto& w : frontier) {
      for (int i = 0; i < d1; ++i) {
        auto v = w;
        v.push_back(i);
        next.push_back(v);
      }
    }
    frontier.swap(next);
  }
  LadderWords out;
  std::vector<AlgebraVector> vals;
  for (const auto& w : frontier) {
    AlgebraVector v = a.basis_vector(w[0]);
    for (std::size_t k = 1; k < w.size(); ++k) v = bracket(a, v, a.basis_vector(w[k]));
    const Eigen::VectorXd layer_part = a.layer(v, layer);
    if (layer_part.norm() == 0.0) continue;
    out.words.push_back(w);
    vals.push_back(layer_part);
  }
  out.values.resize(a.layer_dim(layer), static_cast<Eigen::Index>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) out.values.col(static_cast<Eigen::Index>(k)) = vals[k];
  return out;
}

/// Segments realizing the nested group commutator of s*e_{w_1}, ..., s*e_{w_k}.
inline std::vector<Segment> nested_commutator(int d1, const std::vector<int>& word, double s, double sign) {
  auto seg = [&](int idx, double c) {
    Segment x{1.0, Eigen::VectorXd::Zero(d1)};
    x.control(idx) = c;
    return x;
  };
  std::vector<Segment> c{seg(word[0], sign * s)};
  for (std::size_t k = 1; k < word.size(); ++k) {
    std::vector<Segment> next = c;
    next.push_back(seg(word[k], s));
    for (auto it = c.rbegin(); it != c.rend(); ++it) next.push_back({it->duration, -it->control});
    next.push_back(seg(word[k], -s));
    c.swap(next);
  }
  return c;
}

}  // namespace detail

/**
 * Horizontal path from the identity to e^defect built greedily layer by
 * layer: a straight segment for layer 1, then nested group commutators of
 * basis directions, whose leading term lands exactly in the current layer.
 * Returns false when the defect leaves the span generated by layer 1.
 */
inline bool commutator_ladder(const CarnotGroup& g, const AlgebraVector& defect, std::vector<Segment>& out) {
  const GradedAlgebra& a = g.algebra();
  const int d1 = a.horizontal_dim();
  out.clear();
  AlgebraVector reached = a.zero();
  auto append = [&](const std::vector<Segment>& segs) {
    ControlPath p{GroupElement(reached), segs};
    reached = path_endpoint(g, p).coords();
    out.insert(out.end(), segs.begin(), segs.end());
  };
  const Eigen::VectorXd first = a.layer(defect, 1);
  if (first.norm() > 0.0) append({Segment{1.0, first}});
  for (int layer = 2; layer <= a.steps(); ++layer) {
    const AlgebraVector remaining = g.multiply(-reached, defect);
    const Eigen::VectorXd target = a.layer(remaining, layer);
    if (target.norm() == 0.0) continue;
    const auto words = detail::ladder_words(a, layer);
    if (words.words.empty()) return false;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(words.values);
    const Eigen::VectorXd coeff = qr.solve(target);
    if ((words.values * coeff - target).norm() > 1e-10 * std::max(1.0, target.norm())) return false;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) {
      if (coeff(k) == 0.0) continue;
      const double s = std::pow(std::abs(coeff(k)), 1.0 / layer);
      append(detail::nested_commutator(d1, words.words[k], s, coeff(k) < 0 ? -1.0 : 1.0));
    }
  }
  return true;
}

}  // namespace carnot

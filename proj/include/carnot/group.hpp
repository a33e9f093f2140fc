#pragma once

#include "carnot/algebra.hpp"
#include "carnot/bch.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace carnot {

/// Element e^coords of a simply connected nilpotent group, in exponential
/// coordinates.
class GroupElement {
 public:
  GroupElement() = default;
  explicit GroupElement(AlgebraVector coords) : coords_(std::move(coords)) {}
  const AlgebraVector& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }

 private:
  AlgebraVector coords_;
};

/**
 * @brief Simply connected graded nilpotent group with its BCH plan.
 *
 * The algebra must pass verify_graded(). The BCH plan is truncated at the
 * nilpotency degree, where the series terminates exactly.
 */
class CarnotGroup {
 public:
  explicit CarnotGroup(GradedAlgebra algebra)
      : algebra_(std::make_shared<const GradedAlgebra>(std::move(algebra))),
        degree_(checked_degree(*algebra_)),
        table_(std::make_shared<const BchTable>(degree_)) {}

  const GradedAlgebra& algebra() const { return *algebra_; }
  int dim() const { return algebra_->dim(); }
  int nilpotency_degree() const { return degree_; }
  const BchTable& bch_table() const { return *table_; }

  GroupElement identity() const { return GroupElement(algebra_->zero()); }
  GroupElement exp(const AlgebraVector& v) const {
    algebra_->require_compatible(v);
    return GroupElement(v);
  }

  void require_compatible(const GroupElement& g) const {
    if (g.dim() != dim()) {
      throw InputError("group element of dim " + std::to_string(g.dim()) + " does not belong to '" +
                       algebra_->name() + "' (dim " + std::to_string(dim()) + ")");
    }
  }

  /// Unchecked product on raw coordinates.
  AlgebraVector multiply(const AlgebraVector& x, const AlgebraVector& y) const {
    AlgebraVector out(dim());
    BchTable::Workspace ws;
    table_->product(*algebra_, x.data(), y.data(), out.data(), ws);
    return out;
  }

 private:
  static int checked_degree(const GradedAlgebra& a) {
    const auto report = verify_graded(a);
    if (!report.valid()) throw InputError("'" + a.name() + "' is not a graded nilpotent algebra: " + report.summary());
    return carnot::nilpotency_degree(a);
  }

  std::shared_ptr<const GradedAlgebra> algebra_;
  int degree_;
  std::shared_ptr<const BchTable> table_;
};

/// x * y, i.e. e^X e^Y = e^{X (*) Y}.
inline GroupElement bch(const CarnotGroup& g, const GroupElement& x, const GroupElement& y) {
  g.require_compatible(x);
  g.require_compatible(y);
  return GroupElement(g.multiply(x.coords(), y.coords()));
}

/// Graded pieces C_1(X,Y), ..., C_k(X,Y) of X (*) Y, each as a full-length vector.
inline std::vector<AlgebraVector> bch_components(const CarnotGroup& g, const GroupElement& x, const GroupElement& y) {
  const AlgebraVector z = bch(g, x, y).coords();
  std::vector<AlgebraVector> parts;
  for (int i = 1; i <= g.algebra().steps(); ++i) parts.push_back(g.algebra().project(z, i));
  return parts;
}

inline GroupElement inverse(const GroupElement& x) { return GroupElement(-x.coords()); }

/// Dilation coordinates dh_t: layer i scaled by t^i (t >= 0).
inline AlgebraVector dilate_coords(const GradedAlgebra& a, double t, const AlgebraVector& v) {
  AlgebraVector out = v;
  double factor = 1.0;
  for (int i = 1; i <= a.steps(); ++i) {
    factor *= t;
    out.segment(a.layer_offset(i), a.layer_dim(i)) *= factor;
  }
  return out;
}

/**
 * Dilation h_t. Negative parameters use the convention
 * h_{-|t|} g = h_{|t|}(g^{-1}), which differs from the more common
 * "dh_t scales layer i by t^i" extension when g has components beyond
 * layer 1; both agree on horizontal elements.
 */
inline GroupElement dilate(const CarnotGroup& g, double t, const GroupElement& x) {
  g.require_compatible(x);
  if (t >= 0.0) return GroupElement(dilate_coords(g.algebra(), t, x.coords()));
  return GroupElement(dilate_coords(g.algebra(), -t, -x.coords()));
}

/// g^{-1} x g.
inline GroupElement conjugate(const CarnotGroup& grp, const GroupElement& g, const GroupElement& x) {
  return bch(grp, bch(grp, inverse(g), x), g);
}

/// Coordinates of x^{-1} y, the displacement that left invariance reduces
/// every two-point quantity to.
inline AlgebraVector displacement(const CarnotGroup& g, const GroupElement& x, const GroupElement& y) {
  g.require_compatible(x);
  g.require_compatible(y);
  return g.multiply(-x.coords(), y.coords());
}

}  // namespace carnot

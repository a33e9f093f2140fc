#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace carnot {

/// Coefficients in the declared basis of a graded algebra. Doubles as the
/// exponential coordinates of a group element.
using AlgebraVector = Eigen::VectorXd;

/// Malformed input: dimension mismatch, bad definition file, invalid grid.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotNilpotentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One nonzero structure constant: [e_i, e_j] has coefficient `value` on e_l.
struct StructureEntry {
  int i;
  int j;
  int l;
  double value;
};

/**
 * @brief Graded nilpotent Lie algebra given by structure constants.
 *
 * Layers occupy contiguous index ranges in declared order: layer 1 holds
 * indices [0, d_1), layer 2 holds [d_1, d_1 + d_2), and so on. The tensor is
 * stored densely as c[(i * n + j) * n + l].
 *
 * Construction only checks shapes. Use verify_graded() to check the algebraic
 * invariants; CarnotGroup refuses algebras that fail it.
 */
class GradedAlgebra {
 public:
  GradedAlgebra(std::string name, std::vector<int> layer_dims, std::vector<double> structure,
                std::vector<std::string> labels = {})
      : name_(std::move(name)),
        layer_dims_(std::move(layer_dims)),
        structure_(std::move(structure)),
        labels_(std::move(labels)) {
    if (layer_dims_.empty()) throw InputError("layer_dims must not be empty");
    dim_ = 0;
    for (int d : layer_dims_) {
      if (d <= 0) throw InputError("layer dimensions must be positive");
      layer_offsets_.push_back(dim_);
      dim_ += d;
    }
    layer_offsets_.push_back(dim_);
    const std::size_t expected = static_cast<std::size_t>(dim_) * dim_ * dim_;
    if (structure_.size() != expected) {
      throw InputError("structure tensor has " + std::to_string(structure_.size()) +
                       " entries, expected " + std::to_string(expected));
    }
    if (labels_.empty()) {
      for (int i = 0; i < dim_; ++i) labels_.push_back("e" + std::to_string(i + 1));
    }
    if (static_cast<int>(labels_.size()) != dim_) throw InputError("label count must equal dim");
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j < dim_; ++j) {
        for (int l = 0; l < dim_; ++l) {
          const double v = c(i, j, l);
          if (v != 0.0) nonzeros_.push_back({i, j, l, v});
        }
      }
    }
  }

  /// Builds an algebra from the brackets [e_i, e_j] with i != j, filling
  /// c[j][i][l] = -c[i][j][l].
  static GradedAlgebra from_brackets(std::string name, std::vector<int> layer_dims,
                                     const std::vector<StructureEntry>& brackets,
                                     std::vector<std::string> labels = {}) {
    int n = 0;
    for (int d : layer_dims) n += d;
    std::vector<double> c(static_cast<std::size_t>(n) * n * n, 0.0);
    auto at = [&](int i, int j, int l) -> double& {
      return c[(static_cast<std::size_t>(i) * n + j) * n + l];
    };
    for (const auto& e : brackets) {
      if (e.i < 0 || e.j < 0 || e.l < 0 || e.i >= n || e.j >= n || e.l >= n) {
        throw InputError("bracket index out of range");
      }
      if (e.i == e.j) {
        if (e.value != 0.0) throw InputError("[e_i, e_i] must vanish");
        continue;
      }
      at(e.i, e.j, e.l) = e.value;
      at(e.j, e.i, e.l) = -e.value;
    }
    return GradedAlgebra(std::move(name), std::move(layer_dims), std::move(c), std::move(labels));
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  /// Number of layers k.
  int steps() const { return static_cast<int>(layer_dims_.size()); }
  const std::vector<int>& layer_dims() const { return layer_dims_; }
  /// Dimension of layer `layer` (1-based).
  int layer_dim(int layer) const { return layer_dims_.at(layer - 1); }
  /// First basis index of layer `layer` (1-based).
  int layer_offset(int layer) const { return layer_offsets_.at(layer - 1); }
  /// Layer (1-based) that basis index `index` belongs to.
  int layer_of(int index) const {
    for (int k = 0; k < steps(); ++k) {
      if (index < layer_offsets_[k + 1]) return k + 1;
    }
    throw InputError("basis index out of range");
  }
  int horizontal_dim() const { return layer_dims_.front(); }

  double c(int i, int j, int l) const {
    return structure_[(static_cast<std::size_t>(i) * dim_ + j) * dim_ + l];
  }
  const std::vector<double>& structure() const { return structure_; }
  const std::vector<StructureEntry>& nonzeros() const { return nonzeros_; }

  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<int>(it - labels_.begin());
  }

  AlgebraVector zero() const { return AlgebraVector::Zero(dim_); }
  AlgebraVector basis_vector(int index) const {
    AlgebraVector e = zero();
    e(index) = 1.0;
    return e;
  }

  void require_compatible(const AlgebraVector& x) const {
    if (x.size() != dim_) {
      throw InputError("vector of length " + std::to_string(x.size()) +
                       " does not match algebra '" + name_ + "' of dim " + std::to_string(dim_));
    }
  }

  /// Coordinates of layer `layer` as a compact vector.
  Eigen::VectorXd layer(const AlgebraVector& x, int layer) const {
    return x.segment(layer_offset(layer), layer_dim(layer));
  }

  /// Projection pi_i: keeps layer `layer`, zeroes the rest.
  AlgebraVector project(const AlgebraVector& x, int layer) const {
    AlgebraVector out = zero();
    out.segment(layer_offset(layer), layer_dim(layer)) = x.segment(layer_offset(layer), layer_dim(layer));
    return out;
  }

  /// Embeds a layer-1 vector (length d_1) into the full algebra.
  AlgebraVector embed_horizontal(const Eigen::VectorXd& u) const {
    if (u.size() != horizontal_dim()) throw InputError("horizontal vector has wrong length");
    AlgebraVector out = zero();
    out.head(horizontal_dim()) = u;
    return out;
  }

  bool is_horizontal(const AlgebraVector& x, double tol = 0.0) const {
    if (dim_ == horizontal_dim()) return true;
    return x.tail(dim_ - horizontal_dim()).cwiseAbs().maxCoeff() <= tol;
  }

  double tensor_magnitude() const {
    double m = 0.0;
    for (double v : structure_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::string name_;
  std::vector<int> layer_dims_;
  std::vector<int> layer_offsets_;
  std::vector<double> structure_;
  std::vector<std::string> labels_;
  std::vector<StructureEntry> nonzeros_;
  int dim_ = 0;
};

/// out += [x, y]; no dimension checks. Hot path for products and jets.
inline void accumulate_bracket(const GradedAlgebra& a, const double* x, const double* y, double* out,
                               double scale = 1.0) {
  for (const auto& e : a.nonzeros()) out[e.l] += scale * e.value * x[e.i] * y[e.j];
}

inline AlgebraVector bracket(const GradedAlgebra& a, const AlgebraVector& x, const AlgebraVector& y) {
  a.require_compatible(x);
  a.require_compatible(y);
  AlgebraVector out = a.zero();
  accumulate_bracket(a, x.data(), y.data(), out.data());
  return out;
}

/// Matrix of ad(x): ad(x) y = [x, y].
inline Eigen::MatrixXd ad_matrix(const GradedAlgebra& a, const AlgebraVector& x) {
  a.require_compatible(x);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.dim(), a.dim());
  for (const auto& e : a.nonzeros()) m(e.l, e.j) += e.value * x(e.i);
  return m;
}

namespace detail {

inline constexpr double kRankTolerance = 1e-10;

/// Orthonormal basis (columns) of the column span of m.
inline Eigen::MatrixXd span_basis(const Eigen::MatrixXd& m) {
  if (m.cols() == 0) return Eigen::MatrixXd(m.rows(), 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(kRankTolerance);
  const auto rank = qr.rank();
  Eigen::MatrixXd q = qr.householderQ();
  return q.leftCols(rank);
}

}  // namespace detail

/// C^0 = n, C^{m+1} = [C^m, n]; returned as orthonormal column bases, ending
/// with the zero subspace.
inline std::vector<Eigen::MatrixXd> descending_central_sequence(const GradedAlgebra& a) {
  const int n = a.dim();
  std::vector<Eigen::MatrixXd> chain;
  chain.push_back(Eigen::MatrixXd::Identity(n, n));
  while (chain.back().cols() > 0) {
    if (static_cast<int>(chain.size()) > n) {
      throw NotNilpotentError("algebra '" + a.name() + "' is not nilpotent");
    }
    const Eigen::MatrixXd& current = chain.back();
    Eigen::MatrixXd brackets(n, current.cols() * n);
    for (Eigen::Index b = 0; b < current.cols(); ++b) {
      const AlgebraVector cb = current.col(b);
      for (int j = 0; j < n; ++j) {
        brackets.col(b * n + j) = bracket(a, cb, a.basis_vector(j));
      }
    }
    Eigen::MatrixXd next = detail::span_basis(brackets);
    if (next.cols() >= current.cols()) {
      throw NotNilpotentError("descending central sequence of '" + a.name() + "' stalls at dimension " +
                              std::to_string(current.cols()));
    }
    chain.push_back(std::move(next));
  }
  return chain;
}

/// Number of nonzero terms in the descending central sequence.
inline int nilpotency_degree(const GradedAlgebra& a) {
  return static_cast<int>(descending_central_sequence(a).size()) - 1;
}

struct Violation {
  std::string invariant;  // antisymmetry | jacobi | grading | nilpotency
  double residual;
  std::string detail;
};

struct VerificationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  std::string summary() const {
    if (valid()) return "valid";
    std::ostringstream os;
    for (std::size_t k = 0; k < violations.size(); ++k) {
      if (k) os << "; ";
      os << violations[k].invariant << " (residual " << violations[k].residual << ", "
         << violations[k].detail << ")";
    }
    return os.str();
  }
};

inline VerificationReport verify_graded(const GradedAlgebra& a) {
  VerificationReport report;
  const int n = a.dim();
  const double tol = 1e-12;
  const double mag = std::max(1.0, a.tensor_magnitude());

  {
    double worst = 0.0;
    std::string where;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
          const double r = std::abs(a.c(i, j, l) + a.c(j, i, l));
          if (r > worst) {
            worst = r;
            where = "c[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "][" +
                    std::to_string(l + 1) + "]";
          }
        }
      }
    }
    if (worst > tol * mag) report.violations.push_back({"antisymmetry", worst, where});
  }

  {
    double worst = 0.0;
    std::string where;
    for (int i = 0; i < n; ++i) {
      const AlgebraVector ei = a.basis_vector(i);
      for (int j = i + 1; j < n; ++j) {
        const AlgebraVector ej = a.basis_vector(j);
        for (int k = j + 1; k < n; ++k) {
          const AlgebraVector ek = a.basis_vector(k);
          const AlgebraVector jac = bracket(a, ei, bracket(a, ej, ek)) + bracket(a, ej, bracket(a, ek, ei)) +
                                    bracket(a, ek, bracket(a, ei, ej));
          const double r = jac.cwiseAbs().maxCoeff();
          if (r > worst) {
            worst = r;
            where = "(" + a.labels()[i] + ", " + a.labels()[j] + ", " + a.labels()[k] + ")";
          }
        }
      }
    }
    if (worst > tol * mag * mag) report.violations.push_back({"jacobi", worst, where});
  }

  {
    double worst = 0.0;
    std::string where;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int target = a.layer_of(i) + a.layer_of(j);
        for (int l = 0; l < n; ++l) {
          const double v = std::abs(a.c(i, j, l));
          if (v == 0.0) continue;
          if (target > a.steps() || a.layer_of(l) != target) {
            if (v > worst) {
              worst = v;
              where = "[" + a.labels()[i] + ", " + a.labels()[j] + "] has " + a.labels()[l] +
                      "-component outside layer " + std::to_string(target);
            }
          }
        }
      }
    }
    if (worst > tol * mag) report.violations.push_back({"grading", worst, where});
  }

  try {
    const int degree = nilpotency_degree(a);
    if (degree > a.steps()) {
      report.violations.push_back({"nilpotency", static_cast<double>(degree),
                                   "degree " + std::to_string(degree) + " exceeds " +
                                       std::to_string(a.steps()) + " declared layers"});
    }
  } catch (const NotNilpotentError& e) {
    report.violations.push_back({"nilpotency", 1.0, e.what()});
  }
  return report;
}

/// Orthonormal basis of the Lie subalgebra generated by layer 1. A graded
/// algebra is bracket generating when this spans everything.
inline Eigen::MatrixXd horizontal_generated_span(const GradedAlgebra& a) {
  const int n = a.dim();
  const int d1 = a.horizontal_dim();
  Eigen::MatrixXd span = Eigen::MatrixXd::Identity(n, d1);
  Eigen::MatrixXd frontier = span;
  for (int depth = 1; depth < n && frontier.cols() > 0; ++depth) {
    Eigen::MatrixXd next(n, frontier.cols() * d1);
    for (Eigen::Index b = 0; b < frontier.cols(); ++b) {
      for (int j = 0; j < d1; ++j) next.col(b * d1 + j) = bracket(a, a.basis_vector(j), frontier.col(b));
    }
    Eigen::MatrixXd combined(n, span.cols() + next.cols());
    combined << span, next;
    Eigen::MatrixXd grown = detail::span_basis(combined);
    if (grown.cols() == span.cols()) break;
    span = grown;
    frontier = detail::span_basis(next);
  }
  return detail::span_basis(span);
}

inline bool is_bracket_generating(const GradedAlgebra& a) {
  return horizontal_generated_span(a).cols() == a.dim();
}

}  // namespace carnot

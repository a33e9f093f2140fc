#pragma once

#include "carnot/group.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace carnot {

struct OptimizerBudget {
  int segments = 64;       // piecewise-constant pieces of the witness
  int max_segments = 256;  // cap for doubling on stagnation
  int basis = 12;          // smooth basis functions per control direction
  int starts = 8;          // random starts per solve
  int max_outer = 30;      // multiplier updates
  int max_inner = 400;     // BFGS iterations per update
  double tolerance = 1e-9; // endpoint tolerance at unit gauge
};

/**
 * Endpoint map of m equal-duration constant controls whose values are
 * sampled from K smooth functions per control direction. The functions are
 * orthonormal on the sample grid, so the path energy is a plain quadratic
 * form in the coefficients and the first function carries the mean.
 */
class EndpointModel {
 public:
  /// directions: n x c algebra vectors the controls act along; gram: c x c.
  EndpointModel(const CarnotGroup& g, int segments, int basis, Eigen::MatrixXd directions, Eigen::MatrixXd gram)
      : group_(g), m_(segments), k_(std::min(basis, segments)), dirs_(std::move(directions)), gram_(std::move(gram)) {
    if (m_ < 1 || k_ < 1) throw InputError("segment and basis counts must be positive");
    c_ = static_cast<int>(dirs_.cols());
    phi_ = grid_basis(m_, k_);
  }

  const CarnotGroup& group() const { return group_; }
  int segments() const { return m_; }
  int basis() const { return k_; }
  int controls() const { return c_; }
  int params() const { return k_ * c_; }
  const Eigen::MatrixXd& directions() const { return dirs_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// phi(j, k): basis function k at the midpoint of segment j.
  const Eigen::MatrixXd& phi() const { return phi_; }

  /// Control values, one column per segment.
  Eigen::MatrixXd controls_of(const Eigen::VectorXd& a) const {
    const Eigen::Map<const Eigen::MatrixXd> coef(a.data(), c_, k_);
    return coef * phi_.transpose();
  }

  double energy(const Eigen::VectorXd& a) const {
    const Eigen::Map<const Eigen::MatrixXd> coef(a.data(), c_, k_);
    return (coef.transpose() * gram_ * coef).trace();
  }

  Eigen::VectorXd energy_gradient(const Eigen::VectorXd& a) const {
    const Eigen::Map<const Eigen::MatrixXd> coef(a.data(), c_, k_);
    Eigen::MatrixXd g = 2.0 * gram_ * coef;
    return Eigen::Map<Eigen::VectorXd>(g.data(), g.size());
  }

  /// Sum over segments of duration * |control|.
  double length(const Eigen::VectorXd& a) const {
    const Eigen::MatrixXd u = controls_of(a);
    double total = 0.0;
    for (int j = 0; j < m_; ++j) total += std::sqrt(std::max(0.0, u.col(j).dot(gram_ * u.col(j))));
    return total / m_;
  }

  AlgebraVector endpoint(const Eigen::VectorXd& a) const {
    const Eigen::MatrixXd steps = dirs_ * controls_of(a) / m_;
    const int n = group_.dim();
    AlgebraVector x = AlgebraVector::Zero(n), next(n);
    BchTable::Workspace ws;
    for (int j = 0; j < m_; ++j) {
      group_.bch_table().product(group_.algebra(), x.data(), steps.col(j).data(), next.data(), ws);
      x.swap(next);
    }
    return x;
  }

  /// Endpoint and its n x params Jacobian by forward propagation of tangents.
  AlgebraVector endpoint_jacobian(const Eigen::VectorXd& a, Eigen::MatrixXd& jac) const {
    const int n = group_.dim();
    const int p = params();
    const Eigen::MatrixXd steps = dirs_ * controls_of(a) / m_;
    AlgebraVector x = AlgebraVector::Zero(n), next(n);
    Eigen::MatrixXd xd = Eigen::MatrixXd::Zero(n, p), nextd(n, p), yd(n, p);
    BchTable::Workspace ws;
    for (int j = 0; j < m_; ++j) {
      for (int k = 0; k < k_; ++k) yd.middleCols(k * c_, c_) = (phi_(j, k) / m_) * dirs_;
      group_.bch_table().product_jet(group_.algebra(), x.data(), xd.data(), steps.col(j).data(), yd.data(), p,
                                     next.data(), nextd.data(), ws);
      x.swap(next);
      xd.swap(nextd);
    }
    jac = std::move(xd);
    return x;
  }

  /// Coefficients of constant control u (straight segment with endpoint u).
  Eigen::VectorXd constant(const Eigen::VectorXd& u) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(params());
    a.head(c_) = u / phi_(0, 0);
    return a;
  }

  /// Coefficients for a finer model, matching the control at every new midpoint
  /// as well as the old basis allows.
  Eigen::VectorXd transfer(const Eigen::VectorXd& a, const EndpointModel& finer) const {
    const Eigen::Map<const Eigen::MatrixXd> coef(a.data(), c_, k_);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(c_, finer.k_);
    // Both bases are orthonormal polynomial families on their grids; project
    // the old control (evaluated through its polynomial) onto the new one.
    const Eigen::MatrixXd fine_phi_old = grid_basis_at(finer.m_, k_, m_);
    const Eigen::MatrixXd u = coef * fine_phi_old.transpose();  // c x finer.m
    out = u * finer.phi_ / finer.m_;
    return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
  }

 private:
  static double legendre(int k, double x) {
    double p0 = 1.0, p1 = x;
    if (k == 0) return p0;
    for (int i = 2; i <= k; ++i) {
      const double p2 = ((2.0 * i - 1.0) * x * p1 - (i - 1.0) * p0) / i;
      p0 = p1;
      p1 = p2;
    }
    return p1;
  }

  /// Legendre polynomials orthonormalized on the m-point midpoint grid.
  /// Returns the transform so the same polynomials can be evaluated elsewhere.
  static Eigen::MatrixXd orthonormalizer(int m, int k) {
    Eigen::MatrixXd raw(m, k);
    for (int j = 0; j < m; ++j) {
      const double x = 2.0 * (j + 0.5) / m - 1.0;
      for (int q = 0; q < k; ++q) raw(j, q) = legendre(q, x);
    }
    // raw = Q R with Q^T Q = m I; phi = raw R^{-1}.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    r /= std::sqrt(static_cast<double>(m));
    for (int q = 0; q < k; ++q) {
      if (r(q, q) < 0) r.row(q) *= -1.0;
    }
    return r.inverse();
  }

  static Eigen::MatrixXd grid_basis(int m, int k) { return grid_basis_at(m, k, m); }

  /// Basis orthonormalized on the m_ref grid, evaluated at the m-point grid.
  static Eigen::MatrixXd grid_basis_at(int m, int k, int m_ref) {
    const Eigen::MatrixXd t = orthonormalizer(m_ref, k);
    Eigen::MatrixXd raw(m, k);
    for (int j = 0; j < m; ++j) {
      const double x = 2.0 * (j + 0.5) / m - 1.0;
      for (int q = 0; q < k; ++q) raw(j, q) = legendre(q, x);
    }
    return raw * t;
  }

  CarnotGroup group_;
  int m_;
  int k_;
  int c_ = 0;
  Eigen::MatrixXd dirs_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd phi_;
};

/// Objective returning value and writing the gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// BFGS with Armijo backtracking; skips updates that break positivity.
inline BfgsResult bfgs(const Objective& f, Eigen::VectorXd x, int max_iter, double grad_tol) {
  const auto n = x.size();
  Eigen::VectorXd g(n), g_new(n);
  double fx = f(x, g);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= grad_tol) break;
    Eigen::VectorXd dir = -h * g;
    double slope = g.dot(dir);
    if (slope >= 0) {
      h.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      h += (rho * rho * y.dot(hy) + rho) * s * s.transpose() - rho * (hy * s.transpose() + s * hy.transpose());
    }
    const bool tiny = std::abs(fx - f_new) <= 1e-16 * std::max(1.0, std::abs(fx));
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    if (tiny && g.lpNorm<Eigen::Infinity>() <= 1e3 * grad_tol) break;
  }
  return {x, fx, g.lpNorm<Eigen::Infinity>(), it};
}

struct SolveResult {
  Eigen::VectorXd a;
  Eigen::VectorXd multipliers;
  double residual = std::numeric_limits<double>::infinity();  // max-abs endpoint defect
  double length = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/**
 * Gauss-Newton steps of minimal energy-norm that drive the endpoint onto the
 * target, with step halving. Leaves the input untouched if the Jacobian is
 * singular.
 */
inline SolveResult project_feasible(const EndpointModel& model, const AlgebraVector& target, Eigen::VectorXd a,
                                    int max_iter = 30, double tol = 1e-13) {
  const int c = model.controls();
  const Eigen::MatrixXd ginv = model.gram().inverse();
  Eigen::MatrixXd jac;
  AlgebraVector f = model.endpoint_jacobian(a, jac) - target;
  double res = f.lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());
  int it = 0;
  for (; it < max_iter && res > tol * scale; ++it) {
    // H^{-1} J^T with H = blockdiag(G, ..., G).
    Eigen::MatrixXd hj(jac.cols(), jac.rows());
    for (int k = 0; k < model.basis(); ++k) hj.middleRows(k * c, c) = ginv * jac.middleCols(k * c, c).transpose();
    const Eigen::MatrixXd normal = jac * hj;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * normal.norm()) break;
    const Eigen::VectorXd delta = -hj * ldlt.solve(f);
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 20; ++ls) {
      const Eigen::VectorXd trial = a + step * delta;
      const AlgebraVector ft = model.endpoint(trial) - target;
      if (ft.lpNorm<Eigen::Infinity>() < res) {
        a = trial;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    f = model.endpoint_jacobian(a, jac) - target;
    res = f.lpNorm<Eigen::Infinity>();
  }
  SolveResult r;
  r.a = std::move(a);
  r.residual = res;
  r.length = model.length(r.a);
  r.iterations = it;
  return r;
}

struct SqpState {
  Eigen::VectorXd a;
  Eigen::VectorXd multipliers;
  Eigen::MatrixXd hessian;  // quasi-Newton Hessian of the Lagrangian
};

/**
 * SQP on min E(a) s.t. endpoint(a) = target: KKT steps with a damped BFGS
 * Lagrangian Hessian, l1 merit line search and a second-order correction
 * against the Maratos effect. Fast from warm starts; may stall from far away.
 */
inline SolveResult sqp(const EndpointModel& model, const AlgebraVector& target, SqpState& state, int max_iter,
                       double tol = 1e-12) {
  const int n = model.group().dim();
  const int p = model.params();
  Eigen::VectorXd& a = state.a;
  Eigen::VectorXd& lambda = state.multipliers;
  Eigen::MatrixXd& b = state.hessian;
  if (lambda.size() != n) lambda = Eigen::VectorXd::Zero(n);
  if (b.rows() != p) {
    b = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < model.basis(); ++k) {
      b.block(k * model.controls(), k * model.controls(), model.controls(), model.controls()) = 2.0 * model.gram();
    }
  }
  const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());
  Eigen::MatrixXd jac, jac_new;
  AlgebraVector f = model.endpoint_jacobian(a, jac) - target;
  double nu = 1.0;
  int it = 0;
  Eigen::MatrixXd kkt(p + n, p + n);
  Eigen::VectorXd rhs(p + n);
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd g = model.energy_gradient(a);
    kkt.setZero();
    kkt.topLeftCorner(p, p) = b;
    kkt.topRightCorner(p, n) = jac.transpose();
    kkt.bottomLeftCorner(n, p) = jac;
    rhs.head(p) = -g;
    rhs.tail(n) = -f;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) break;
    const Eigen::VectorXd d = sol.head(p);
    const Eigen::VectorXd lambda_new = sol.tail(n);
    const double stationarity = (g + jac.transpose() * lambda_new).lpNorm<Eigen::Infinity>();
    if (f.lpNorm<Eigen::Infinity>() <= tol * scale && stationarity <= 1e-9 * std::max(1.0, g.norm())) {
      lambda = lambda_new;
      break;
    }
    nu = std::max(nu, 1.5 * lambda_new.lpNorm<Eigen::Infinity>() + 1e-3);
    auto merit = [&](const Eigen::VectorXd& x, AlgebraVector& fx) {
      fx = model.endpoint(x) - target;
      return model.energy(x) + nu * fx.lpNorm<1>();
    };
    const double phi0 = model.energy(a) + nu * f.lpNorm<1>();
    const double deriv = g.dot(d) - nu * f.lpNorm<1>();
    double alpha = 1.0;
    Eigen::VectorXd trial;
    AlgebraVector ft;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      trial = a + alpha * d;
      if (merit(trial, ft) <= phi0 + 1e-4 * alpha * std::min(deriv, 0.0)) {
        accepted = true;
        break;
      }
      if (ls == 0) {
        // Second-order correction: pull the full step back onto the constraint.
        const Eigen::MatrixXd jjt = jac * jac.transpose();
        const Eigen::VectorXd corr = -jac.transpose() * jjt.ldlt().solve(ft);
        Eigen::VectorXd soc = trial + corr;
        AlgebraVector fs;
        if (soc.allFinite() && merit(soc, fs) <= phi0 + 1e-4 * std::min(deriv, 0.0)) {
          trial = soc;
          ft = fs;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    const AlgebraVector f_new = model.endpoint_jacobian(trial, jac_new) - target;
    const Eigen::VectorXd s = trial - a;
    Eigen::VectorXd y = model.energy_gradient(trial) - g + (jac_new - jac).transpose() * lambda_new;
    const Eigen::VectorXd bs = b * s;
    const double sbs = s.dot(bs);
    if (sbs > 1e-300) {
      double sy = s.dot(y);
      if (sy < 0.2 * sbs) {
        const double theta = 0.8 * sbs / (sbs - sy);
        y = theta * y + (1.0 - theta) * bs;
        sy = s.dot(y);
      }
      if (sy > 0) b += y * y.transpose() / sy - bs * bs.transpose() / sbs;
    }
    a = trial;
    lambda = lambda_new;
    jac.swap(jac_new);
    f = f_new;
  }
  SolveResult r = project_feasible(model, target, a, 10);
  state.a = r.a;
  r.multipliers = lambda;
  r.iterations += it;
  return r;
}

/**
 * Minimizes path energy subject to endpoint = target with an augmented
 * Lagrangian: BFGS on E + l.F + mu/2 |F|^2, multiplier update after each
 * inner solve, mu x10 when the defect stops shrinking. Finishes with a
 * feasibility projection.
 */
inline SolveResult augmented_lagrangian(const EndpointModel& model, const AlgebraVector& target, Eigen::VectorXd a,
                                        Eigen::VectorXd multipliers, double mu, const OptimizerBudget& budget) {
  const int n = model.group().dim();
  if (multipliers.size() != n) multipliers = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd jac;
  double prev = std::numeric_limits<double>::infinity();
  int total = 0;
  for (int outer = 0; outer < budget.max_outer; ++outer) {
    const Objective obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      const AlgebraVector f = model.endpoint_jacobian(x, jac) - target;
      grad = model.energy_gradient(x) + jac.transpose() * (multipliers + mu * f);
      return model.energy(x) + multipliers.dot(f) + 0.5 * mu * f.squaredNorm();
    };
    const auto inner = bfgs(obj, a, budget.max_inner, 1e-9);
    a = inner.x;
    total += inner.iterations;
    const AlgebraVector f = model.endpoint(a) - target;
    const double feas = f.lpNorm<Eigen::Infinity>();
    multipliers += mu * f;
    if (feas < 1e-7 && inner.gradient_norm < 1e-6) break;
    if (feas > 0.25 * prev) mu = std::min(mu * 10.0, 1e8);
    prev = feas;
  }
  SolveResult r = project_feasible(model, target, a);
  r.multipliers = multipliers;
  r.iterations += total;
  return r;
}

}  // namespace carnot

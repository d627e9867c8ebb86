#pragma once

// Accelerated proximal gradient (FISTA) with backtracking, and the two
// proximal operators the learning problems need.

#include <ssdl/core.hpp>

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>

namespace ssdl {

struct FistaParams {
  double tau0 = 1.0;     // initial inverse step
  double eta = 1.5;      // backtracking growth factor
  int max_iters = 50;
  double rel_tol = 1e-6;  // stop once the relative change of the composite objective drops below this
  int max_backtracks = 200;

  void validate() const {
    detail::require_config(tau0 > 0.0 && std::isfinite(tau0), "fista: tau0 must be positive");
    detail::require_config(eta > 1.0 && std::isfinite(eta), "fista: eta must exceed 1");
    detail::require_config(max_iters >= 1, "fista: max_iters must be at least 1");
    detail::require_config(rel_tol >= 0.0, "fista: rel_tol must be nonnegative");
    detail::require_config(max_backtracks >= 1, "fista: max_backtracks must be at least 1");
  }
};

/// One accepted FISTA step. The sufficient-decrease test is
/// `smooth_at_prox <= upper_bound + slack`.
struct FistaStep {
  double tau = 0.0;
  double smooth_at_prox = 0.0;
  double upper_bound = 0.0;
  double slack = 0.0;
  double prox_objective = 0.0;  // composite objective at the proximal point
  double objective = 0.0;       // composite objective at the retained iterate Z_n
  bool accepted = true;         // false when the proximal point did not improve and Z_n = Z_{n-1}
  int backtracks = 0;
};

struct FistaResult {
  Matrix solution;  // the last retained iterate, which has the lowest objective seen
  double initial_objective = 0.0;
  double objective = 0.0;
  std::vector<FistaStep> steps;
  bool converged = false;
};

/// Smooth part f2 (value and gradient), nonsmooth part f1 and the proximal map of f1.
template <typename P>
concept SmoothProxProblem = requires(const P& p, const Matrix& m, double step) {
  { p.smooth_value(m) } -> std::convertible_to<double>;
  { p.smooth_gradient(m) } -> std::convertible_to<Matrix>;
  { p.prox(m, step) } -> std::convertible_to<Matrix>;
  { p.nonsmooth_value(m) } -> std::convertible_to<double>;
};

/// Type-erased problem, convenient for one-off compositions.
struct FunctionalProblem {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  std::function<Matrix(const Matrix&, double)> proximal;
  std::function<double(const Matrix&)> penalty;  // may be empty (f1 = 0)

  double smooth_value(const Matrix& m) const { return value(m); }
  Matrix smooth_gradient(const Matrix& m) const { return gradient(m); }
  Matrix prox(const Matrix& m, double step) const { return proximal ? proximal(m, step) : m; }
  double nonsmooth_value(const Matrix& m) const { return penalty ? penalty(m) : 0.0; }
};

/// Elementwise sign(h) * max(|h| - t, 0): the proximal map of t * ||.||_1.
inline Matrix soft_threshold(const Matrix& H, double t) {
  detail::require(t >= 0.0, "soft_threshold: threshold must be nonnegative");
  return H.unaryExpr([t](double h) {
    const double m = std::abs(h) - t;
    return m > 0.0 ? std::copysign(m, h) : 0.0;
  });
}

/// Rescales every column whose l2 norm exceeds alpha back onto the sphere of radius alpha.
inline Matrix project_columns_l2(Matrix M, double alpha) {
  detail::require(alpha > 0.0, "project_columns_l2: alpha must be positive");
  for (Index j = 0; j < M.cols(); ++j) {
    const double norm = M.col(j).norm();
    if (norm <= alpha) continue;
    double scale = alpha / norm;
    // rounding can leave the norm one ulp above alpha; shrink until it is inside so the map is idempotent
    while ((M.col(j) * scale).norm() > alpha) scale = std::nextafter(scale, 0.0);
    M.col(j) *= scale;
  }
  return M;
}

template <SmoothProxProblem Problem>
FistaResult fista(const Problem& problem, const Matrix& x0, const FistaParams& params) {
  params.validate();
  auto composite = [&](const Matrix& m, double smooth) { return smooth + problem.nonsmooth_value(m); };

  FistaResult result;
  Matrix z_prev = x0;  // Z_n
  Matrix y = x0;       // extrapolated point A_n
  double t = 1.0;
  double tau = params.tau0;

  const double f_start = problem.smooth_value(x0);
  result.initial_objective = composite(x0, f_start);
  if (!std::isfinite(result.initial_objective)) throw NumericalFailure("fista: non-finite objective at start", 0);
  result.solution = x0;
  result.objective = result.initial_objective;
  double previous = result.initial_objective;

  for (int n = 0; n < params.max_iters; ++n) {
    const double f_y = n == 0 ? f_start : problem.smooth_value(y);
    const Matrix grad = problem.smooth_gradient(y);
    if (!std::isfinite(f_y) || !grad.allFinite()) throw NumericalFailure("fista: non-finite smooth term", n);

    FistaStep step;
    step.slack = 1e-12 * (1.0 + std::abs(f_y));
    Matrix z;
    for (int b = 0;; ++b) {
      if (b >= params.max_backtracks) throw NumericalFailure("fista: backtracking did not terminate", n);
      z = problem.prox(y - grad / tau, 1.0 / tau);
      const double f_z = problem.smooth_value(z);
      const Matrix diff = z - y;
      const double bound = f_y + (diff.array() * grad.array()).sum() + 0.5 * tau * diff.squaredNorm();
      if (std::isfinite(f_z) && f_z <= bound + step.slack) {
        step.tau = tau;
        step.smooth_at_prox = f_z;
        step.upper_bound = bound;
        step.backtracks = b;
        break;
      }
      tau *= params.eta;
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(4.0 * t * t + 1.0));
    step.prox_objective = composite(z, step.smooth_at_prox);
    if (!std::isfinite(step.prox_objective)) throw NumericalFailure("fista: non-finite objective", n);

    // Monotone form: keep Z_{n-1} when the proximal point does not improve. With acceptance the
    // extrapolation reduces to Z_n + ((t_n - 1) / t_{n+1}) (Z_n - Z_{n-1}).
    step.accepted = step.prox_objective <= result.objective;
    if (step.accepted) {
      y = z + ((t - 1.0) / t_next) * (z - z_prev);
      result.objective = step.prox_objective;
      result.solution = z;
      z_prev = std::move(z);
    } else {
      y = z_prev + (t / t_next) * (z - z_prev);
    }
    t = t_next;
    step.objective = result.objective;
    result.steps.push_back(step);

    const double change = std::abs(previous - step.prox_objective);
    if (change <= params.rel_tol * std::max(std::abs(previous), std::numeric_limits<double>::min())) {
      result.converged = true;
      break;
    }
    previous = step.prox_objective;
  }
  return result;
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
template <typename Apply>
double power_iteration(Apply&& apply, Index dim, int iterations = 20) {
  if (dim == 0) return 0.0;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = apply(v);
    lambda = v.dot(w);
    const double norm = w.norm();
    if (!(norm > 0.0)) return 0.0;
    v = w / norm;
  }
  return std::max(lambda, v.dot(apply(v)));
}

}  // namespace ssdl

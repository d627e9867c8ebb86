#pragma once

// Independent reference implementations used by the tests. Each one takes the
// slow, literal route: scalar loops, dense systems, exhaustive searches.

#include <ssdl/model.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using ssdl::Index;
using ssdl::Matrix;
using ssdl::Vector;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

/// k nearest columns of X to column i (self excluded) by sorting every distance.
inline std::vector<Index> brute_knn(const Matrix& X, Index i, Index k) {
  std::vector<std::pair<double, Index>> all;
  for (Index j = 0; j < X.cols(); ++j) {
    if (j == i) continue;
    double d = 0.0;
    for (Index f = 0; f < X.rows(); ++f) d += (X(f, i) - X(f, j)) * (X(f, i) - X(f, j));
    all.emplace_back(d, j);
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index m = 0; m < k; ++m) out.push_back(all[static_cast<std::size_t>(m)].second);
  return out;
}

/// Constrained least squares min ||t - N w||^2 + reg ||w||^2 s.t. sum w = 1 via the dense
/// Lagrange system.
inline Vector lagrange_barycentric(const Vector& t, const Matrix& N, double reg) {
  const Index k = N.cols();
  Matrix Z(N.rows(), k);
  for (Index j = 0; j < k; ++j) Z.col(j) = t - N.col(j);
  Matrix K = Matrix::Zero(k + 1, k + 1);
  K.topLeftCorner(k, k) = 2.0 * (Z.transpose() * Z + reg * Matrix::Identity(k, k));
  K.block(0, k, k, 1).setOnes();
  K.block(k, 0, 1, k).setOnes();
  Vector rhs = Vector::Zero(k + 1);
  rhs(k) = 1.0;
  return K.fullPivLu().solve(rhs).head(k);
}

/// Generic quadratic plus l1: 0.5 v^T H v + g^T v + c + lambda |v|_1.
struct QuadraticL1 {
  Matrix H;
  Vector g;
  double c = 0.0;
  double lambda = 0.0;

  double value(const Vector& v) const { return 0.5 * v.dot(H * v) + g.dot(v) + c + lambda * v.cwiseAbs().sum(); }
};

/// Cyclic coordinate descent on a QuadraticL1 with a positive diagonal.
inline Vector coordinate_descent(const QuadraticL1& q, Vector v, int sweeps = 20000, double tol = 1e-15) {
  for (int s = 0; s < sweeps; ++s) {
    double change = 0.0;
    for (Index m = 0; m < v.size(); ++m) {
      const double rest = q.g(m) + q.H.row(m).dot(v) - q.H(m, m) * v(m);
      const double z = -rest;
      const double updated = std::copysign(std::max(std::abs(z) - q.lambda, 0.0), z) / q.H(m, m);
      change = std::max(change, std::abs(updated - v(m)));
      v(m) = updated;
    }
    if (change < tol) break;
  }
  return v;
}

inline Vector vec(const Matrix& A) { return Eigen::Map<const Vector>(A.data(), A.size()); }
inline Matrix unvec(const Vector& v, Index rows, Index cols) { return Eigen::Map<const Matrix>(v.data(), rows, cols); }

/// The sparse coding objective as an explicit quadratic in vec(A) (column-major), assembled
/// term by term from scalar definitions.
inline QuadraticL1 coding_quadratic(const Matrix& X, const Matrix& D, const ssdl::NeighborGraph* graph,
                                    const ssdl::Classifier* clf, const Matrix* Ql, const std::vector<Matrix>* Qu,
                                    const Matrix* P, const Matrix* Y, const ssdl::HyperParams& hp) {
  const Index p = D.cols();
  const Index N = X.cols();
  const Index n = X.rows();
  QuadraticL1 q;
  q.H = Matrix::Zero(p * N, p * N);
  q.g = Vector::Zero(p * N);
  q.lambda = hp.lambda;
  const auto at = [p](Index a, Index i) { return i * p + a; };
  for (Index i = 0; i < N; ++i) {
    for (Index f = 0; f < n; ++f) q.c += X(f, i) * X(f, i);
    for (Index a = 0; a < p; ++a) {
      for (Index f = 0; f < n; ++f) q.g(at(a, i)) += -2.0 * D(f, a) * X(f, i);
      for (Index b = 0; b < p; ++b) {
        double dd = 0.0;
        for (Index f = 0; f < n; ++f) dd += D(f, a) * D(f, b);
        q.H(at(a, i), at(b, i)) += 2.0 * dd;
      }
    }
  }
  if (graph && hp.beta != 0.0) {
    const Matrix L(graph->L);
    for (Index a = 0; a < p; ++a)
      for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j) q.H(at(a, i), at(a, j)) += 2.0 * hp.beta * L(i, j);
  }
  if (clf && hp.gamma != 0.0) {
    const Index C = clf->W.rows();
    const Index nl = Y->cols();
    const auto add_term = [&](Index i, Index c, double weight, double target) {
      if (weight == 0.0) return;
      const double off = clf->b(c) - target;
      for (Index a = 0; a < p; ++a) {
        q.g(at(a, i)) += 2.0 * hp.gamma * weight * clf->W(c, a) * off;
        for (Index b = 0; b < p; ++b) q.H(at(a, i), at(b, i)) += 2.0 * hp.gamma * weight * clf->W(c, a) * clf->W(c, b);
      }
      q.c += hp.gamma * weight * off * off;
    };
    for (Index i = 0; i < nl; ++i)
      for (Index c = 0; c < C; ++c) add_term(i, c, (*Ql)(c, i), (*Y)(c, i));
    for (Index j = 0; j < N - nl; ++j)
      for (Index k = 0; k < C; ++k)
        for (Index c = 0; c < C; ++c)
          add_term(nl + j, c, (*Qu)[static_cast<std::size_t>(k)](c, j) * std::pow((*P)(k, j), hp.r),
                   c == k ? 1.0 : -1.0);
  }
  if (clf) q.c += hp.mu * (clf->W.squaredNorm() + clf->b.squaredNorm());
  return q;
}

/// The full objective summed entry by entry.
inline double triple_loop_objective(const Matrix& X, const Matrix& D, const Matrix& A, const Matrix& L,
                                    const ssdl::Classifier& clf, const Matrix& P, const Matrix& Ql,
                                    const std::vector<Matrix>& Qu, const Matrix& Y, const ssdl::HyperParams& hp) {
  const Index n = X.rows(), p = D.cols(), N = X.cols(), nl = Y.cols(), C = clf.W.rows();
  double rec = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < N; ++j) {
      double s = 0.0;
      for (Index a = 0; a < p; ++a) s += D(i, a) * A(a, j);
      rec += (X(i, j) - s) * (X(i, j) - s);
    }
  double l1 = 0.0;
  for (Index a = 0; a < p; ++a)
    for (Index j = 0; j < N; ++j) l1 += std::abs(A(a, j));
  double manifold = 0.0;
  for (Index a = 0; a < p; ++a)
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < N; ++j) manifold += A(a, i) * L(i, j) * A(a, j);
  const auto score = [&](Index c, Index j) {
    double s = clf.b(c);
    for (Index a = 0; a < p; ++a) s += clf.W(c, a) * A(a, j);
    return s;
  };
  double lab = 0.0;
  for (Index c = 0; c < C; ++c)
    for (Index i = 0; i < nl; ++i) {
      const double e = Ql(c, i) * (score(c, i) - Y(c, i));
      lab += e * e;
    }
  double unl = 0.0;
  for (Index k = 0; k < C; ++k)
    for (Index c = 0; c < C; ++c)
      for (Index j = 0; j < N - nl; ++j) {
        const double e = Qu[static_cast<std::size_t>(k)](c, j) * std::pow(P(k, j), hp.r / 2.0) *
                         (score(c, nl + j) - (c == k ? 1.0 : -1.0));
        unl += e * e;
      }
  double ridge = 0.0;
  for (Index c = 0; c < C; ++c) {
    ridge += clf.b(c) * clf.b(c);
    for (Index a = 0; a < p; ++a) ridge += clf.W(c, a) * clf.W(c, a);
  }
  return rec + hp.lambda * l1 + hp.beta * manifold + hp.gamma * (lab + unl) + hp.mu * ridge;
}

/// Plain proximal gradient with a fixed step 1/lipschitz.
inline Matrix ista(const std::function<Matrix(const Matrix&)>& grad,
                   const std::function<Matrix(const Matrix&, double)>& prox, Matrix x, double lipschitz,
                   int iterations) {
  const double step = 1.0 / lipschitz;
  for (int i = 0; i < iterations; ++i) x = prox(x - step * grad(x), step);
  return x;
}

inline double largest_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvalues().maxCoeff();
}

/// Central finite-difference gradient.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
    }
  return g;
}

/// sum_k p_k^r e_k minimized over a regular simplex grid with the given resolution (C = 2 or 3).
inline Vector simplex_grid_minimizer(const Vector& e, double r, int steps = 1000) {
  const auto value = [&](const Vector& p) {
    double s = 0.0;
    for (Index k = 0; k < p.size(); ++k) s += std::pow(p(k), r) * e(k);
    return s;
  };
  Vector best;
  double best_v = INFINITY;
  const double h = 1.0 / steps;
  if (e.size() == 2) {
    for (int a = 0; a <= steps; ++a) {
      Vector p(2);
      p << a * h, 1.0 - a * h;
      const double v = value(p);
      if (v < best_v) best_v = v, best = p;
    }
  } else {
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; a + b <= steps; ++b) {
        Vector p(3);
        p << a * h, b * h, 1.0 - (a + b) * h;
        const double v = value(p);
        if (v < best_v) best_v = v, best = p;
      }
  }
  return best;
}

/// Gradient descent on a per-class weighted ridge: sum_i w_i (u . z_i - t_i)^2 + mu |u|^2, z = [a; 1].
inline Vector gradient_descent_ridge(const Matrix& Z, const Vector& w, const Vector& t, double gamma, double mu,
                                     int iterations) {
  Matrix H = 2.0 * mu * Matrix::Identity(Z.rows(), Z.rows());
  for (Index i = 0; i < Z.cols(); ++i) H += 2.0 * gamma * w(i) * Z.col(i) * Z.col(i).transpose();
  const double step = 1.0 / largest_eigenvalue(H);
  Vector u = Vector::Zero(Z.rows());
  for (int it = 0; it < iterations; ++it) {
    Vector g = 2.0 * mu * u;
    for (Index i = 0; i < Z.cols(); ++i) g += 2.0 * gamma * w(i) * (u.dot(Z.col(i)) - t(i)) * Z.col(i);
    u -= step * g;
  }
  return u;
}

}  // namespace oracle

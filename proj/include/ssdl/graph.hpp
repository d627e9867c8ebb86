#pragma once

// Neighbourhood graphs over sample columns and the Laplacians built from them.
//
// All builders return an N x N Laplacian rescaled so that trace(L) equals a
// caller supplied target (the number of samples the graph was built on).

#include <ssdl/core.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace ssdl {

struct NeighborGraph {
  Index k = 0;
  std::vector<IndexList> indices;  // knn(i), nearest first; empty for threshold graphs
  SparseMatrix V;                  // barycentric weights, row i supported on knn(i) (LLE only)
  SparseMatrix L;                  // normalized Laplacian
  double omega = 1.0;              // L = omega * L_raw
  bool degenerate = false;         // no edges: L is zero and was left unnormalized

  Index size() const { return L.rows(); }
};

struct GaussianGraphParams {
  double sigma = 1.0;
  double zeta = 0.1;  // distance percentile for the threshold variant, in (0, 1]
  Index k = 5;        // neighbour count for the knn variant

  void validate() const {
    detail::require_config(sigma > 0.0 && std::isfinite(sigma), "graph: sigma must be positive");
    detail::require_config(zeta > 0.0 && zeta <= 1.0, "graph: zeta must lie in (0, 1]");
    detail::require_config(k >= 1, "graph: k must be at least 1");
  }
};

/// Regularization of the local Gram system relative to its mean diagonal.
inline constexpr double kGramRegularization = 1e-3;

/// The k training columns of `X` closest to `x`, nearest first; ties go to the lower index.
/// `exclude` (if >= 0) is skipped, which is how a sample is kept out of its own neighbourhood.
inline IndexList knn_query(const Matrix& X, const Eigen::Ref<const Vector>& x, Index k, Index exclude = -1) {
  const Index n = X.cols();
  const Index available = exclude >= 0 ? n - 1 : n;
  if (k < 1 || k > available) {
    throw InvalidConfiguration("knn: k=" + std::to_string(k) + " needs at least " + std::to_string(k) +
                               " candidate samples, have " + std::to_string(available));
  }
  std::vector<std::pair<double, Index>> dist;
  dist.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    if (j == exclude) continue;
    dist.emplace_back((X.col(j) - x).squaredNorm(), j);
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  IndexList out(static_cast<std::size_t>(k));
  for (Index m = 0; m < k; ++m) out[static_cast<std::size_t>(m)] = dist[static_cast<std::size_t>(m)].second;
  return out;
}

/// k nearest neighbours of every column of X among the other columns.
inline std::vector<IndexList> knn_indices(const Matrix& X, Index k) {
  if (k >= X.cols()) {
    throw InvalidConfiguration("knn: k=" + std::to_string(k) + " must be smaller than the sample count " +
                               std::to_string(X.cols()));
  }
  std::vector<IndexList> out(static_cast<std::size_t>(X.cols()));
  for (Index i = 0; i < X.cols(); ++i) out[static_cast<std::size_t>(i)] = knn_query(X, X.col(i), k, i);
  return out;
}

/// Affine weights (summing to one) that best reconstruct `target` from the columns of `neighbors`.
inline Vector barycentric_weights(const Eigen::Ref<const Vector>& target, const Matrix& neighbors) {
  const Index k = neighbors.cols();
  detail::require(k >= 1, "barycentric_weights: need at least one neighbour");
  detail::require(neighbors.rows() == target.size(), "barycentric_weights: dimension mismatch");
  Matrix diff = neighbors.colwise() - target;
  Matrix gram = diff.transpose() * diff;
  const double trace = gram.trace();
  if (!(trace > 0.0)) return Vector::Constant(k, 1.0 / static_cast<double>(k));
  gram.diagonal().array() += kGramRegularization * trace / static_cast<double>(k);
  Vector w = gram.llt().solve(Vector::Ones(k));
  return w / w.sum();
}

namespace detail {

inline NeighborGraph normalize_laplacian(NeighborGraph g, double trace_target) {
  double trace = 0.0;
  for (Index i = 0; i < g.L.rows(); ++i) trace += g.L.coeff(i, i);
  if (!(trace > 0.0)) {
    g.degenerate = true;
    g.omega = 0.0;
    return g;
  }
  g.omega = trace_target / trace;
  g.L *= g.omega;
  return g;
}

inline SparseMatrix laplacian_from_adjacency(const std::vector<Eigen::Triplet<double>>& edges, Index n) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(edges.size() + static_cast<std::size_t>(n));
  Vector degree = Vector::Zero(n);
  for (const auto& e : edges) {
    t.emplace_back(e.row(), e.col(), -e.value());
    degree(e.row()) += e.value();
  }
  for (Index i = 0; i < n; ++i) t.emplace_back(i, i, degree(i));
  SparseMatrix L(n, n);
  L.setFromTriplets(t.begin(), t.end());
  L.prune(0.0);
  return L;
}

}  // namespace detail

/// LLE graph: V holds barycentric weights over knn(i) and L = (I - V)^T (I - V), so that
/// tr(A L A^T) = omega * sum_i ||a_i - sum_j V[i,j] a_j||^2.
inline NeighborGraph build_lle_graph(const Matrix& X, Index k, double trace_target) {
  detail::require_config(k >= 1, "lle graph: k must be at least 1");
  detail::require_config(trace_target > 0.0, "lle graph: trace target must be positive");
  const Index n = X.cols();
  NeighborGraph g;
  g.k = k;
  g.indices = knn_indices(X, k);

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(n * k));
  Matrix nb(X.rows(), k);
  for (Index i = 0; i < n; ++i) {
    const auto& idx = g.indices[static_cast<std::size_t>(i)];
    for (Index m = 0; m < k; ++m) nb.col(m) = X.col(idx[static_cast<std::size_t>(m)]);
    const Vector w = barycentric_weights(X.col(i), nb);
    for (Index m = 0; m < k; ++m) t.emplace_back(i, idx[static_cast<std::size_t>(m)], w(m));
  }
  g.V.resize(n, n);
  g.V.setFromTriplets(t.begin(), t.end());

  SparseMatrix I(n, n);
  I.setIdentity();
  const SparseMatrix M = I - g.V;
  g.L = SparseMatrix(M.transpose()) * M;
  g.L.prune(0.0);
  return detail::normalize_laplacian(std::move(g), trace_target);
}

/// Gaussian weights on the symmetrized knn support, L = Deg - W.
inline NeighborGraph build_gaussian_knn_laplacian(const Matrix& X, const GaussianGraphParams& params,
                                                  double trace_target) {
  params.validate();
  const Index n = X.cols();
  NeighborGraph g;
  g.k = params.k;
  g.indices = knn_indices(X, params.k);

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) {
    for (Index j : g.indices[static_cast<std::size_t>(i)]) {
      support(i, j) = true;
      support(j, i) = true;
    }
  }
  const double denom = 2.0 * params.sigma * params.sigma;
  std::vector<Eigen::Triplet<double>> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (!support(i, j)) continue;
      edges.emplace_back(i, j, std::exp(-(X.col(i) - X.col(j)).squaredNorm() / denom));
    }
  }
  g.L = detail::laplacian_from_adjacency(edges, n);
  return detail::normalize_laplacian(std::move(g), trace_target);
}

/// Linear-interpolated `zeta` quantile of all N(N-1)/2 pairwise distances.
inline double distance_quantile(const Matrix& X, double zeta) {
  const Index n = X.cols();
  detail::require_config(n >= 2, "distance quantile: need at least two samples");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d.push_back((X.col(i) - X.col(j)).norm());
  std::sort(d.begin(), d.end());
  const double pos = zeta * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, d.size() - 1);
  return d[lo] + (pos - static_cast<double>(lo)) * (d[hi] - d[lo]);
}

/// Gaussian weights on pairs closer than the zeta distance quantile. zeta = 1 connects every pair.
inline NeighborGraph build_threshold_laplacian(const Matrix& X, const GaussianGraphParams& params,
                                               double trace_target, double* kappa_out = nullptr) {
  params.validate();
  const Index n = X.cols();
  const double kappa = params.zeta >= 1.0 ? std::numeric_limits<double>::infinity()
                                          : distance_quantile(X, params.zeta);
  if (kappa_out) *kappa_out = kappa;
  const double denom = 2.0 * params.sigma * params.sigma;
  std::vector<Eigen::Triplet<double>> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (X.col(i) - X.col(j)).norm();
      if (d < kappa) edges.emplace_back(i, j, std::exp(-d * d / denom));
    }
  }
  NeighborGraph g;
  g.L = detail::laplacian_from_adjacency(edges, n);
  return detail::normalize_laplacian(std::move(g), trace_target);
}

}  // namespace ssdl

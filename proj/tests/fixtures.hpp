#pragma once

// Random problem instances shared by the unit and acceptance suites.

#include "oracles.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace fixture {

using namespace ssdl;

/// A small random problem that owns everything a CodingContext refers to.
struct Instance {
  Matrix X, D, A;
  NeighborGraph graph;
  Classifier clf;
  ProbabilityMatrix P;
  ActiveMasks masks;
  LabelMatrix labels;
  HyperParams hp;

  Instance(Index n, Index p, Index nl, Index nu, Index C, std::mt19937_64& rng, double beta = 0.4, double gamma = 0.7) {
    const Index N = nl + nu;
    X = oracle::random_matrix(n, N, rng);
    D = project_columns_l2(oracle::random_matrix(n, p, rng), 1.0);
    A = oracle::random_matrix(p, N, rng, 0.5);
    graph = build_lle_graph(X, std::min<Index>(3, N - 1), static_cast<double>(N));
    clf = {oracle::random_matrix(C, p, rng), oracle::random_matrix(C, 1, rng, 0.3)};
    std::vector<int> y;
    for (Index i = 0; i < nl; ++i) y.push_back(static_cast<int>(i % C));
    labels = LabelMatrix::from_labels(y, static_cast<int>(C));
    masks = update_active_masks(clf, A, labels);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    P.P.resize(C, nu);
    for (Index j = 0; j < nu; ++j) {
      for (Index k = 0; k < C; ++k) P.P(k, j) = u(rng);
      P.P.col(j) /= P.P.col(j).sum();
    }
    hp.lambda = 0.2;
    hp.beta = beta;
    hp.gamma = gamma;
    hp.mu = 0.3;
    hp.r = 1.7;
    hp.p = p;
  }

  CodingContext ctx() const { return {X, D, graph, clf, P, masks, labels, hp}; }

  oracle::QuadraticL1 quadratic() const {
    return oracle::coding_quadratic(X, D, &graph, &clf, &masks.labelled, &masks.unlabelled, &P.P, &labels.Y, hp);
  }

  double triple_loop(const Matrix& codes) const {
    return oracle::triple_loop_objective(X, D, codes, Matrix(graph.L), clf, P.P, masks.labelled, masks.unlabelled,
                                         labels.Y, hp);
  }
};

inline Vector random_simplex_point(Index C, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector p(C);
  for (Index k = 0; k < C; ++k) p(k) = e(rng);
  return p / p.sum();
}

inline double simplex_value(const Vector& p, const Vector& e, double r) {
  double s = 0.0;
  for (Index k = 0; k < p.size(); ++k) s += std::pow(p(k), r) * e(k);
  return s;
}

}  // namespace fixture

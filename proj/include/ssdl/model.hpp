#pragma once

// The semi-supervised dictionary learning objective and its block updates:
// active masks, unlabelled-class probabilities, sparse codes, dictionary and
// the one-vs-all linear classifier.
//
// Column layout everywhere: the first N_l columns of X and A are labelled
// samples, the remaining N_u are unlabelled.

#include <ssdl/core.hpp>
#include <ssdl/graph.hpp>
#include <ssdl/solver.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace ssdl {

struct HyperParams {
  double lambda = 0.3;  // l1 weight on the codes
  double beta = 0.5;    // manifold preservation weight
  double gamma = 0.5;   // classification loss weight
  double mu = 1.0;      // classifier ridge
  double alpha = 1.0;   // atom norm bound
  Index p = 200;        // atom count
  Index k = 8;          // neighbour count
  double r = 1.7;       // probability activation exponent

  void validate() const {
    detail::require_config(lambda >= 0.0, "hyper-parameters: lambda must be nonnegative");
    detail::require_config(beta >= 0.0, "hyper-parameters: beta must be nonnegative");
    detail::require_config(gamma >= 0.0, "hyper-parameters: gamma must be nonnegative");
    detail::require_config(mu >= 0.0, "hyper-parameters: mu must be nonnegative");
    detail::require_config(alpha > 0.0, "hyper-parameters: alpha must be positive");
    detail::require_config(p >= 1, "hyper-parameters: p must be at least 1");
    detail::require_config(k >= 1, "hyper-parameters: k must be at least 1");
    detail::require_config(r >= 1.0, "hyper-parameters: r must be at least 1");
  }
};

/// +/-1 one-vs-all targets for the labelled samples (C x N_l).
struct LabelMatrix {
  Matrix Y;

  static LabelMatrix from_labels(const std::vector<int>& labels, int class_count) {
    LabelMatrix out;
    out.Y = Matrix::Constant(class_count, static_cast<Index>(labels.size()), -1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      detail::require(labels[i] >= 0 && labels[i] < class_count, "labels: class index out of range");
      out.Y(labels[i], static_cast<Index>(i)) = 1.0;
    }
    return out;
  }
  Index classes() const { return Y.rows(); }
  Index count() const { return Y.cols(); }
};

struct Classifier {
  Matrix W;  // C x p
  Vector b;  // C

  static Classifier zeros(Index classes, Index atoms) { return {Matrix::Zero(classes, atoms), Vector::Zero(classes)}; }
  Index classes() const { return W.rows(); }
  Matrix scores(const Matrix& A) const { return (W * A).colwise() + b; }
};

/// Column-stochastic C x N_u matrix of unlabelled-class probabilities.
struct ProbabilityMatrix {
  Matrix P;

  static ProbabilityMatrix uniform(Index classes, Index unlabelled) {
    return {Matrix::Constant(classes, unlabelled, 1.0 / static_cast<double>(classes))};
  }
};

/// Binary indicators of samples inside the margin. `unlabelled[k]` treats every
/// unlabelled sample as a member of class k.
struct ActiveMasks {
  Matrix labelled;                 // C x N_l
  std::vector<Matrix> unlabelled;  // C matrices, each C x N_u
};

/// Target of class row c when an unlabelled sample is assumed to belong to class k.
inline double candidate_target(Index c, Index k) { return c == k ? 1.0 : -1.0; }

/// Everything held fixed while the codes move.
struct CodingContext {
  const Matrix& X;
  const Matrix& D;
  const NeighborGraph& graph;
  const Classifier& clf;
  const ProbabilityMatrix& P;
  const ActiveMasks& masks;
  const LabelMatrix& labels;
  const HyperParams& hp;
};

/// Full objective: reconstruction, l1, manifold, masked classification losses and ridge.
inline double objective(const CodingContext& ctx, const Matrix& A) {
  const Index nl = ctx.labels.count();
  const Index nu = A.cols() - nl;
  detail::require(ctx.X.cols() == A.cols() && ctx.D.cols() == A.rows() && ctx.D.rows() == ctx.X.rows(),
                  "objective: shape mismatch between X, D and A");
  double value = (ctx.X - ctx.D * A).squaredNorm() + ctx.hp.lambda * A.cwiseAbs().sum();
  if (ctx.hp.beta != 0.0 && !ctx.graph.degenerate) {
    detail::require(ctx.graph.size() == A.cols(), "objective: graph size differs from sample count");
    value += ctx.hp.beta * (Matrix(A * ctx.graph.L).array() * A.array()).sum();
  }
  if (ctx.hp.gamma != 0.0) {
    const Index C = ctx.clf.classes();
    detail::require(ctx.masks.labelled.rows() == C && ctx.masks.labelled.cols() == nl,
                    "objective: labelled mask shape mismatch");
    const Matrix S = ctx.clf.scores(A);
    double loss = (ctx.masks.labelled.array() * (S.leftCols(nl) - ctx.labels.Y).array()).square().sum();
    if (nu > 0) {
      detail::require(static_cast<Index>(ctx.masks.unlabelled.size()) == C && ctx.P.P.rows() == C &&
                          ctx.P.P.cols() == nu,
                      "objective: unlabelled mask or probability shape mismatch");
      const Matrix Su = S.rightCols(nu);
      for (Index k = 0; k < C; ++k) {
        Matrix Yk = Matrix::Constant(C, nu, -1.0);
        Yk.row(k).setOnes();
        const Eigen::RowVectorXd pk = ctx.P.P.row(k).array().pow(ctx.hp.r / 2.0);
        const Matrix weighted = (ctx.masks.unlabelled[static_cast<std::size_t>(k)].array() * (Su - Yk).array())
                                    .matrix() *
                                pk.asDiagonal();
        loss += weighted.squaredNorm();
      }
    }
    value += ctx.hp.gamma * loss;
  }
  value += ctx.hp.mu * (ctx.clf.W.squaredNorm() + ctx.clf.b.squaredNorm());
  return value;
}

/// Recomputes the active masks from the current classifier and codes; y * score < 1 is active.
inline ActiveMasks update_active_masks(const Classifier& clf, const Matrix& A, const LabelMatrix& labels) {
  const Index nl = labels.count();
  const Index nu = A.cols() - nl;
  const Index C = clf.classes();
  detail::require(nu >= 0 && labels.classes() == C, "update_active_masks: shape mismatch");
  const Matrix S = clf.scores(A);
  ActiveMasks masks;
  masks.labelled = ((labels.Y.array() * S.leftCols(nl).array()) < 1.0).cast<double>();
  masks.unlabelled.resize(static_cast<std::size_t>(C));
  for (Index k = 0; k < C; ++k) {
    Matrix& Q = masks.unlabelled[static_cast<std::size_t>(k)];
    Q.resize(C, nu);
    for (Index j = 0; j < nu; ++j)
      for (Index c = 0; c < C; ++c) Q(c, j) = candidate_target(c, k) * S(c, nl + j) < 1.0 ? 1.0 : 0.0;
  }
  return masks;
}

/// Minimizer of sum_k p_k^r e_k over the probability simplex, for costs e_k >= 0 and r >= 1.
inline Vector simplex_minimizer(const Vector& costs, double r) {
  const Index C = costs.size();
  detail::require(C >= 1 && r >= 1.0, "simplex_minimizer: need at least one class and r >= 1");
  Vector p = Vector::Zero(C);
  const double lowest = costs.minCoeff();
  if (r == 1.0 || lowest <= 0.0) {
    // Linear objective, or classes that absorb mass at no cost: split evenly among the minimizers.
    const auto ties = (costs.array() == lowest).cast<double>();
    return ties.matrix() / ties.sum();
  }
  // Interior KKT point: p_k proportional to e_k^(-1/(r-1)), evaluated in log space.
  const double exponent = 1.0 / (r - 1.0);
  for (Index k = 0; k < C; ++k) p(k) = std::exp(-exponent * (std::log(costs(k)) - std::log(lowest)));
  return p / p.sum();
}

/// Per-column costs e_k(j) = sum_c Q_k[c,j] (y_c(k) s_cj - 1)^2 of assigning unlabelled sample j to class k.
inline Matrix probability_costs(const Classifier& clf, const Matrix& Au, const ActiveMasks& masks) {
  const Index C = clf.classes();
  const Index nu = Au.cols();
  const Matrix S = clf.scores(Au);
  Matrix E = Matrix::Zero(C, nu);
  for (Index k = 0; k < C; ++k) {
    const Matrix& Q = masks.unlabelled[static_cast<std::size_t>(k)];
    detail::require(Q.rows() == C && Q.cols() == nu, "probability_costs: mask shape mismatch");
    for (Index j = 0; j < nu; ++j) {
      double e = 0.0;
      for (Index c = 0; c < C; ++c) {
        const double m = candidate_target(c, k) * S(c, j) - 1.0;
        e += Q(c, j) * m * m;
      }
      E(k, j) = e;
    }
  }
  return E;
}

inline ProbabilityMatrix update_probabilities(const Classifier& clf, const Matrix& Au, const ActiveMasks& masks,
                                             double r) {
  detail::require_config(r >= 1.0, "update_probabilities: r must be at least 1");
  const Matrix E = probability_costs(clf, Au, masks);
  ProbabilityMatrix out{Matrix(E.rows(), E.cols())};
  for (Index j = 0; j < E.cols(); ++j) out.P.col(j) = simplex_minimizer(E.col(j), r);
  return out;
}

/// The masked classification losses of one column collapse to weight * (s - target)^2 + offset per
/// class row. Labelled columns: weight Q_l, target y. Unlabelled: weight sum_k Q_k P_k^r and the
/// weighted mean of the candidate targets.
struct ClassifierWeights {
  Matrix weight;  // C x N
  Matrix target;  // C x N
  Matrix offset;  // C x N, constant remainder of the loss
};

inline ClassifierWeights classifier_weights(const ActiveMasks& masks, const ProbabilityMatrix& P,
                                            const LabelMatrix& labels, double r, Index total) {
  const Index C = labels.classes();
  const Index nl = labels.count();
  const Index nu = total - nl;
  ClassifierWeights w{Matrix::Zero(C, total), Matrix::Zero(C, total), Matrix::Zero(C, total)};
  w.weight.leftCols(nl) = masks.labelled;
  w.target.leftCols(nl) = labels.Y;
  if (nu == 0) return w;
  detail::require(P.P.rows() == C && P.P.cols() == nu && static_cast<Index>(masks.unlabelled.size()) == C,
                  "classifier_weights: probability or mask shape mismatch");
  const Matrix Pr = P.P.array().pow(r);
  for (Index j = 0; j < nu; ++j) {
    for (Index c = 0; c < C; ++c) {
      double omega = 0.0;
      double weighted_target = 0.0;
      for (Index k = 0; k < C; ++k) {
        const double v = masks.unlabelled[static_cast<std::size_t>(k)](c, j) * Pr(k, j);
        omega += v;
        weighted_target += v * candidate_target(c, k);
      }
      const double mean = omega > 0.0 ? weighted_target / omega : 0.0;
      w.weight(c, nl + j) = omega;
      w.target(c, nl + j) = mean;
      w.offset(c, nl + j) = std::max(0.0, omega * (1.0 - mean * mean));
    }
  }
  return w;
}

/// Smooth part of the sparse coding objective restricted to a set of columns, the others held
/// fixed. The full problem is the special case where the set is every column.
class CodingProblem {
 public:
  CodingProblem(const CodingContext& ctx, const ClassifierWeights* weights, const IndexList& cols,
                const Matrix& A_full)
      : D_(ctx.D), clf_(ctx.clf), lambda_(ctx.hp.lambda), beta_(ctx.hp.beta), gamma_(ctx.hp.gamma) {
    const Index N = A_full.cols();
    const auto nb = static_cast<Index>(cols.size());
    X_ = detail::select_columns(ctx.X, cols);
    if (beta_ != 0.0 && !ctx.graph.degenerate) {
      use_graph_ = true;
      if (nb == N) {
        Lbb_ = ctx.graph.L;
      } else {
        std::vector<Index> position(static_cast<std::size_t>(N), -1);
        for (Index m = 0; m < nb; ++m) position[static_cast<std::size_t>(cols[static_cast<std::size_t>(m)])] = m;
        std::vector<Eigen::Triplet<double>> in_batch;
        std::vector<Eigen::Triplet<double>> to_batch;
        for (Index col = 0; col < N; ++col) {
          for (SparseMatrix::InnerIterator it(ctx.graph.L, col); it; ++it) {
            const Index target = position[static_cast<std::size_t>(it.col())];
            if (target < 0) continue;
            const Index source = position[static_cast<std::size_t>(it.row())];
            if (source >= 0) in_batch.emplace_back(source, target, it.value());
            else to_batch.emplace_back(it.row(), target, it.value());
          }
        }
        Lbb_.resize(nb, nb);
        Lbb_.setFromTriplets(in_batch.begin(), in_batch.end());
        SparseMatrix Lcb(N, nb);
        Lcb.setFromTriplets(to_batch.begin(), to_batch.end());
        cross_ = A_full * Lcb;  // rows of Lcb inside the batch are empty
      }
    }
    if (gamma_ != 0.0 && weights != nullptr) {
      use_classifier_ = true;
      weight_ = detail::select_columns(weights->weight, cols);
      target_ = detail::select_columns(weights->target, cols);
      offset_ = detail::select_columns(weights->offset, cols).sum();
    }
  }

  double smooth_value(const Matrix& A) const {
    double v = (X_ - D_ * A).squaredNorm();
    if (use_graph_) {
      double g = (Matrix(A * Lbb_).array() * A.array()).sum();
      if (cross_.size() > 0) g += 2.0 * (A.array() * cross_.array()).sum();
      v += beta_ * g;
    }
    if (use_classifier_) {
      const Matrix s = clf_.scores(A);
      v += gamma_ * ((weight_.array() * (s - target_).array().square()).sum() + offset_);
    }
    return v;
  }

  Matrix smooth_gradient(const Matrix& A) const {
    Matrix g = -2.0 * D_.transpose() * (X_ - D_ * A);
    if (use_graph_) {
      Matrix al = A * Lbb_;
      if (cross_.size() > 0) al += cross_;
      g += 2.0 * beta_ * al;
    }
    if (use_classifier_) {
      const Matrix s = clf_.scores(A);
      g += 2.0 * gamma_ * clf_.W.transpose() * (weight_.array() * (s - target_).array()).matrix();
    }
    return g;
  }

  Matrix prox(const Matrix& H, double step) const { return soft_threshold(H, step * lambda_); }
  double nonsmooth_value(const Matrix& A) const { return lambda_ * A.cwiseAbs().sum(); }

 private:
  Matrix X_;
  const Matrix& D_;
  const Classifier& clf_;
  double lambda_, beta_, gamma_;
  bool use_graph_ = false;
  bool use_classifier_ = false;
  SparseMatrix Lbb_;
  Matrix cross_;
  Matrix weight_, target_;
  double offset_ = 0.0;
};

namespace detail {

inline std::optional<ClassifierWeights> weights_for(const CodingContext& ctx, Index total) {
  if (ctx.hp.gamma == 0.0) return std::nullopt;
  return classifier_weights(ctx.masks, ctx.P, ctx.labels, ctx.hp.r, total);
}

inline IndexList all_columns(Index n) {
  IndexList cols(static_cast<std::size_t>(n));
  std::iota(cols.begin(), cols.end(), Index{0});
  return cols;
}

}  // namespace detail

/// Smooth part f2 of the sparse coding objective (everything but lambda * ||A||_1 and the ridge).
inline double sparse_coding_smooth_value(const CodingContext& ctx, const Matrix& A) {
  const auto w = detail::weights_for(ctx, A.cols());
  return CodingProblem(ctx, w ? &*w : nullptr, detail::all_columns(A.cols()), A).smooth_value(A);
}

inline Matrix sparse_coding_gradient(const CodingContext& ctx, const Matrix& A) {
  const auto w = detail::weights_for(ctx, A.cols());
  return CodingProblem(ctx, w ? &*w : nullptr, detail::all_columns(A.cols()), A).smooth_gradient(A);
}

/// Sparse coding over all columns jointly, masks and probabilities frozen.
inline Matrix sparse_coding(const Matrix& A0, const CodingContext& ctx, const FistaParams& params,
                            FistaResult* trace = nullptr) {
  detail::require(A0.rows() == ctx.D.cols() && A0.cols() == ctx.X.cols(), "sparse_coding: shape mismatch");
  const auto w = detail::weights_for(ctx, A0.cols());
  const CodingProblem problem(ctx, w ? &*w : nullptr, detail::all_columns(A0.cols()), A0);
  FistaResult result = fista(problem, A0, params);
  Matrix out = result.solution;
  if (trace) *trace = std::move(result);
  return out;
}

struct BatchSchedule {
  Index batches = 1;
  int epochs = 1;
  std::uint64_t seed = 0;
};

/// Random partition of 0..n-1 into `batches` groups of near-equal size, each sorted.
inline std::vector<IndexList> random_partition(Index n, Index batches, std::mt19937_64& rng) {
  IndexList order = detail::all_columns(n);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<IndexList> out;
  Index start = 0;
  for (Index b = 0; b < batches; ++b) {
    const Index end = (n * (b + 1)) / batches;
    IndexList part(order.begin() + start, order.begin() + end);
    std::sort(part.begin(), part.end());
    if (!part.empty()) out.push_back(std::move(part));
    start = end;
  }
  return out;
}

/// Block coordinate version of sparse_coding: each epoch draws a fresh random partition and solves
/// for one batch of columns at a time, the rest fixed, writing results back before the next batch.
inline Matrix sparse_coding_batched(const Matrix& A0, const CodingContext& ctx, const FistaParams& params,
                                    const BatchSchedule& schedule) {
  detail::require_config(schedule.batches >= 1 && schedule.epochs >= 1,
                         "sparse_coding_batched: need at least one batch and one epoch");
  detail::require(A0.rows() == ctx.D.cols() && A0.cols() == ctx.X.cols(), "sparse_coding_batched: shape mismatch");
  const auto w = detail::weights_for(ctx, A0.cols());
  std::mt19937_64 rng(schedule.seed);
  Matrix A = A0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    for (const IndexList& cols : random_partition(A.cols(), schedule.batches, rng)) {
      const CodingProblem problem(ctx, w ? &*w : nullptr, cols, A);
      const Matrix start = detail::select_columns(A, cols);
      const Matrix solved = fista(problem, start, params).solution;
      for (std::size_t m = 0; m < cols.size(); ++m) A.col(cols[m]) = solved.col(static_cast<Index>(m));
    }
  }
  return A;
}

/// Projected FISTA on ||X - D A||_F^2 over dictionaries with column norms at most alpha.
inline Matrix dictionary_update(const Matrix& D0, const Matrix& X, const Matrix& A, double alpha,
                                const FistaParams& params, FistaResult* trace = nullptr) {
  detail::require(D0.rows() == X.rows() && D0.cols() == A.rows() && X.cols() == A.cols(),
                  "dictionary_update: shape mismatch");
  const Matrix AAt = A * A.transpose();
  const Matrix XAt = X * A.transpose();
  FunctionalProblem problem{
      [&](const Matrix& D) { return (X - D * A).squaredNorm(); },
      [&](const Matrix& D) { return Matrix(2.0 * (D * AAt - XAt)); },
      [alpha](const Matrix& D, double) { return project_columns_l2(D, alpha); },
      {}};
  FistaResult result = fista(problem, project_columns_l2(D0, alpha), params);
  Matrix out = result.solution;
  if (trace) *trace = std::move(result);
  return out;
}

namespace detail {

/// Solves (G + ridge I) x = rhs; least-norm solution when ridge is zero.
inline Matrix ridge_solve(const Matrix& G, double ridge, const Matrix& rhs) {
  if (ridge > 0.0) {
    Matrix reg = G;
    reg.diagonal().array() += ridge;
    return reg.ldlt().solve(rhs);
  }
  return G.completeOrthogonalDecomposition().solve(rhs);
}

inline Matrix augment_with_ones(const Matrix& A) {
  Matrix aug(A.rows() + 1, A.cols());
  aug.topRows(A.rows()) = A;
  aug.row(A.rows()).setOnes();
  return aug;
}

}  // namespace detail

/// Exact minimizer of the masked, probability-weighted least squares loss plus ridge, one
/// (p+1)-dimensional weighted ridge system per class row.
inline Classifier classifier_update(const Matrix& A, const LabelMatrix& labels, const ProbabilityMatrix& P,
                                    const ActiveMasks& masks, double gamma, double mu, double r) {
  const Index C = labels.classes();
  const Index p = A.rows();
  if (gamma == 0.0) return Classifier::zeros(C, p);
  const ClassifierWeights w = classifier_weights(masks, P, labels, r, A.cols());
  const Matrix aug = detail::augment_with_ones(A);
  Classifier clf = Classifier::zeros(C, p);
  for (Index c = 0; c < C; ++c) {
    const Vector wc = w.weight.row(c).transpose();
    const Matrix weighted = aug * wc.asDiagonal();
    const Matrix G = gamma * weighted * aug.transpose();
    const Vector rhs = gamma * weighted * w.target.row(c).transpose();
    const Vector sol = detail::ridge_solve(G, mu, rhs);
    clf.W.row(c) = sol.head(p).transpose();
    clf.b(c) = sol(p);
  }
  return clf;
}

/// Closed-form ridge classifier on labelled codes: W' = Y A*^T (A* A*^T + (mu/gamma) I)^-1
/// with A* the codes augmented by a row of ones.
inline Classifier classifier_init(const Matrix& Al, const LabelMatrix& labels, double gamma, double mu) {
  detail::require_config(gamma > 0.0, "classifier_init: gamma must be positive");
  detail::require(Al.cols() == labels.count(), "classifier_init: code and label counts differ");
  const Index p = Al.rows();
  const Matrix aug = detail::augment_with_ones(Al);
  const Matrix Wt = detail::ridge_solve(aug * aug.transpose(), mu / gamma, aug * labels.Y.transpose());
  Classifier clf;
  clf.W = Wt.topRows(p).transpose();
  clf.b = Wt.row(p).transpose();
  return clf;
}

/// 2 (||D^T D|| + beta ||L|| + gamma C ||W||^2): a bound on the Lipschitz constant of the sparse
/// coding gradient. Diagnostic only; the solver finds its own step by backtracking.
inline double lipschitz_estimate(const Matrix& D, const NeighborGraph& graph, const Matrix& W, double beta,
                                 double gamma, Index classes) {
  const double dtd = power_iteration([&](const Vector& v) { return Vector(D.transpose() * (D * v)); }, D.cols());
  double lap = 0.0;
  if (beta != 0.0 && graph.size() > 0) lap = power_iteration([&](const Vector& v) { return Vector(graph.L * v); }, graph.size());
  double w2 = 0.0;
  if (gamma != 0.0 && W.size() > 0)
    w2 = power_iteration([&](const Vector& v) { return Vector(W.transpose() * (W * v)); }, W.cols());
  return 2.0 * (dtd + beta * lap + gamma * static_cast<double>(classes) * w2);
}

/// Objective of the reduced, classifier-free problem on labelled data only:
/// ||X - D A||^2 + beta tr(A L A^T) + lambda ||A||_1.
inline double reduced_objective(const Matrix& X, const Matrix& D, const Matrix& A, const NeighborGraph& graph,
                                double lambda, double beta) {
  double v = (X - D * A).squaredNorm() + lambda * A.cwiseAbs().sum();
  if (beta != 0.0 && !graph.degenerate) v += beta * (Matrix(A * graph.L).array() * A.array()).sum();
  return v;
}

}  // namespace ssdl

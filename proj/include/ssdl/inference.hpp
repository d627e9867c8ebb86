#pragma once

// Out-of-sample coding and class prediction.
//
// A new sample x is coded by
//   min_a ||x - D a||^2 + rho ||a - m||^2 + lambda ||a||_1
// where the anchor m is a combination of training codes. With LLE weights over
// the k nearest training samples and rho = beta * omega this keeps the new code
// consistent with the local geometry learnt during training.

#include <ssdl/core.hpp>
#include <ssdl/graph.hpp>
#include <ssdl/model.hpp>
#include <ssdl/solver.hpp>
#include <ssdl/trainer.hpp>

namespace ssdl {

struct EncodedSample {
  Vector code;
  IndexList neighbor_ids;
  Vector weights;  // barycentric, sums to one
};

/// Quadratic anchor term rho * ||a - m||^2; rho = 0 disables it.
struct CodeAnchor {
  Vector center;
  double weight = 0.0;
};

/// Single-column lasso with an optional anchor, using the precomputed Gram matrix D^T D.
class AnchoredLasso {
 public:
  AnchoredLasso(const Matrix& gram, const Vector& dtx, double xx, double lambda, const CodeAnchor& anchor)
      : gram_(gram), dtx_(dtx), xx_(xx), lambda_(lambda), anchor_(anchor) {}

  double smooth_value(const Matrix& a) const {
    const auto v = a.col(0);
    double f = xx_ - 2.0 * v.dot(dtx_) + v.dot(gram_ * v);
    if (anchor_.weight != 0.0) f += anchor_.weight * (v - anchor_.center).squaredNorm();
    return f;
  }
  Matrix smooth_gradient(const Matrix& a) const {
    Matrix g = 2.0 * (gram_ * a - dtx_);
    if (anchor_.weight != 0.0) g += 2.0 * anchor_.weight * (a - anchor_.center);
    return g;
  }
  Matrix prox(const Matrix& h, double step) const { return soft_threshold(h, step * lambda_); }
  double nonsmooth_value(const Matrix& a) const { return lambda_ * a.cwiseAbs().sum(); }

 private:
  const Matrix& gram_;
  const Vector& dtx_;
  double xx_;
  double lambda_;
  const CodeAnchor& anchor_;
};

inline Vector encode_anchored(const Eigen::Ref<const Vector>& x, const Matrix& D, const Matrix& gram, double lambda,
                              const CodeAnchor& anchor, const FistaParams& params) {
  const Vector dtx = D.transpose() * x;
  const AnchoredLasso problem(gram, dtx, x.squaredNorm(), lambda, anchor);
  return fista(problem, Matrix::Zero(D.cols(), 1), params).solution.col(0);
}

/// Codes one new sample against a trained model: knn among the training samples, barycentric
/// weights, anchor at the weighted neighbour codes, anchor weight beta * omega.
inline EncodedSample encode(const Eigen::Ref<const Vector>& x, const Matrix& D, const Matrix& A_train,
                            const Matrix& X_train, const HyperParams& hp, double omega, const FistaParams& params,
                            const Matrix* gram = nullptr) {
  detail::require(x.size() == X_train.rows() && D.rows() == x.size() && A_train.cols() == X_train.cols(),
                  "encode: shape mismatch between sample, dictionary and training set");
  EncodedSample out;
  out.neighbor_ids = knn_query(X_train, x, hp.k);
  const Matrix neighbours = detail::select_columns(X_train, out.neighbor_ids);
  out.weights = barycentric_weights(x, neighbours);
  CodeAnchor anchor;
  anchor.weight = hp.beta * omega;
  anchor.center = detail::select_columns(A_train, out.neighbor_ids) * out.weights;
  const Matrix local_gram = gram ? Matrix() : Matrix(D.transpose() * D);
  out.code = encode_anchored(x, D, gram ? *gram : local_gram, hp.lambda, anchor, params);
  return out;
}

inline EncodedSample encode(const ModelState& model, const Eigen::Ref<const Vector>& x, const FistaParams& params) {
  return encode(x, model.D, model.A, model.X, model.hp, model.graph.omega, params);
}

/// Index of the largest entry; ties resolve to the lowest index.
inline int argmax(const Eigen::Ref<const Vector>& scores) {
  Index best = 0;
  for (Index c = 1; c < scores.size(); ++c)
    if (scores(c) > scores(best)) best = c;
  return static_cast<int>(best);
}

inline int predict(const Classifier& clf, const Eigen::Ref<const Vector>& code) {
  return argmax(clf.W * code + clf.b);
}

struct Predictions {
  std::vector<int> labels;
  Matrix scores;  // C x q
  Matrix codes;   // p x q
};

/// encode + predict for every column of X_new, in column order.
inline Predictions predict_batch(const Classifier& clf, const Matrix& D, const Matrix& A_train, const Matrix& X_train,
                                 const Matrix& X_new, const HyperParams& hp, double omega, const FistaParams& params) {
  Predictions out;
  const Matrix gram = D.transpose() * D;
  out.codes.resize(D.cols(), X_new.cols());
  for (Index j = 0; j < X_new.cols(); ++j)
    out.codes.col(j) = encode(X_new.col(j), D, A_train, X_train, hp, omega, params, &gram).code;
  out.scores = clf.scores(out.codes);
  out.labels.resize(static_cast<std::size_t>(X_new.cols()));
  for (Index j = 0; j < X_new.cols(); ++j) out.labels[static_cast<std::size_t>(j)] = argmax(out.scores.col(j));
  return out;
}

inline Predictions predict_batch(const ModelState& model, const Matrix& X_new, const FistaParams& params) {
  return predict_batch(model.clf, model.D, model.A, model.X, X_new, model.hp, model.graph.omega, params);
}

}  // namespace ssdl

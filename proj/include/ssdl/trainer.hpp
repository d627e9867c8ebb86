#pragma once

// Initialization and the alternating minimization loop.

#include <ssdl/core.hpp>
#include <ssdl/graph.hpp>
#include <ssdl/model.hpp>
#include <ssdl/solver.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace ssdl {

struct TrainConfig {
  HyperParams hp;
  int outer_max_iters = 30;
  double outer_rel_tol = 1e-4;
  FistaParams fista;
  std::optional<BatchSchedule> batching;  // seed field is ignored; derived from `seed`
  std::uint64_t seed = 0;
  int denoise_warmup = 0;  // > 0: run this many iterations with beta = 0, then rebuild the graph from D A

  void validate() const {
    hp.validate();
    fista.validate();
    detail::require_config(outer_max_iters >= 1, "train: outer_max_iters must be at least 1");
    detail::require_config(outer_rel_tol >= 0.0, "train: outer_rel_tol must be nonnegative");
    detail::require_config(denoise_warmup >= 0, "train: denoise_warmup must be nonnegative");
    if (batching) {
      detail::require_config(batching->batches >= 1 && batching->epochs >= 1,
                             "train: batching needs at least one batch and one epoch");
    }
  }
};

/// Objective values around the three descent steps of one outer iteration, masks and P frozen.
struct IterationTrace {
  double after_assignment = 0.0;  // after the mask and probability updates
  double after_coding = 0.0;
  double after_dictionary = 0.0;
  double after_classifier = 0.0;
};

struct ModelState {
  Matrix X;  // training samples, labelled columns first
  std::vector<int> labels;
  int class_count = 0;
  HyperParams hp;
  Matrix D;
  Matrix A;
  Classifier clf;
  ProbabilityMatrix P;
  ActiveMasks masks;
  NeighborGraph graph;
  std::vector<double> history;  // objective after each outer iteration
  std::vector<IterationTrace> trace;

  Index labelled_count() const { return static_cast<Index>(labels.size()); }
  Index unlabelled_count() const { return A.cols() - labelled_count(); }
  LabelMatrix label_matrix() const { return LabelMatrix::from_labels(labels, class_count); }
  CodingContext context(const LabelMatrix& Y) const { return {X, D, graph, clf, P, masks, Y, hp}; }
  double current_objective() const {
    const LabelMatrix Y = label_matrix();
    return objective(context(Y), A);
  }
};

/// Raised when training hits a non-finite objective; carries the history up to the failure.
class TrainingFailure : public NumericalFailure {
 public:
  TrainingFailure(const std::string& what, int iteration, std::vector<double> history)
      : NumericalFailure(what, iteration), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Picks initial atoms: every labelled sample plus random unlabelled ones when p > N_l, otherwise
/// one random labelled sample per class in turn. Atoms are then projected into the alpha ball.
inline Matrix init_dictionary(const Matrix& X, const std::vector<int>& labels, int class_count, Index p,
                              double alpha, std::uint64_t seed) {
  const Index N = X.cols();
  const auto nl = static_cast<Index>(labels.size());
  detail::require_config(p >= 1, "init_dictionary: p must be at least 1");
  if (p > N) {
    throw InvalidConfiguration("init_dictionary: p=" + std::to_string(p) + " exceeds the sample count " +
                               std::to_string(N));
  }
  std::mt19937_64 rng(seed);
  IndexList chosen;
  chosen.reserve(static_cast<std::size_t>(p));
  if (p > nl) {
    for (Index i = 0; i < nl; ++i) chosen.push_back(i);
    IndexList pool;
    for (Index j = nl; j < N; ++j) pool.push_back(j);
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + (p - nl));
  } else {
    std::vector<IndexList> by_class(static_cast<std::size_t>(class_count));
    for (Index i = 0; i < nl; ++i) by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
    for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);
    std::vector<std::size_t> next(by_class.size(), 0);
    // Exhausted classes are skipped; the cycle continues over the remaining ones.
    while (static_cast<Index>(chosen.size()) < p) {
      for (std::size_t c = 0; c < by_class.size() && static_cast<Index>(chosen.size()) < p; ++c) {
        if (next[c] < by_class[c].size()) chosen.push_back(by_class[c][next[c]++]);
      }
    }
  }
  return project_columns_l2(detail::select_columns(X, chosen), alpha);
}

/// Lasso codes for every column under a fixed dictionary.
inline Matrix init_codes(const Matrix& X, const Matrix& D, double lambda, const FistaParams& params) {
  HyperParams hp;
  hp.lambda = lambda;
  hp.beta = 0.0;
  hp.gamma = 0.0;
  const NeighborGraph none;
  const Classifier clf;
  const ProbabilityMatrix P;
  const ActiveMasks masks;
  const LabelMatrix labels;
  const CodingContext ctx{X, D, none, clf, P, masks, labels, hp};
  return sparse_coding(Matrix::Zero(D.cols(), X.cols()), ctx, params);
}

namespace detail {

inline void validate_training_data(const Matrix& X, const std::vector<int>& labels, int class_count) {
  require_config(class_count >= 1, "train: need at least one class");
  require_config(static_cast<Index>(labels.size()) <= X.cols(), "train: more labels than samples");
  std::vector<int> seen(static_cast<std::size_t>(class_count), 0);
  for (int y : labels) {
    require_config(y >= 0 && y < class_count, "train: label outside [0, C)");
    ++seen[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < class_count; ++c) {
    if (seen[static_cast<std::size_t>(c)] == 0)
      throw InvalidConfiguration("train: class " + std::to_string(c) + " has no labelled sample");
  }
  require_config(X.allFinite(), "train: samples contain non-finite values");
}

}  // namespace detail

/// Alternating minimization: masks, probabilities, codes, dictionary, classifier.
/// X holds the labelled samples (with `labels`) in its first columns.
inline ModelState train(const Matrix& X, const std::vector<int>& labels, int class_count, const TrainConfig& config) {
  config.validate();
  detail::validate_training_data(X, labels, class_count);

  ModelState s;
  s.X = X;
  s.labels = labels;
  s.class_count = class_count;
  s.hp = config.hp;
  const Index N = X.cols();
  const Index nl = s.labelled_count();
  const Index nu = N - nl;
  const LabelMatrix Y = s.label_matrix();

  s.graph = build_lle_graph(X, config.hp.k, static_cast<double>(N));
  s.D = init_dictionary(X, labels, class_count, config.hp.p, config.hp.alpha, detail::mix_seed(config.seed, 0));
  s.A = init_codes(X, s.D, config.hp.lambda, config.fista);
  s.clf = config.hp.gamma > 0.0 ? classifier_init(s.A.leftCols(nl), Y, config.hp.gamma, config.hp.mu)
                                : Classifier::zeros(class_count, config.hp.p);
  s.P = ProbabilityMatrix::uniform(class_count, nu);
  s.masks = update_active_masks(s.clf, s.A, Y);

  HyperParams active_hp = config.hp;
  if (config.denoise_warmup > 0) active_hp.beta = 0.0;

  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < config.outer_max_iters; ++it) {
    if (config.denoise_warmup > 0 && it == config.denoise_warmup) {
      s.graph = build_lle_graph(s.D * s.A, config.hp.k, static_cast<double>(N));
      active_hp.beta = config.hp.beta;
    }
    const CodingContext ctx{s.X, s.D, s.graph, s.clf, s.P, s.masks, Y, active_hp};
    IterationTrace tr;

    s.masks = update_active_masks(s.clf, s.A, Y);
    if (nu > 0) s.P = update_probabilities(s.clf, s.A.rightCols(nu), s.masks, config.hp.r);
    tr.after_assignment = objective(ctx, s.A);

    if (config.batching && config.batching->batches > 1) {
      BatchSchedule schedule = *config.batching;
      schedule.seed = detail::mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(it));
      s.A = sparse_coding_batched(s.A, ctx, config.fista, schedule);
    } else {
      const int epochs = config.batching ? config.batching->epochs : 1;
      for (int e = 0; e < epochs; ++e) s.A = sparse_coding(s.A, ctx, config.fista);
    }
    tr.after_coding = objective(ctx, s.A);

    s.D = dictionary_update(s.D, s.X, s.A, config.hp.alpha, config.fista);
    tr.after_dictionary = objective(ctx, s.A);

    if (config.hp.gamma > 0.0) s.clf = classifier_update(s.A, Y, s.P, s.masks, config.hp.gamma, config.hp.mu, config.hp.r);
    tr.after_classifier = objective(ctx, s.A);

    s.trace.push_back(tr);
    s.history.push_back(tr.after_classifier);
    if (!std::isfinite(tr.after_classifier)) {
      throw TrainingFailure("train: non-finite objective", it, s.history);
    }
    if (it > 0 && std::abs(previous - tr.after_classifier) <= config.outer_rel_tol * std::abs(previous)) break;
    previous = tr.after_classifier;
  }
  s.masks = update_active_masks(s.clf, s.A, Y);
  return s;
}

/// Class scores W A + b of the training codes; used for transductive accuracy on unlabelled samples.
inline std::vector<int> transductive_predictions(const ModelState& s) {
  const Matrix S = s.clf.scores(s.A.rightCols(s.unlabelled_count()));
  std::vector<int> out(static_cast<std::size_t>(S.cols()));
  for (Index j = 0; j < S.cols(); ++j) {
    Index best = 0;  // ties resolve to the lowest class index
    for (Index c = 1; c < S.rows(); ++c)
      if (S(c, j) > S(best, j)) best = c;
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace ssdl

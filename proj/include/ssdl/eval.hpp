#pragma once

// Metrics, a cross-validated ridge classifier and the experiment harnesses:
// the Laplacian comparison (with an optional noise sweep), the unlabelled-count
// sweep and the benchmark split.

#include <ssdl/core.hpp>
#include <ssdl/data.hpp>
#include <ssdl/graph.hpp>
#include <ssdl/inference.hpp>
#include <ssdl/model.hpp>
#include <ssdl/trainer.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>

namespace ssdl {

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  detail::require(predicted.size() == truth.size(), "accuracy: prediction and truth lengths differ");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Runs task(i) for i in [0, count) on at most `jobs` threads. The first exception is rethrown
/// after every worker has stopped.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(failure_lock);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Ridge classifier

struct RidgeClassifier {
  Classifier clf;
  double ratio = 1.0;  // mu / gamma selected by cross-validation
  double cv_accuracy = 0.0;

  std::vector<int> predict(const Matrix& A) const {
    const Matrix S = clf.scores(A);
    std::vector<int> out(static_cast<std::size_t>(S.cols()));
    for (Index j = 0; j < S.cols(); ++j) out[static_cast<std::size_t>(j)] = argmax(S.col(j));
    return out;
  }
};

inline RidgeClassifier ridge_classifier_fit(const Matrix& A, const std::vector<int>& labels, int class_count,
                                            double ratio) {
  RidgeClassifier r;
  r.ratio = ratio;
  r.clf = classifier_init(A, LabelMatrix::from_labels(labels, class_count), 1.0, ratio);
  return r;
}

/// Picks mu/gamma from `ratios` by k-fold cross-validated accuracy (fold of sample i is i mod
/// folds; ties keep the earlier ratio), then refits on every sample.
inline RidgeClassifier ridge_classifier_fit_cv(const Matrix& A, const std::vector<int>& labels, int class_count,
                                               const std::vector<double>& ratios = {0.1, 1.0, 10.0},
                                               int folds = 5) {
  detail::require_config(!ratios.empty(), "ridge classifier: empty ratio grid");
  const auto n = static_cast<Index>(labels.size());
  const Index f = std::min<Index>(folds, n);
  double best_ratio = ratios.front();
  double best_acc = -1.0;
  if (f >= 2) {
    for (double ratio : ratios) {
      std::size_t hits = 0;
      for (Index fold = 0; fold < f; ++fold) {
        IndexList train_ids, held_ids;
        for (Index i = 0; i < n; ++i) (i % f == fold ? held_ids : train_ids).push_back(i);
        std::vector<int> train_y;
        for (Index i : train_ids) train_y.push_back(labels[static_cast<std::size_t>(i)]);
        const auto model = ridge_classifier_fit(detail::select_columns(A, train_ids), train_y, class_count, ratio);
        const auto pred = model.predict(detail::select_columns(A, held_ids));
        for (std::size_t m = 0; m < held_ids.size(); ++m)
          hits += pred[m] == labels[static_cast<std::size_t>(held_ids[m])] ? 1 : 0;
      }
      const double acc = static_cast<double>(hits) / static_cast<double>(n);
      if (acc > best_acc) {
        best_acc = acc;
        best_ratio = ratio;
      }
    }
  }
  RidgeClassifier out = ridge_classifier_fit(A, labels, class_count, best_ratio);
  out.cv_accuracy = std::max(best_acc, 0.0);
  return out;
}

inline std::vector<int> ridge_classifier_predict(const RidgeClassifier& model, const Matrix& A) {
  return model.predict(A);
}

// ---------------------------------------------------------------------------
// Reports

struct RunRecord {
  std::string variant;
  double noise = 0.0;
  Index count = 0;           // unlabelled samples per class, where relevant
  std::string subset;        // "test" or "unlabelled"
  std::string cell;          // grid cell, "key=value;..." form
  int repetition = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double error = 0.0;
  Index history_length = 0;
  double wall_seconds = 0.0;  // zero unless timing is enabled

  bool operator==(const RunRecord&) const = default;
};

struct AggregateRow {
  std::string variant;
  double noise = 0.0;
  Index count = 0;
  std::string subset;
  Index runs = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, zero for a single run
  double best_error = 0.0;
  std::string best_cell;

  bool operator==(const AggregateRow&) const = default;
};

struct ExperimentReport {
  std::string experiment;
  std::string config;  // JSON text of the configuration that produced the report
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregates;

  const AggregateRow* find(const std::string& variant, double noise, Index count, const std::string& subset) const {
    for (const auto& a : aggregates)
      if (a.variant == variant && a.noise == noise && a.count == count && a.subset == subset) return &a;
    return nullptr;
  }
};

inline RunRecord make_record(std::string variant, double noise, Index count, std::string subset, std::string cell,
                             int repetition, std::uint64_t seed, double acc, Index history, double seconds) {
  RunRecord r;
  r.variant = std::move(variant);
  r.noise = noise;
  r.count = count;
  r.subset = std::move(subset);
  r.cell = std::move(cell);
  r.repetition = repetition;
  r.seed = seed;
  r.accuracy = acc;
  r.error = 1.0 - acc;
  r.history_length = history;
  r.wall_seconds = seconds;
  return r;
}

/// Groups runs by (variant, noise, count, subset) in order of first appearance.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs) {
  using Key = std::tuple<std::string, double, Index, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) {
    Key key{r.variant, r.noise, r.count, r.subset};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order) {
    const auto& members = groups[key];
    AggregateRow a;
    std::tie(a.variant, a.noise, a.count, a.subset) = key;
    a.runs = static_cast<Index>(members.size());
    double sum = 0.0;
    for (const auto* r : members) sum += r->accuracy;
    a.mean_accuracy = sum / static_cast<double>(members.size());
    if (members.size() > 1) {
      double ss = 0.0;
      for (const auto* r : members) ss += (r->accuracy - a.mean_accuracy) * (r->accuracy - a.mean_accuracy);
      a.std_accuracy = std::sqrt(ss / static_cast<double>(members.size() - 1));
    }
    a.best_error = members.front()->error;
    a.best_cell = members.front()->cell;
    for (const auto* r : members) {
      if (r->error < a.best_error) {
        a.best_error = r->error;
        a.best_cell = r->cell;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Classifier-free dictionary learning on labelled data with a graph regularizer

struct ReducedConfig {
  double lambda = 0.5;
  double beta = 0.0;
  Index p = 128;
  double alpha = 1.0;
  int outer_max_iters = 10;
  double outer_rel_tol = 1e-4;
  FistaParams fista;
};

struct ReducedModel {
  Matrix D;
  Matrix A;
  std::vector<double> history;
};

/// Alternates sparse coding (no classifier term) and dictionary updates on X with a fixed graph.
inline ReducedModel train_reduced(const Matrix& X, const std::vector<int>& labels, int class_count,
                                  const NeighborGraph& graph, const ReducedConfig& cfg, std::uint64_t seed) {
  HyperParams hp;
  hp.lambda = cfg.lambda;
  hp.beta = cfg.beta;
  hp.gamma = 0.0;
  hp.mu = 0.0;
  hp.alpha = cfg.alpha;
  hp.p = cfg.p;
  hp.validate();
  ReducedModel m;
  m.D = init_dictionary(X, labels, class_count, cfg.p, cfg.alpha, seed);
  m.A = init_codes(X, m.D, cfg.lambda, cfg.fista);
  const Classifier clf;
  const ProbabilityMatrix P;
  const ActiveMasks masks;
  const LabelMatrix Y;
  double previous = reduced_objective(X, m.D, m.A, graph, cfg.lambda, cfg.beta);
  for (int it = 0; it < cfg.outer_max_iters; ++it) {
    const CodingContext ctx{X, m.D, graph, clf, P, masks, Y, hp};
    m.A = sparse_coding(m.A, ctx, cfg.fista);
    m.D = dictionary_update(m.D, X, m.A, cfg.alpha, cfg.fista);
    const double value = reduced_objective(X, m.D, m.A, graph, cfg.lambda, cfg.beta);
    m.history.push_back(value);
    if (!std::isfinite(value)) throw TrainingFailure("train_reduced: non-finite objective", it, m.history);
    if (std::abs(previous - value) <= cfg.outer_rel_tol * std::abs(previous)) break;
    previous = value;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Laplacian comparison

enum class LaplacianVariant { None, GaussianKnn, Threshold, Lle };

inline std::string to_string(LaplacianVariant v) {
  switch (v) {
    case LaplacianVariant::None: return "none";
    case LaplacianVariant::GaussianKnn: return "gaussian-knn";
    case LaplacianVariant::Threshold: return "threshold";
    case LaplacianVariant::Lle: return "lle";
  }
  return "none";
}

inline LaplacianVariant parse_variant(const std::string& name) {
  for (auto v : {LaplacianVariant::None, LaplacianVariant::GaussianKnn, LaplacianVariant::Threshold,
                 LaplacianVariant::Lle})
    if (to_string(v) == name) return v;
  throw InvalidConfiguration("unknown Laplacian variant '" + name + "' (expected none, gaussian-knn, threshold or lle)");
}

struct LaplacianGrid {
  std::vector<double> beta = {0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<Index> k = {2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> sigma = {0.1, 1.0, 10.0, 15.0, 30.0, 1000.0};
  std::vector<double> zeta = {0.03, 0.05, 0.1, 0.15, 0.3, 0.5, 0.7};
};

struct GridCell {
  LaplacianVariant variant = LaplacianVariant::None;
  double beta = 0.0;
  Index k = 0;
  double sigma = 0.0;
  double zeta = 0.0;

  std::string label() const {
    char buf[160];
    switch (variant) {
      case LaplacianVariant::None: return "beta=0";
      case LaplacianVariant::GaussianKnn:
        std::snprintf(buf, sizeof buf, "beta=%.17g;k=%lld;sigma=%.17g", beta, static_cast<long long>(k), sigma);
        return buf;
      case LaplacianVariant::Threshold:
        std::snprintf(buf, sizeof buf, "beta=%.17g;sigma=%.17g;zeta=%.17g", beta, sigma, zeta);
        return buf;
      case LaplacianVariant::Lle:
        std::snprintf(buf, sizeof buf, "beta=%.17g;k=%lld", beta, static_cast<long long>(k));
        return buf;
    }
    return {};
  }
};

inline std::vector<GridCell> grid_cells(LaplacianVariant v, const LaplacianGrid& g) {
  std::vector<GridCell> out;
  switch (v) {
    case LaplacianVariant::None: out.push_back({v}); break;
    case LaplacianVariant::GaussianKnn:
      for (double b : g.beta)
        for (Index k : g.k)
          for (double s : g.sigma) out.push_back({v, b, k, s, 0.0});
      break;
    case LaplacianVariant::Threshold:
      for (double b : g.beta)
        for (double s : g.sigma)
          for (double z : g.zeta) out.push_back({v, b, 0, s, z});
      break;
    case LaplacianVariant::Lle:
      for (double b : g.beta)
        for (Index k : g.k) out.push_back({v, b, k, 0.0, 0.0});
      break;
  }
  return out;
}

struct CellGraph {
  NeighborGraph graph;
  double kappa = 0.0;  // threshold variant only
};

inline CellGraph build_cell_graph(const Matrix& X, const GridCell& cell) {
  CellGraph out;
  const double target = static_cast<double>(X.cols());
  GaussianGraphParams gp;
  gp.sigma = cell.sigma > 0.0 ? cell.sigma : 1.0;
  gp.k = cell.k > 0 ? cell.k : 1;
  gp.zeta = cell.zeta > 0.0 ? cell.zeta : 0.5;
  switch (cell.variant) {
    case LaplacianVariant::None: break;
    case LaplacianVariant::GaussianKnn: out.graph = build_gaussian_knn_laplacian(X, gp, target); break;
    case LaplacianVariant::Threshold: out.graph = build_threshold_laplacian(X, gp, target, &out.kappa); break;
    case LaplacianVariant::Lle: out.graph = build_lle_graph(X, cell.k, target); break;
  }
  return out;
}

/// Anchor of the test-time coding rule of each variant. Gaussian variants use
/// beta * omega * sum_j w_j / 2 * ||a - a_j||^2 over the training samples with nonzero weight,
/// which equals rho ||a - m||^2 up to a constant with rho = beta omega sum_j w_j / 2 and m the
/// w-weighted mean of the codes.
inline CodeAnchor variant_anchor(const Eigen::Ref<const Vector>& x, const GridCell& cell, const CellGraph& cg,
                                 const Matrix& X_train, const Matrix& A_train) {
  CodeAnchor anchor;
  anchor.center = Vector::Zero(A_train.rows());
  if (cell.variant == LaplacianVariant::None || cell.beta == 0.0 || cg.graph.degenerate) return anchor;
  const double scale = cell.beta * cg.graph.omega;
  if (cell.variant == LaplacianVariant::Lle) {
    const IndexList ids = knn_query(X_train, x, cell.k);
    const Vector w = barycentric_weights(x, detail::select_columns(X_train, ids));
    anchor.center = detail::select_columns(A_train, ids) * w;
    anchor.weight = scale;
    return anchor;
  }
  IndexList ids;
  if (cell.variant == LaplacianVariant::GaussianKnn) {
    ids = knn_query(X_train, x, cell.k);
  } else {
    for (Index j = 0; j < X_train.cols(); ++j)
      if ((X_train.col(j) - x).norm() < cg.kappa) ids.push_back(j);
  }
  double total = 0.0;
  for (Index j : ids) {
    const double w = std::exp(-(X_train.col(j) - x).squaredNorm() / (2.0 * cell.sigma * cell.sigma));
    anchor.center += w * A_train.col(j);
    total += w;
  }
  if (total > 0.0) {
    anchor.center /= total;
    anchor.weight = 0.5 * scale * total;
  }
  return anchor;
}

struct LaplacianComparisonConfig {
  std::vector<LaplacianVariant> variants = {LaplacianVariant::None, LaplacianVariant::GaussianKnn,
                                            LaplacianVariant::Threshold, LaplacianVariant::Lle};
  LaplacianGrid grid;
  std::vector<double> noise_levels = {0.0};
  ReducedConfig reduced;  // beta is taken from the grid cell
  int initializations = 3;
  std::vector<double> ridge_ratios = {0.1, 1.0, 10.0};
  int cv_folds = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool timing = false;
};

/// Test accuracy of one grid cell and one initialization.
struct CellOutcome {
  double accuracy = 0.0;
  Index history_length = 0;
};

inline CellOutcome evaluate_cell(const Matrix& X_l, const std::vector<int>& y_l, const Matrix& X_test,
                                 const std::vector<int>& y_test, int class_count, const GridCell& cell,
                                 const LaplacianComparisonConfig& cfg, std::uint64_t init_seed) {
  const CellGraph cg = build_cell_graph(X_l, cell);
  ReducedConfig rc = cfg.reduced;
  rc.beta = cell.variant == LaplacianVariant::None ? 0.0 : cell.beta;
  const ReducedModel model = train_reduced(X_l, y_l, class_count, cg.graph, rc, init_seed);
  const RidgeClassifier ridge = ridge_classifier_fit_cv(model.A, y_l, class_count, cfg.ridge_ratios, cfg.cv_folds);
  const Matrix gram = model.D.transpose() * model.D;
  std::vector<int> pred(static_cast<std::size_t>(X_test.cols()));
  for (Index j = 0; j < X_test.cols(); ++j) {
    const CodeAnchor anchor = variant_anchor(X_test.col(j), cell, cg, X_l, model.A);
    const Vector code = encode_anchored(X_test.col(j), model.D, gram, rc.lambda, anchor, rc.fista);
    pred[static_cast<std::size_t>(j)] = predict(ridge.clf, code);
  }
  return {accuracy(pred, y_test), static_cast<Index>(model.history.size())};
}

/// For every noise level, variant and grid cell: learn a dictionary from the labelled samples
/// with the variant's graph, fit the ridge classifier on the codes, code the test samples with
/// the variant's rule and record the test accuracy. Each cell runs `initializations` times with
/// different dictionary seeds; the aggregate keeps the best error. Noise is added to both the
/// labelled and the test samples.
inline ExperimentReport run_laplacian_comparison(const Matrix& X_l, const std::vector<int>& y_l, const Matrix& X_test,
                                                 const std::vector<int>& y_test, int class_count,
                                                 const LaplacianComparisonConfig& cfg,
                                                 const std::string& config_echo = "{}") {
  detail::require_config(cfg.initializations >= 1, "laplacian comparison: need at least one initialization");
  struct Job {
    std::size_t noise_index;
    GridCell cell;
    int init;
  };
  std::vector<Job> jobs;
  for (std::size_t ni = 0; ni < cfg.noise_levels.size(); ++ni)
    for (auto v : cfg.variants)
      for (const auto& cell : grid_cells(v, cfg.grid))
        for (int init = 0; init < cfg.initializations; ++init) jobs.push_back({ni, cell, init});

  std::vector<Matrix> noisy_train(cfg.noise_levels.size()), noisy_test(cfg.noise_levels.size());
  for (std::size_t ni = 0; ni < cfg.noise_levels.size(); ++ni) {
    noisy_train[ni] = add_gaussian_noise(X_l, cfg.noise_levels[ni], detail::mix_seed(cfg.seed, 2000 + ni));
    noisy_test[ni] = add_gaussian_noise(X_test, cfg.noise_levels[ni], detail::mix_seed(cfg.seed, 3000 + ni));
  }

  std::vector<RunRecord> records(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::uint64_t init_seed = detail::mix_seed(cfg.seed, 10 + static_cast<std::uint64_t>(job.init));
    const Stopwatch watch(cfg.timing);
    const CellOutcome out = evaluate_cell(noisy_train[job.noise_index], y_l, noisy_test[job.noise_index], y_test,
                                          class_count, job.cell, cfg, init_seed);
    records[i] = make_record(to_string(job.cell.variant), cfg.noise_levels[job.noise_index], 0, "test",
                             job.cell.label(), job.init, init_seed, out.accuracy, out.history_length,
                             watch.seconds());
  });

  ExperimentReport report;
  report.experiment = "laplacian-comparison";
  report.config = config_echo;
  report.runs = std::move(records);
  report.aggregates = aggregate(report.runs);
  return report;
}

// ---------------------------------------------------------------------------
// Semi-supervised pipeline experiments

struct PipelineOutcome {
  double test_accuracy = 0.0;
  std::optional<double> unlabelled_accuracy;
  Index history_length = 0;
};

/// Trains on a split and scores the unlabelled (transductive) and test samples.
inline PipelineOutcome run_pipeline(const DataSplit& s, const TrainConfig& config) {
  const ModelState model = train(s.training_samples(), s.y_l, s.class_count, config);
  PipelineOutcome out;
  out.history_length = static_cast<Index>(model.history.size());
  if (!s.y_u.empty()) out.unlabelled_accuracy = accuracy(transductive_predictions(model), s.y_u);
  const Predictions pred = predict_batch(model, s.X_test, config.fista);
  out.test_accuracy = accuracy(pred.labels, s.y_test);
  return out;
}

struct UnlabelledSweepConfig {
  std::vector<Index> counts = {0, 2, 5, 10, 20, 50, 100, 150};
  Index labelled_per_class = 20;
  Index test_per_class = 100;
  int repetitions = 5;
  TrainConfig train;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool timing = false;
};

/// Test and transductive accuracy as the number of unlabelled samples per class grows. Within a
/// repetition the labelled and test samples stay fixed across counts.
inline ExperimentReport run_unlabelled_sweep(const LabeledDataset& ds, const UnlabelledSweepConfig& cfg,
                                             const std::string& config_echo = "{}") {
  detail::require_config(cfg.repetitions >= 1, "unlabelled sweep: need at least one repetition");
  struct Job {
    Index count;
    int rep;
  };
  std::vector<Job> jobs;
  for (Index count : cfg.counts)
    for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back({count, rep});

  std::vector<std::vector<RunRecord>> rows(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    SplitSpec spec{cfg.labelled_per_class, job.count, cfg.test_per_class,
                   detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(job.rep))};
    TrainConfig tc = cfg.train;
    tc.seed = detail::mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(job.rep));
    const Stopwatch watch(cfg.timing);
    const PipelineOutcome out = run_pipeline(split(ds, spec), tc);
    const double secs = watch.seconds();
    rows[i].push_back(make_record("ssdl-ga", 0.0, job.count, "test", "", job.rep, tc.seed, out.test_accuracy,
                                  out.history_length, secs));
    if (out.unlabelled_accuracy) {
      rows[i].push_back(make_record("ssdl-ga", 0.0, job.count, "unlabelled", "", job.rep, tc.seed,
                                    *out.unlabelled_accuracy, out.history_length, secs));
    }
  });

  ExperimentReport report;
  report.experiment = "unlabelled-sweep";
  report.config = config_echo;
  for (auto& r : rows) report.runs.insert(report.runs.end(), r.begin(), r.end());
  report.aggregates = aggregate(report.runs);
  return report;
}

struct BenchmarkConfig {
  SplitSpec split{20, 80, 100, 0};  // seed is derived per repetition
  int repetitions = 5;
  TrainConfig train;
  bool beta_ablation = true;  // also run with beta = 0
  std::uint64_t seed = 0;
  int jobs = 1;
  bool timing = false;
};

/// Mean and spread of accuracy over repeated random splits, optionally with a beta = 0 ablation
/// on the same splits and seeds.
inline ExperimentReport run_benchmark(const LabeledDataset& ds, const BenchmarkConfig& cfg,
                                      const std::string& config_echo = "{}") {
  detail::require_config(cfg.repetitions >= 1, "benchmark: need at least one repetition");
  struct Job {
    bool ablation;
    int rep;
  };
  std::vector<Job> jobs;
  for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back({false, rep});
  if (cfg.beta_ablation)
    for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back({true, rep});

  std::vector<std::vector<RunRecord>> rows(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    SplitSpec spec = cfg.split;
    spec.seed = detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(job.rep));
    TrainConfig tc = cfg.train;
    tc.seed = detail::mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(job.rep));
    if (job.ablation) tc.hp.beta = 0.0;
    const std::string variant = job.ablation ? "ssdl-ga-beta0" : "ssdl-ga";
    const Stopwatch watch(cfg.timing);
    const PipelineOutcome out = run_pipeline(split(ds, spec), tc);
    const double secs = watch.seconds();
    rows[i].push_back(make_record(variant, 0.0, spec.unlabelled_per_class, "test", "", job.rep, tc.seed,
                                  out.test_accuracy, out.history_length, secs));
    if (out.unlabelled_accuracy) {
      rows[i].push_back(make_record(variant, 0.0, spec.unlabelled_per_class, "unlabelled", "", job.rep, tc.seed,
                                    *out.unlabelled_accuracy, out.history_length, secs));
    }
  });

  ExperimentReport report;
  report.experiment = "benchmark";
  report.config = config_echo;
  for (auto& r : rows) report.runs.insert(report.runs.end(), r.begin(), r.end());
  report.aggregates = aggregate(report.runs);
  return report;
}

}  // namespace ssdl

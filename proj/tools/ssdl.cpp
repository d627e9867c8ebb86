// Command-line entry point: train, predict, encode and experiment subcommands.

#include <ssdl/config.hpp>
#include <ssdl/data.hpp>
#include <ssdl/eval.hpp>
#include <ssdl/inference.hpp>
#include <ssdl/model_io.hpp>
#include <ssdl/report.hpp>
#include <ssdl/trainer.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace ssdl;

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Loaded {
  LabeledDataset train;
  std::optional<LabeledDataset> test;
  Matrix unlabelled;
};

LabeledDataset load_labelled(const DataConfig& d, const std::string& path, const std::string& labels) {
  if (d.format == "idx") return load_idx(path, labels);
  return load_delimited(path, d.label_column, d.delimiter, d.header);
}

/// Applies the configured preprocessing and projection to a list of blocks as one matrix, then
/// splits them back.
void transform_blocks(const CliConfig& cfg, std::vector<Matrix*> blocks) {
  Index total = 0;
  Index rows = -1;
  for (Matrix* b : blocks) {
    if (b->size() == 0 && b->cols() == 0) continue;
    if (rows >= 0 && b->rows() != rows)
      throw ShapeMismatch("data blocks have different feature counts (" + std::to_string(rows) + " vs " +
                          std::to_string(b->rows()) + ")");
    rows = b->rows();
    total += b->cols();
  }
  if (rows < 0 || (cfg.preprocess.empty() && !cfg.projection)) return;
  Matrix all(rows, total);
  Index at = 0;
  for (Matrix* b : blocks) {
    if (b->cols() == 0) continue;
    all.middleCols(at, b->cols()) = *b;
    at += b->cols();
  }
  all = preprocess(std::move(all), cfg.preprocess);
  if (cfg.projection) all = random_projection(all, cfg.projection->dimension, cfg.projection->seed);
  at = 0;
  for (Matrix* b : blocks) {
    if (b->cols() == 0) continue;
    const Index n = b->cols();
    *b = all.middleCols(at, n);
    at += n;
  }
}

Loaded load_data(const CliConfig& cfg) {
  if (cfg.data.train.empty()) throw InvalidConfiguration("config: 'data.train' is required for this command");
  Loaded out;
  out.train = load_labelled(cfg.data, cfg.data.train, cfg.data.train_labels);
  if (!cfg.data.test.empty()) out.test = load_labelled(cfg.data, cfg.data.test, cfg.data.test_labels);
  if (!cfg.data.unlabelled.empty()) out.unlabelled = load_delimited_matrix(cfg.data.unlabelled, cfg.data.delimiter, cfg.data.header);
  std::vector<Matrix*> blocks{&out.train.X};
  if (out.test) blocks.push_back(&out.test->X);
  blocks.push_back(&out.unlabelled);
  transform_blocks(cfg, blocks);
  return out;
}

LabeledDataset pooled(const Loaded& data) {
  if (!data.test) return data.train;
  detail::require_config(data.test->X.rows() == data.train.X.rows(), "train and test data have different feature counts");
  LabeledDataset all;
  all.X.resize(data.train.X.rows(), data.train.size() + data.test->size());
  all.X << data.train.X, data.test->X;
  all.y = data.train.y;
  all.y.insert(all.y.end(), data.test->y.begin(), data.test->y.end());
  all.class_count = std::max(data.train.class_count, data.test->class_count);
  return all;
}

void write_log(const std::string& path, const std::vector<double>& history, const std::vector<IterationTrace>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open log file '" + path + "' for writing");
  out << "iteration,objective,after_assignment,after_coding,after_dictionary,after_classifier\n";
  char buf[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i < trace.size()) {
      const auto& t = trace[i];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, history[i], t.after_assignment,
                    t.after_coding, t.after_dictionary, t.after_classifier);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,,,,\n", i, history[i]);
    }
    out << buf;
  }
  if (!out) throw IoError("failed writing log file '" + path + "'");
}

int cmd_train(const CliConfig& cfg) {
  const Loaded data = load_data(cfg);
  Matrix X_l, X_u = data.unlabelled;
  std::vector<int> y_l;
  std::optional<DataSplit> s;
  if (cfg.split_set) {
    SplitSpec spec = cfg.split;
    spec.seed = detail::mix_seed(cfg.seed, 0);
    s = split(data.train, spec);
    X_l = s->X_l;
    y_l = s->y_l;
    if (X_u.cols() == 0) {
      X_u = s->X_u;
    } else if (s->X_u.cols() > 0) {
      Matrix both(X_u.rows(), X_u.cols() + s->X_u.cols());
      both << s->X_u, X_u;
      X_u = both;
    }
  } else {
    X_l = data.train.X;
    y_l = data.train.y;
  }
  if (X_u.cols() > 0 && X_u.rows() != X_l.rows())
    throw ShapeMismatch("unlabelled samples have " + std::to_string(X_u.rows()) + " features, labelled samples " +
                        std::to_string(X_l.rows()));
  Matrix X(X_l.rows(), X_l.cols() + X_u.cols());
  X << X_l, X_u;

  TrainConfig tc = cfg.train;
  tc.seed = detail::mix_seed(cfg.seed, 1);
  ModelState model;
  try {
    model = train(X, y_l, data.train.class_count, tc);
  } catch (const TrainingFailure& e) {
    write_log(cfg.output.log, e.history(), {});
    throw;
  }
  save_model(model, cfg.output.model);
  write_log(cfg.output.log, model.history, model.trace);
  if (cfg.verbosity > 0) {
    std::fprintf(stderr, "trained on %lld labelled and %lld unlabelled samples, %zu iterations, objective %.6g\n",
                 static_cast<long long>(X_l.cols()), static_cast<long long>(X_u.cols()), model.history.size(),
                 model.history.empty() ? 0.0 : model.history.back());
    if (s && !s->y_test.empty()) {
      const auto pred = predict_batch(model, s->X_test, tc.fista);
      std::fprintf(stderr, "held-out test accuracy %.4f\n", accuracy(pred.labels, s->y_test));
    }
  }
  return kOk;
}

Matrix load_input(const std::string& path, const std::optional<CliConfig>& cfg, char delimiter, bool header,
                  Index expected_rows) {
  Matrix X = load_delimited_matrix(path, delimiter, header);
  if (cfg && X.cols() > 0) transform_blocks(*cfg, {&X});
  if (X.cols() > 0 && X.rows() != expected_rows) {
    throw ShapeMismatch("input '" + path + "' has " + std::to_string(X.rows()) + " features per sample, the model expects " +
                        std::to_string(expected_rows));
  }
  return X;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& output,
                const std::optional<CliConfig>& cfg, char delimiter, bool header, bool encode_only) {
  const ModelState model = load_model(model_path);
  const Matrix X = load_input(input, cfg, delimiter, header, model.X.rows());
  const FistaParams fista = cfg ? cfg->train.fista : FistaParams{};
  Predictions pred;
  if (X.cols() > 0) {
    pred = predict_batch(model, X, fista);
  } else {
    pred.scores.resize(model.class_count, 0);
    pred.codes.resize(model.D.cols(), 0);
  }
  std::ofstream out(output);
  if (!out) throw IoError("cannot open output file '" + output + "' for writing");
  char buf[40];
  if (encode_only) {
    out << "sample";
    for (Index a = 0; a < model.D.cols(); ++a) out << ",code_" << a;
    out << '\n';
    for (Index j = 0; j < pred.codes.cols(); ++j) {
      out << j;
      for (Index a = 0; a < pred.codes.rows(); ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", pred.codes(a, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  } else {
    out << "sample,label";
    for (int c = 0; c < model.class_count; ++c) out << ",score_" << c;
    out << '\n';
    for (Index j = 0; j < pred.scores.cols(); ++j) {
      out << j << ',' << pred.labels[static_cast<std::size_t>(j)];
      for (Index c = 0; c < pred.scores.rows(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", pred.scores(c, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + output + "'");
  return kOk;
}

int cmd_experiment(CliConfig cfg, const std::string& name_override) {
  std::string name = name_override.empty() ? cfg.experiment.name : name_override;
  if (name.empty()) throw InvalidConfiguration("no experiment selected (set experiment.name or pass --name)");
  if (name != "laplacian-comparison" && name != "noise-sweep" && name != "unlabelled-sweep" && name != "benchmark") {
    throw InvalidConfiguration("unknown experiment '" + name +
                               "' (expected laplacian-comparison, noise-sweep, unlabelled-sweep or benchmark)");
  }
  nlohmann::json echo = cfg.source;
  echo["seed"] = cfg.seed;
  echo["jobs"] = cfg.jobs;
  echo["experiment"]["name"] = name;
  const std::string echo_text = echo.dump();
  const Loaded data = load_data(cfg);

  ExperimentReport report;
  if (name == "laplacian-comparison" || name == "noise-sweep") {
    LaplacianComparisonConfig lc = cfg.experiment.laplacian;
    if (name == "noise-sweep" && !cfg.experiment.noise_levels_set) lc.noise_levels = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    lc.seed = cfg.seed;
    lc.jobs = cfg.jobs;
    lc.timing = cfg.experiment.timing;
    SplitSpec spec = cfg.split;
    spec.unlabelled_per_class = 0;
    if (data.test) spec.test_per_class = 0;
    spec.seed = detail::mix_seed(cfg.seed, 0);
    const DataSplit s = split(data.train, spec);
    const Matrix& X_test = data.test ? data.test->X : s.X_test;
    const std::vector<int>& y_test = data.test ? data.test->y : s.y_test;
    report = run_laplacian_comparison(s.X_l, s.y_l, X_test, y_test, data.train.class_count, lc, echo_text);
    report.experiment = name;
  } else if (name == "unlabelled-sweep") {
    UnlabelledSweepConfig uc;
    uc.counts = cfg.experiment.counts;
    uc.labelled_per_class = cfg.split.labelled_per_class;
    uc.test_per_class = cfg.split.test_per_class;
    uc.repetitions = cfg.experiment.repetitions;
    uc.train = cfg.train;
    uc.seed = cfg.seed;
    uc.jobs = cfg.jobs;
    uc.timing = cfg.experiment.timing;
    report = run_unlabelled_sweep(pooled(data), uc, echo_text);
  } else {
    BenchmarkConfig bc;
    bc.split = cfg.split;
    bc.repetitions = cfg.experiment.repetitions;
    bc.train = cfg.train;
    bc.beta_ablation = cfg.experiment.beta_ablation;
    bc.seed = cfg.seed;
    bc.jobs = cfg.jobs;
    bc.timing = cfg.experiment.timing;
    report = run_benchmark(pooled(data), bc, echo_text);
  }
  emit_report(report, cfg.output.report, cfg.output.format);
  if (cfg.verbosity > 0) {
    for (const auto& a : report.aggregates) {
      std::fprintf(stderr, "%-16s noise=%-5g count=%-4lld %-10s runs=%-4lld mean=%.4f std=%.4f best_error=%.4f %s\n",
                   a.variant.c_str(), a.noise, static_cast<long long>(a.count), a.subset.c_str(),
                   static_cast<long long>(a.runs), a.mean_accuracy, a.std_accuracy, a.best_error, a.best_cell.c_str());
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised dictionary learning with graph regularization and active points"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string output;
  std::string format;
  std::string model_path;
  std::string input;
  std::string delimiter = ",";
  bool header = false;
  std::string name;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--jobs", jobs, "Worker threads for experiment grids")->check(CLI::Range(1, 4096));
    sub->add_option("--output", output, "Output path (overrides the config)");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "structured"}));
    sub->add_flag("-v,--verbose", "Print progress and summaries to stderr");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model and write the model file and objective log");
  add_common(train_cmd);
  train_cmd->add_option("--log", name, "Objective log path (overrides the config)");
  auto* predict_cmd = app.add_subcommand("predict", "Predict classes for samples in a delimited file");
  auto* encode_cmd = app.add_subcommand("encode", "Sparse codes for samples in a delimited file");
  for (auto* sub : {predict_cmd, encode_cmd}) {
    add_common(sub);
    sub->add_option("--model", model_path, "Model file written by train")->required();
    sub->add_option("--input", input, "Samples, one per row")->required();
    sub->add_option("--delimiter", delimiter, "Input cell delimiter");
    sub->add_flag("--header", header, "Input has a header row");
  }
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment and write its report");
  add_common(exp_cmd);
  exp_cmd->add_option("--name", name, "laplacian-comparison, noise-sweep, unlabelled-sweep or benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  int verbose = 0;
  for (const auto* sub : app.get_subcommands()) verbose += static_cast<int>(sub->count("--verbose"));

  try {
    std::optional<CliConfig> cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    const auto apply_overrides = [&](CliConfig& c) {
      if (seed) c.seed = *seed;
      if (jobs) c.jobs = *jobs;
      if (!format.empty()) c.output.format = parse_report_format(format);
      if (verbose > 0) c.verbosity = verbose;
    };
    if (train_cmd->parsed()) {
      if (!cfg) throw InvalidConfiguration("train needs --config");
      apply_overrides(*cfg);
      if (!output.empty()) cfg->output.model = output;
      if (!name.empty()) cfg->output.log = name;
      return cmd_train(*cfg);
    }
    if (predict_cmd->parsed() || encode_cmd->parsed()) {
      if (cfg) apply_overrides(*cfg);
      char delim = delimiter == "\\t" || delimiter == "tab" ? '\t' : delimiter.empty() ? ',' : delimiter[0];
      const bool encode_only = encode_cmd->parsed();
      const std::string out = !output.empty() ? output : encode_only ? "codes.csv" : "predictions.csv";
      return cmd_predict(model_path, input, out, cfg, delim, header, encode_only);
    }
    if (!cfg) throw InvalidConfiguration("experiment needs --config");
    apply_overrides(*cfg);
    if (!output.empty()) cfg->output.report = output;
    return cmd_experiment(*cfg, name);
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "error: numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const InvalidConfiguration& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
}

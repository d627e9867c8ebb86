#pragma once

// JSON configuration for the command-line tool. Every object is checked for unknown keys and
// every value for type and range before any computation starts.

#include <ssdl/core.hpp>
#include <ssdl/data.hpp>
#include <ssdl/eval.hpp>
#include <ssdl/report.hpp>
#include <ssdl/trainer.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

namespace ssdl {

struct DataConfig {
  std::string format = "csv";  // "csv" or "idx"
  std::string train;           // csv: samples with labels; idx: image file
  std::string train_labels;    // idx only
  std::string test;
  std::string test_labels;
  std::string unlabelled;      // optional csv of extra unlabelled samples (train only)
  int label_column = -1;
  char delimiter = ',';
  bool header = false;
};

struct ProjectionConfig {
  Index dimension = 0;
  std::uint64_t seed = 0;
};

struct OutputConfig {
  std::string model = "model.ssdl";
  std::string log = "train_log.csv";
  std::string report = "report.csv";
  ReportFormat format = ReportFormat::Csv;
};

struct ExperimentConfig {
  std::string name;
  int repetitions = 5;
  std::vector<Index> counts = {0, 2, 5, 10, 20, 50, 100, 150};
  bool beta_ablation = true;
  LaplacianComparisonConfig laplacian;
  bool noise_levels_set = false;
  bool timing = false;
};

struct CliConfig {
  DataConfig data;
  std::vector<PreprocessStep> preprocess;
  std::optional<ProjectionConfig> projection;
  SplitSpec split{20, 80, 100, 0};
  bool split_set = false;
  TrainConfig train;
  ExperimentConfig experiment;
  OutputConfig output;
  std::uint64_t seed = 0;
  int jobs = 1;
  int verbosity = 0;
  nlohmann::json source = nlohmann::json::object();  // the parsed document, echoed into reports
};

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw InvalidConfiguration("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) throw InvalidConfiguration("config: unknown key '" + where + "." + it.key() + "'");
  }
}

template <typename T>
T get_value(const Json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  const std::string path = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw InvalidConfiguration("config: '" + path + "' must be true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw InvalidConfiguration("config: '" + path + "' must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw InvalidConfiguration("config: '" + path + "' must be a number");
    return v.get<T>();
  } else {
    if (!v.is_number_integer()) throw InvalidConfiguration("config: '" + path + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) return v.get<T>();
      throw InvalidConfiguration("config: '" + path + "' must be nonnegative");
    } else {
      return v.get<T>();
    }
  }
}

template <typename T>
std::vector<T> get_list(const Json& obj, const std::string& where, const char* key, std::vector<T> fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  const std::string path = where + "." + key;
  if (!v.is_array() || v.empty()) throw InvalidConfiguration("config: '" + path + "' must be a non-empty list");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_floating_point_v<T>) {
      if (!e.is_number()) throw InvalidConfiguration("config: '" + path + "' must hold numbers");
    } else {
      if (!e.is_number_integer()) throw InvalidConfiguration("config: '" + path + "' must hold integers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

inline FistaParams parse_fista(const Json& j, const std::string& where) {
  check_keys(j, where, {"tau0", "eta", "max_iters", "rel_tol", "max_backtracks"});
  FistaParams f;
  f.tau0 = get_value(j, where, "tau0", f.tau0);
  f.eta = get_value(j, where, "eta", f.eta);
  f.max_iters = get_value(j, where, "max_iters", f.max_iters);
  f.rel_tol = get_value(j, where, "rel_tol", f.rel_tol);
  f.max_backtracks = get_value(j, where, "max_backtracks", f.max_backtracks);
  f.validate();
  return f;
}

inline TrainConfig parse_train(const Json& j) {
  check_keys(j, "train", {"lambda", "beta", "gamma", "mu", "alpha", "p", "k", "r", "outer_max_iters",
                          "outer_rel_tol", "fista", "batching", "denoise_warmup"});
  TrainConfig t;
  auto& hp = t.hp;
  hp.lambda = get_value(j, "train", "lambda", hp.lambda);
  hp.beta = get_value(j, "train", "beta", hp.beta);
  hp.gamma = get_value(j, "train", "gamma", hp.gamma);
  hp.mu = get_value(j, "train", "mu", 2.0 * hp.gamma);  // mu / gamma = 2 unless given
  hp.alpha = get_value(j, "train", "alpha", hp.alpha);
  hp.p = get_value(j, "train", "p", hp.p);
  hp.k = get_value(j, "train", "k", hp.k);
  hp.r = get_value(j, "train", "r", hp.r);
  t.outer_max_iters = get_value(j, "train", "outer_max_iters", t.outer_max_iters);
  t.outer_rel_tol = get_value(j, "train", "outer_rel_tol", t.outer_rel_tol);
  t.denoise_warmup = get_value(j, "train", "denoise_warmup", t.denoise_warmup);
  if (j.contains("fista")) t.fista = parse_fista(j.at("fista"), "train.fista");
  if (j.contains("batching")) {
    const Json& b = j.at("batching");
    check_keys(b, "train.batching", {"batches", "epochs"});
    BatchSchedule s;
    s.batches = get_value(b, "train.batching", "batches", s.batches);
    s.epochs = get_value(b, "train.batching", "epochs", s.epochs);
    t.batching = s;
  }
  t.validate();
  return t;
}

inline std::vector<PreprocessStep> parse_preprocess(const Json& j) {
  if (!j.is_array()) throw InvalidConfiguration("config: 'preprocess' must be a list of steps");
  std::vector<PreprocessStep> out;
  for (const auto& s : j) {
    check_keys(s, "preprocess[]", {"step", "factor"});
    const auto name = get_value<std::string>(s, "preprocess[]", "step", "");
    if (name == "standardize") {
      out.push_back(PreprocessStep::standardize());
    } else if (name == "l2_normalize") {
      out.push_back(PreprocessStep::l2_normalize());
    } else if (name == "scale") {
      if (!s.contains("factor")) throw InvalidConfiguration("config: preprocess step 'scale' needs 'factor'");
      out.push_back(PreprocessStep::scale(get_value(s, "preprocess[]", "factor", 1.0)));
    } else {
      throw InvalidConfiguration("config: unknown preprocess step '" + name +
                                 "' (expected standardize, l2_normalize or scale)");
    }
    if (name != "scale" && s.contains("factor"))
      throw InvalidConfiguration("config: 'factor' only applies to the scale step");
  }
  return out;
}

inline void parse_experiment(const Json& j, ExperimentConfig& e) {
  check_keys(j, "experiment", {"name", "repetitions", "counts", "beta_ablation", "variants", "grid", "noise_levels",
                               "initializations", "reduced", "ridge_ratios", "cv_folds", "timing"});
  e.name = get_value(j, "experiment", "name", e.name);
  e.repetitions = get_value(j, "experiment", "repetitions", e.repetitions);
  e.counts = get_list(j, "experiment", "counts", e.counts);
  e.beta_ablation = get_value(j, "experiment", "beta_ablation", e.beta_ablation);
  e.timing = get_value(j, "experiment", "timing", e.timing);
  auto& l = e.laplacian;
  if (j.contains("variants")) {
    const Json& v = j.at("variants");
    if (!v.is_array() || v.empty()) throw InvalidConfiguration("config: 'experiment.variants' must be a non-empty list");
    l.variants.clear();
    for (const auto& name : v) {
      if (!name.is_string()) throw InvalidConfiguration("config: 'experiment.variants' must hold strings");
      l.variants.push_back(parse_variant(name.get<std::string>()));
    }
  }
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    check_keys(g, "experiment.grid", {"beta", "k", "sigma", "zeta"});
    l.grid.beta = get_list(g, "experiment.grid", "beta", l.grid.beta);
    l.grid.k = get_list(g, "experiment.grid", "k", l.grid.k);
    l.grid.sigma = get_list(g, "experiment.grid", "sigma", l.grid.sigma);
    l.grid.zeta = get_list(g, "experiment.grid", "zeta", l.grid.zeta);
    for (double b : l.grid.beta) require_config(b >= 0.0, "config: grid beta values must be nonnegative");
    for (Index k : l.grid.k) require_config(k >= 1, "config: grid k values must be at least 1");
    for (double s : l.grid.sigma) require_config(s > 0.0, "config: grid sigma values must be positive");
    for (double z : l.grid.zeta) require_config(z > 0.0 && z <= 1.0, "config: grid zeta values must lie in (0, 1]");
  }
  if (j.contains("noise_levels")) {
    l.noise_levels = get_list(j, "experiment", "noise_levels", l.noise_levels);
    e.noise_levels_set = true;
    for (double s : l.noise_levels) require_config(s >= 0.0, "config: noise levels must be nonnegative");
  }
  l.initializations = get_value(j, "experiment", "initializations", l.initializations);
  l.ridge_ratios = get_list(j, "experiment", "ridge_ratios", l.ridge_ratios);
  l.cv_folds = get_value(j, "experiment", "cv_folds", l.cv_folds);
  if (j.contains("reduced")) {
    const Json& r = j.at("reduced");
    check_keys(r, "experiment.reduced", {"lambda", "p", "alpha", "outer_max_iters", "outer_rel_tol", "fista"});
    l.reduced.lambda = get_value(r, "experiment.reduced", "lambda", l.reduced.lambda);
    l.reduced.p = get_value(r, "experiment.reduced", "p", l.reduced.p);
    l.reduced.alpha = get_value(r, "experiment.reduced", "alpha", l.reduced.alpha);
    l.reduced.outer_max_iters = get_value(r, "experiment.reduced", "outer_max_iters", l.reduced.outer_max_iters);
    l.reduced.outer_rel_tol = get_value(r, "experiment.reduced", "outer_rel_tol", l.reduced.outer_rel_tol);
    if (r.contains("fista")) l.reduced.fista = parse_fista(r.at("fista"), "experiment.reduced.fista");
  }
  require_config(e.repetitions >= 1, "config: experiment.repetitions must be at least 1");
  require_config(l.initializations >= 1, "config: experiment.initializations must be at least 1");
  require_config(l.cv_folds >= 2, "config: experiment.cv_folds must be at least 2");
  require_config(l.reduced.lambda >= 0.0 && l.reduced.p >= 1 && l.reduced.alpha > 0.0 &&
                     l.reduced.outer_max_iters >= 1,
                 "config: experiment.reduced has an out-of-range value");
  for (Index c : e.counts) require_config(c >= 0, "config: unlabelled counts must be nonnegative");
}

/// Relative data paths resolve against $SSDL_DATA_DIR when it is set.
inline std::string resolve_data_path(const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* dir = std::getenv("SSDL_DATA_DIR"); dir && *dir) return (std::filesystem::path(dir) / p).string();
  return path;
}

}  // namespace detail

inline CliConfig parse_config(const nlohmann::json& j) {
  using detail::get_value;
  detail::check_keys(j, "<root>", {"data", "preprocess", "projection", "split", "train", "experiment", "output",
                                   "seed", "jobs", "verbosity"});
  CliConfig c;
  c.source = j;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::check_keys(d, "data", {"format", "train", "train_labels", "test", "test_labels", "unlabelled",
                                   "label_column", "delimiter", "header"});
    c.data.format = get_value(d, "data", "format", c.data.format);
    if (c.data.format != "csv" && c.data.format != "idx")
      throw InvalidConfiguration("config: 'data.format' must be csv or idx");
    c.data.train = detail::resolve_data_path(get_value(d, "data", "train", c.data.train));
    c.data.train_labels = detail::resolve_data_path(get_value(d, "data", "train_labels", c.data.train_labels));
    c.data.test = detail::resolve_data_path(get_value(d, "data", "test", c.data.test));
    c.data.test_labels = detail::resolve_data_path(get_value(d, "data", "test_labels", c.data.test_labels));
    c.data.unlabelled = detail::resolve_data_path(get_value(d, "data", "unlabelled", c.data.unlabelled));
    c.data.label_column = get_value(d, "data", "label_column", c.data.label_column);
    const auto delim = get_value<std::string>(d, "data", "delimiter", ",");
    if (delim == "\\t" || delim == "tab") c.data.delimiter = '\t';
    else if (delim.size() == 1) c.data.delimiter = delim[0];
    else throw InvalidConfiguration("config: 'data.delimiter' must be a single character");
    c.data.header = get_value(d, "data", "header", c.data.header);
    if (c.data.format == "idx" && !c.data.train.empty() && c.data.train_labels.empty())
      throw InvalidConfiguration("config: idx data needs 'data.train_labels'");
    if (c.data.format == "idx" && !c.data.test.empty() && c.data.test_labels.empty())
      throw InvalidConfiguration("config: idx data needs 'data.test_labels'");
  }
  if (j.contains("preprocess")) c.preprocess = detail::parse_preprocess(j.at("preprocess"));
  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    detail::check_keys(p, "projection", {"dimension", "seed"});
    ProjectionConfig pc;
    pc.dimension = get_value(p, "projection", "dimension", pc.dimension);
    pc.seed = get_value(p, "projection", "seed", pc.seed);
    detail::require_config(pc.dimension >= 1, "config: 'projection.dimension' must be at least 1");
    c.projection = pc;
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    detail::check_keys(s, "split", {"labelled_per_class", "unlabelled_per_class", "test_per_class"});
    c.split.labelled_per_class = get_value(s, "split", "labelled_per_class", c.split.labelled_per_class);
    c.split.unlabelled_per_class = get_value(s, "split", "unlabelled_per_class", c.split.unlabelled_per_class);
    c.split.test_per_class = get_value(s, "split", "test_per_class", c.split.test_per_class);
    detail::require_config(c.split.labelled_per_class >= 1 && c.split.unlabelled_per_class >= 0 &&
                               c.split.test_per_class >= 0,
                           "config: split needs at least one labelled sample per class and nonnegative counts");
    c.split_set = true;
  }
  c.train = detail::parse_train(j.contains("train") ? j.at("train") : nlohmann::json::object());
  if (j.contains("experiment")) detail::parse_experiment(j.at("experiment"), c.experiment);
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::check_keys(o, "output", {"model", "log", "report", "format"});
    c.output.model = get_value(o, "output", "model", c.output.model);
    c.output.log = get_value(o, "output", "log", c.output.log);
    c.output.report = get_value(o, "output", "report", c.output.report);
    if (o.contains("format")) c.output.format = parse_report_format(get_value<std::string>(o, "output", "format", "csv"));
  }
  c.seed = get_value(j, "<root>", "seed", c.seed);
  c.jobs = get_value(j, "<root>", "jobs", c.jobs);
  c.verbosity = get_value(j, "<root>", "verbosity", c.verbosity);
  detail::require_config(c.jobs >= 1, "config: 'jobs' must be at least 1");
  return c;
}

inline CliConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfiguration("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace ssdl

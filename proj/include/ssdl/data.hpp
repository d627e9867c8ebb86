#pragma once

// Dataset loading, preprocessing, noise, random projection and stratified splits.

#include <ssdl/core.hpp>
#include <ssdl/model.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace ssdl {

struct LabeledDataset {
  Matrix X;  // n x N
  std::vector<int> y;
  int class_count = 0;

  Index size() const { return X.cols(); }
  Index dimension() const { return X.rows(); }
};

namespace detail {

inline int infer_class_count(const std::vector<int>& y, const std::string& source) {
  if (y.empty()) return 0;
  int top = -1;
  for (int v : y) {
    if (v < 0) throw FormatError(source + ": negative class label " + std::to_string(v));
    top = std::max(top, v);
  }
  std::vector<char> seen(static_cast<std::size_t>(top) + 1, 0);
  for (int v : y) seen[static_cast<std::size_t>(v)] = 1;
  for (int c = 0; c <= top; ++c) {
    if (!seen[static_cast<std::size_t>(c)])
      throw FormatError(source + ": class " + std::to_string(c) + " has no sample (labels must cover 0..C-1)");
  }
  return top + 1;
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t big_endian_u32(const std::vector<unsigned char>& buf, std::size_t offset) {
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  if (delimiter == ' ' || delimiter == '\t') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, col);
  return v;
}

/// Rows of numeric cells; `row` and `col` in errors are 1-based file positions.
inline std::vector<std::vector<double>> read_table(const std::string& path, char delimiter, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto fields = split_fields(content, delimiter);
    if (rows.empty()) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " cells, found " + std::to_string(fields.size()), line_no,
                       std::min(fields.size(), width) + 1);
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) values[c] = parse_cell(fields[c], line_no, c + 1);
    rows.push_back(std::move(values));
  }
  return rows;
}

}  // namespace detail

/// IDX image and label files (big-endian, magic 2051 and 2049). Pixel (r, c) of each image becomes
/// feature c * rows + r.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = detail::read_file(images_path);
  const auto labels = detail::read_file(labels_path);
  if (images.size() >= 4 && detail::big_endian_u32(images, 0) != 2051)
    throw BadMagic("'" + images_path + "' is not an IDX image file");
  if (labels.size() >= 4 && detail::big_endian_u32(labels, 0) != 2049)
    throw BadMagic("'" + labels_path + "' is not an IDX label file");
  if (images.size() < 16) throw TruncatedFile("'" + images_path + "' is shorter than an IDX image header");
  if (labels.size() < 8) throw TruncatedFile("'" + labels_path + "' is shorter than an IDX label header");

  const std::uint64_t count = detail::big_endian_u32(images, 4);
  const std::uint64_t rows = detail::big_endian_u32(images, 8);
  const std::uint64_t cols = detail::big_endian_u32(images, 12);
  const std::uint64_t label_count = detail::big_endian_u32(labels, 4);
  if (label_count != count) {
    throw ShapeMismatch("'" + images_path + "' holds " + std::to_string(count) + " images but '" + labels_path +
                        "' holds " + std::to_string(label_count) + " labels");
  }
  const std::uint64_t pixels = rows * cols;
  if (images.size() - 16 < count * pixels) throw TruncatedFile("'" + images_path + "' is truncated");
  if (labels.size() - 8 < count) throw TruncatedFile("'" + labels_path + "' is truncated");

  LabeledDataset ds;
  ds.X.resize(static_cast<Index>(pixels), static_cast<Index>(count));
  ds.y.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t base = 16 + i * pixels;
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c)
        ds.X(static_cast<Index>(c * rows + r), static_cast<Index>(i)) = images[base + r * cols + c];
    ds.y[i] = labels[8 + i];
  }
  ds.class_count = detail::infer_class_count(ds.y, labels_path);
  return ds;
}

/// One sample per row. `label_column` is a 0-based column index; a negative value counts from the end.
inline LabeledDataset load_delimited(const std::string& path, int label_column, char delimiter = ',',
                                     bool header = false) {
  const auto rows = detail::read_table(path, delimiter, header);
  LabeledDataset ds;
  if (rows.empty()) return ds;
  const auto width = static_cast<int>(rows.front().size());
  const int lc = label_column < 0 ? width + label_column : label_column;
  if (lc < 0 || lc >= width) {
    throw FormatError("'" + path + "': label column " + std::to_string(label_column) + " does not exist (" +
                      std::to_string(width) + " columns)");
  }
  ds.X.resize(width - 1, static_cast<Index>(rows.size()));
  ds.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double label = rows[i][static_cast<std::size_t>(lc)];
    if (label != std::floor(label) || label < 0 || label > 1e6)
      throw ParseError("label is not a nonnegative integer", header ? i + 2 : i + 1, static_cast<std::size_t>(lc) + 1);
    ds.y[i] = static_cast<int>(label);
    Index f = 0;
    for (int c = 0; c < width; ++c)
      if (c != lc) ds.X(f++, static_cast<Index>(i)) = rows[i][static_cast<std::size_t>(c)];
  }
  ds.class_count = detail::infer_class_count(ds.y, path);
  return ds;
}

/// Unlabelled samples, one per row.
inline Matrix load_delimited_matrix(const std::string& path, char delimiter = ',', bool header = false) {
  const auto rows = detail::read_table(path, delimiter, header);
  if (rows.empty()) return {};
  Matrix X(static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) X(static_cast<Index>(c), static_cast<Index>(i)) = rows[i][c];
  return X;
}

struct PreprocessStep {
  enum class Kind { Standardize, L2Normalize, Scale };
  Kind kind = Kind::Standardize;
  double factor = 1.0;  // Scale only

  static PreprocessStep standardize() { return {Kind::Standardize, 1.0}; }
  static PreprocessStep l2_normalize() { return {Kind::L2Normalize, 1.0}; }
  static PreprocessStep scale(double s) { return {Kind::Scale, s}; }
};

/// Per-feature standardization over the columns of X (population std). Features with zero
/// spread are only centred.
inline Matrix standardize_features(Matrix X) {
  if (X.cols() == 0) return X;
  const Vector mean = X.rowwise().mean();
  X.colwise() -= mean;
  const Vector sd = (X.array().square().rowwise().sum() / static_cast<double>(X.cols())).sqrt();
  for (Index f = 0; f < X.rows(); ++f)
    if (sd(f) > 0.0) X.row(f) /= sd(f);
  return X;
}

/// Unit l2 norm per column; zero columns pass through.
inline Matrix l2_normalize_columns(Matrix X) {
  for (Index j = 0; j < X.cols(); ++j) {
    const double norm = X.col(j).norm();
    if (norm > 0.0) X.col(j) /= norm;
  }
  return X;
}

inline Matrix preprocess(Matrix X, const std::vector<PreprocessStep>& steps) {
  for (const auto& step : steps) {
    switch (step.kind) {
      case PreprocessStep::Kind::Standardize: X = standardize_features(std::move(X)); break;
      case PreprocessStep::Kind::L2Normalize: X = l2_normalize_columns(std::move(X)); break;
      case PreprocessStep::Kind::Scale: X *= step.factor; break;
    }
  }
  return X;
}

/// X + N(0, sd^2) noise with sd = sigma * mean(X.^2).
inline Matrix add_gaussian_noise(const Matrix& X, double sigma, std::uint64_t seed) {
  detail::require_config(sigma >= 0.0, "add_gaussian_noise: sigma must be nonnegative");
  if (sigma == 0.0 || X.size() == 0) return X;
  const double sd = sigma * X.array().square().mean();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  Matrix out = X;
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) += normal(rng);
  return out;
}

/// d_out x n matrix with i.i.d. N(0, 1) / sqrt(d_out) entries.
inline Matrix projection_matrix(Index d_out, Index n, std::uint64_t seed) {
  detail::require_config(d_out >= 1, "random_projection: output dimension must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix R(d_out, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < d_out; ++i) R(i, j) = normal(rng);
  return R / std::sqrt(static_cast<double>(d_out));
}

inline Matrix random_projection(const Matrix& X, Index d_out, std::uint64_t seed) {
  return projection_matrix(d_out, X.rows(), seed) * X;
}

struct SplitSpec {
  Index labelled_per_class = 0;
  Index unlabelled_per_class = 0;
  Index test_per_class = 0;
  std::uint64_t seed = 0;
};

struct DataSplit {
  Matrix X_l;
  std::vector<int> y_l;
  LabelMatrix Y;
  Matrix X_u;
  std::vector<int> y_u;  // ground truth, for transductive accuracy only
  Matrix X_test;
  std::vector<int> y_test;
  IndexList labelled_ids, unlabelled_ids, test_ids;  // columns of the source dataset
  int class_count = 0;

  /// [X_l, X_u], the training matrix expected by train().
  Matrix training_samples() const {
    Matrix X(X_l.rows(), X_l.cols() + X_u.cols());
    X << X_l, X_u;
    return X;
  }
};

/// Stratified sampling without replacement. Each class is shuffled once; labelled samples come
/// first, then test samples, then unlabelled ones, so changing the unlabelled count keeps the
/// labelled and test sets fixed.
inline DataSplit split(const LabeledDataset& ds, const SplitSpec& spec) {
  detail::require_config(spec.labelled_per_class >= 0 && spec.unlabelled_per_class >= 0 && spec.test_per_class >= 0,
                         "split: per-class counts must be nonnegative");
  detail::require(static_cast<Index>(ds.y.size()) == ds.X.cols(), "split: label count does not match sample count");
  std::vector<IndexList> members(static_cast<std::size_t>(ds.class_count));
  for (std::size_t i = 0; i < ds.y.size(); ++i) members[static_cast<std::size_t>(ds.y[i])].push_back(static_cast<Index>(i));

  const Index need = spec.labelled_per_class + spec.unlabelled_per_class + spec.test_per_class;
  for (int c = 0; c < ds.class_count; ++c) {
    const auto have = static_cast<Index>(members[static_cast<std::size_t>(c)].size());
    if (have < need) {
      throw InvalidConfiguration("split: class " + std::to_string(c) + " has " + std::to_string(have) +
                                 " samples, the split needs " + std::to_string(need));
    }
  }

  DataSplit out;
  out.class_count = ds.class_count;
  std::mt19937_64 rng(spec.seed);
  for (int c = 0; c < ds.class_count; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    std::shuffle(m.begin(), m.end(), rng);
    auto it = m.begin();
    out.labelled_ids.insert(out.labelled_ids.end(), it, it + spec.labelled_per_class);
    it += spec.labelled_per_class;
    out.test_ids.insert(out.test_ids.end(), it, it + spec.test_per_class);
    it += spec.test_per_class;
    out.unlabelled_ids.insert(out.unlabelled_ids.end(), it, it + spec.unlabelled_per_class);
  }
  const auto take = [&](const IndexList& ids, Matrix& X, std::vector<int>& y) {
    X = detail::select_columns(ds.X, ids);
    y.clear();
    for (Index i : ids) y.push_back(ds.y[static_cast<std::size_t>(i)]);
  };
  take(out.labelled_ids, out.X_l, out.y_l);
  take(out.unlabelled_ids, out.X_u, out.y_u);
  take(out.test_ids, out.X_test, out.y_test);
  out.Y = LabelMatrix::from_labels(out.y_l, ds.class_count);
  return out;
}

}  // namespace ssdl

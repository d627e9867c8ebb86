#pragma once

// Binary model container.
//
//   magic "SSDLGA\r\n" (8 bytes), format version (u32 LE)
//   n, p, N_l, N_u, C, k (u64 LE each)
//   D, A, W, b, P, V as row-major f64 LE payloads
//   omega, lambda, beta, gamma, mu, alpha, r (f64 LE)
//   labels (N_l x i64 LE), history length (u64 LE) and values (f64 LE)
//   training samples X (n x N, row-major f64 LE)
//
// The Laplacian is rebuilt from V and omega on load, masks from the classifier and codes.

#include <ssdl/core.hpp>
#include <ssdl/trainer.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace ssdl {

inline constexpr std::array<char, 8> kModelMagic = {'S', 'S', 'D', 'L', 'G', 'A', '\r', '\n'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed for '" + path_ + "'");
  }
  template <typename T>
  void scalar(T v) { bytes(&v, sizeof(T)); }
  void matrix(const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) scalar<double>(m(i, j));
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw TruncatedFile("model file '" + path_ + "' is truncated");
  }
  template <typename T>
  T scalar() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  Matrix matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = scalar<double>();
    return m;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace detail

inline void save_model(const ModelState& s, const std::string& path) {
  detail::Writer w(path);
  w.bytes(kModelMagic.data(), kModelMagic.size());
  w.scalar<std::uint32_t>(kModelVersion);
  const auto n = static_cast<std::uint64_t>(s.X.rows());
  const auto p = static_cast<std::uint64_t>(s.D.cols());
  const auto nl = static_cast<std::uint64_t>(s.labelled_count());
  const auto nu = static_cast<std::uint64_t>(s.unlabelled_count());
  const auto C = static_cast<std::uint64_t>(s.class_count);
  const auto k = static_cast<std::uint64_t>(s.graph.k);
  for (std::uint64_t d : {n, p, nl, nu, C, k}) w.scalar<std::uint64_t>(d);
  w.matrix(s.D);
  w.matrix(s.A);
  w.matrix(s.clf.W);
  w.matrix(s.clf.b);
  w.matrix(s.P.P);
  w.matrix(Matrix(s.graph.V));
  for (double v : {s.graph.omega, s.hp.lambda, s.hp.beta, s.hp.gamma, s.hp.mu, s.hp.alpha, s.hp.r}) w.scalar<double>(v);
  for (int y : s.labels) w.scalar<std::int64_t>(y);
  w.scalar<std::uint64_t>(s.history.size());
  for (double v : s.history) w.scalar<double>(v);
  w.matrix(s.X);
}

inline ModelState load_model(const std::string& path) {
  detail::Reader r(path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kModelMagic) throw BadMagic("'" + path + "' is not a model file");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kModelVersion) {
    throw VersionMismatch("model file '" + path + "' has format version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion));
  }
  std::array<std::uint64_t, 6> dims{};
  for (auto& d : dims) d = r.scalar<std::uint64_t>();
  const auto [n, p, nl, nu, C, k] = dims;
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 24;
  for (auto d : dims) {
    if (d > kLimit) throw ShapeMismatch("model file '" + path + "' declares an implausible dimension");
  }
  const std::uint64_t N = nl + nu;
  if (n == 0 || p == 0 || C == 0 || N == 0 || nl < C || k == 0 || k >= N) {
    throw ShapeMismatch("model file '" + path + "' has inconsistent dimensions");
  }
  const auto I = [](std::uint64_t v) { return static_cast<Index>(v); };

  ModelState s;
  s.class_count = static_cast<int>(C);
  s.D = r.matrix(I(n), I(p));
  s.A = r.matrix(I(p), I(N));
  s.clf.W = r.matrix(I(C), I(p));
  s.clf.b = r.matrix(I(C), 1);
  s.P.P = r.matrix(I(C), I(nu));
  const Matrix V = r.matrix(I(N), I(N));
  s.graph.omega = r.scalar<double>();
  s.hp.lambda = r.scalar<double>();
  s.hp.beta = r.scalar<double>();
  s.hp.gamma = r.scalar<double>();
  s.hp.mu = r.scalar<double>();
  s.hp.alpha = r.scalar<double>();
  s.hp.r = r.scalar<double>();
  s.hp.p = I(p);
  s.hp.k = I(k);
  s.labels.resize(nl);
  for (auto& y : s.labels) {
    const auto v = r.scalar<std::int64_t>();
    if (v < 0 || static_cast<std::uint64_t>(v) >= C) throw ShapeMismatch("model file '" + path + "' has a label outside [0, C)");
    y = static_cast<int>(v);
  }
  const auto hist = r.scalar<std::uint64_t>();
  if (hist > kLimit) throw ShapeMismatch("model file '" + path + "' declares an implausible history length");
  s.history.resize(hist);
  for (auto& v : s.history) v = r.scalar<double>();
  s.X = r.matrix(I(n), I(N));
  if (!r.at_end()) throw ShapeMismatch("model file '" + path + "' has trailing bytes beyond the declared shapes");

  s.graph.k = I(k);
  s.graph.V = V.sparseView(1.0, 0.0);
  for (Index i = 0; i < I(N); ++i) {
    IndexList idx;  // column order; the nearest-first order is not stored
    for (Index j = 0; j < I(N); ++j)
      if (V(i, j) != 0.0) idx.push_back(j);
    s.graph.indices.push_back(std::move(idx));
  }
  SparseMatrix Id(I(N), I(N));
  Id.setIdentity();
  const SparseMatrix M = Id - s.graph.V;
  s.graph.L = SparseMatrix(M.transpose()) * M;
  s.graph.L.prune(0.0);
  s.graph.L *= s.graph.omega;
  s.masks = update_active_masks(s.clf, s.A, s.label_matrix());
  return s;
}

}  // namespace ssdl

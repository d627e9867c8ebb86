#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or dataset does not satisfy an operation's preconditions.
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

/// Inconsistent shapes passed between operations.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative solver produced a non-finite value.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Subclasses name the specific defect.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : FormatError(what + " at row " + std::to_string(row) + ", column " + std::to_string(column)),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

inline void require_config(bool condition, const std::string& message) {
  if (!condition) throw InvalidConfiguration(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// SplitMix64 step; used to derive independent seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Matrix select_columns(const Matrix& m, const IndexList& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace detail

}  // namespace ssdl

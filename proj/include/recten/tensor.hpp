#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace recten {

using Index = std::uint32_t;

/// Mode sizes (I, J, K).
using Dims = std::array<std::size_t, 3>;

/// Dense column-major matrix used for factors, MTTKRP output and Gram blocks.
using Matrix = Eigen::MatrixXd;

/// One stored tensor entry. Modes are numbered 0, 1, 2.
struct Entry {
  std::array<Index, 3> idx{};
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Coordinate-format, non-negative 3-mode tensor.
///
/// Entries are coalesced (duplicates summed), strictly positive and kept in
/// lexicographic (i, j, k) order, so two tensors are equal exactly when their
/// dims and entry lists are equal. Immutable once built.
class SparseTensor3 {
 public:
  SparseTensor3() = default;

  /// Canonicalize raw coordinates. Throws std::invalid_argument on a zero
  /// dimension, an out-of-range coordinate, or a negative/non-finite value.
  static SparseTensor3 from_coo(const Dims& dims, std::vector<Entry> raw);

  const Dims& dims() const { return dims_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double frobenius_norm_sq() const;
  double sum() const;

  friend bool operator==(const SparseTensor3&, const SparseTensor3&) = default;

 private:
  Dims dims_{0, 0, 0};
  std::vector<Entry> entries_;
};

/// R rank-one components stored as three non-negative factor matrices.
/// Component magnitude lives in the factor columns; there is no weight vector.
class CpModel {
 public:
  CpModel() = default;
  /// Throws std::invalid_argument if column counts differ or any value is
  /// negative or non-finite.
  CpModel(Matrix a, Matrix b, Matrix c);

  static CpModel zeros(const Dims& dims, std::size_t rank);

  std::size_t rank() const { return static_cast<std::size_t>(factors_[0].cols()); }
  Dims dims() const;
  const Matrix& factor(std::size_t mode) const { return factors_.at(mode); }
  const std::array<Matrix, 3>& factors() const { return factors_; }

  /// Sum over components of A(i,r) B(j,r) C(k,r). Throws std::out_of_range.
  double value(std::size_t i, std::size_t j, std::size_t k) const;

  friend bool operator==(const CpModel& x, const CpModel& y);

 private:
  std::array<Matrix, 3> factors_;
};

inline std::size_t nnz(const SparseTensor3& t) { return t.nnz(); }
inline double frobenius_norm_sq(const SparseTensor3& t) { return t.frobenius_norm_sq(); }

/// Matricized tensor times Khatri-Rao product for `mode` (0, 1 or 2):
/// M(i,r) = sum over entries at row i of value * prod of the other factors' row r.
/// Throws std::invalid_argument on dimension mismatch.
Matrix mttkrp(const SparseTensor3& t, const std::array<Matrix, 3>& factors, std::size_t mode);
Matrix mttkrp(const SparseTensor3& t, const CpModel& model, std::size_t mode);

/// F^T F.
Matrix gram(const Matrix& f);
/// Element-wise product of two equally shaped Gram blocks.
Matrix hadamard_grams(const Matrix& g1, const Matrix& g2);

double reconstruct_value(const CpModel& model, std::size_t i, std::size_t j, std::size_t k);

/// ||X - D||_F^2 + lambda * (sum A + sum B + sum C), evaluated without densifying:
/// ||X||^2 - 2<X, D> + 1^T (A^T A * B^T B * C^T C) 1.
double objective(const SparseTensor3& t, const CpModel& model, double lambda);
double objective(const SparseTensor3& t, const std::array<Matrix, 3>& factors, double lambda);

/// Text format: `dims I J K` then `i j k value` lines; `#` starts a comment.
SparseTensor3 read_tensor(std::istream& in);
SparseTensor3 read_tensor_file(const std::string& path);
void write_tensor(std::ostream& out, const SparseTensor3& t);
void write_tensor_file(const std::string& path, const SparseTensor3& t);

}  // namespace recten

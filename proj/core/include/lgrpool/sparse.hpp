#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace lgrpool {

using Matrix = Eigen::MatrixXd;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted within each row.
///
/// Used for graph adjacencies, which are constants with respect to
/// differentiation; only sparse-times-dense products are supported.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Builds from unordered triplets. Duplicate coordinates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  // Value at (row, col); zero when not stored.
  double coeff(std::size_t row, std::size_t col) const;

  Matrix multiply(const Matrix& dense) const;
  // this^T * dense, without materializing the transpose.
  Matrix transpose_multiply(const Matrix& dense) const;
  Matrix to_dense() const;

  bool is_symmetric() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

}  // namespace lgrpool

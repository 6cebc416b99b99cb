#include "lgrpool/sparse.hpp"

#include <algorithm>

#include "lgrpool/error.hpp"

namespace lgrpool {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeMismatch("sparse triplet (" + std::to_string(t.row) + ", " +
                          std::to_string(t.col) + ") outside " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });

  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_.assign(rows + 1, 0);
  // Merge duplicates while filling rows in order.
  std::size_t prev_row = rows;
  std::size_t prev_col = cols;
  std::vector<std::size_t> counts(rows, 0);
  for (const auto& t : triplets) {
    if (t.row == prev_row && t.col == prev_col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_indices_.push_back(t.col);
    m.values_.push_back(t.value);
    ++counts[t.row];
    prev_row = t.row;
    prev_col = t.col;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    m.row_offsets_[r + 1] = m.row_offsets_[r] + counts[r];
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(std::size_t row, std::size_t col) const {
  auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_.at(row));
  auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_.at(row + 1));
  auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  if (static_cast<std::size_t>(dense.rows()) != cols_) {
    throw ShapeMismatch("spmm: sparse " + std::to_string(rows_) + "x" +
                        std::to_string(cols_) + " times dense " +
                        std::to_string(dense.rows()) + "x" +
                        std::to_string(dense.cols()));
  }
  // Column-outer so both operands are walked contiguously (column-major).
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), dense.cols());
  for (Eigen::Index j = 0; j < dense.cols(); ++j) {
    const double* in = dense.col(j).data();
    double* dst = out.col(j).data();
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
        acc += values_[p] * in[col_indices_[p]];
      }
      dst[r] = acc;
    }
  }
  return out;
}

Matrix SparseMatrix::transpose_multiply(const Matrix& dense) const {
  if (static_cast<std::size_t>(dense.rows()) != rows_) {
    throw ShapeMismatch("spmm transpose: sparse " + std::to_string(rows_) +
                        "x" + std::to_string(cols_) + " against dense " +
                        std::to_string(dense.rows()) + "x" +
                        std::to_string(dense.cols()));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols_), dense.cols());
  for (Eigen::Index j = 0; j < dense.cols(); ++j) {
    const double* in = dense.col(j).data();
    double* dst = out.col(j).data();
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
        dst[col_indices_[p]] += values_[p] * in[r];
      }
    }
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_),
                            static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      out(static_cast<Eigen::Index>(r),
          static_cast<Eigen::Index>(col_indices_[p])) = values_[p];
    }
  }
  return out;
}

bool SparseMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      if (coeff(col_indices_[p], r) != values_[p]) return false;
    }
  }
  return true;
}

}  // namespace lgrpool

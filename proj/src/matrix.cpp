#include "srgf/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace srgf {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("Matrix: value count " + std::to_string(values_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_string(a) + " x " + shape_string(b));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape_string(a) + " x " + shape_string(b) + "^T");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseMatrix: entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                       ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(t.weight)) throw std::invalid_argument("SparseMatrix: non-finite weight");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix s(rows, cols);
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      s.weights_.back() += t.weight;
      continue;
    }
    s.col_idx_.push_back(t.col);
    s.weights_.push_back(t.weight);
    ++s.row_ptr_[t.row + 1];
  }
  for (std::size_t r = 1; r <= rows; ++r) s.row_ptr_[r] += s.row_ptr_[r - 1];
  return s;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

SparseMatrix SparseMatrix::from_dense(const Matrix& m) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) t.push_back({r, c, m(r, c)});
  return from_triplets(m.rows(), m.cols(), std::move(t));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return 0.0;
  return weights_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Matrix SparseMatrix::to_dense() const {
  Matrix m(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) m(r, col_idx_[k]) = weights_[k];
  return m;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({col_idx_[k], r, weights_[k]});
  return from_triplets(cols_, rows_, std::move(t));
}

SparseMatrix SparseMatrix::block(std::size_t begin, std::size_t count, std::size_t col_begin,
                                 std::size_t col_count) const {
  if (begin + count > rows_ || col_begin + col_count > cols_) throw ShapeError("SparseMatrix::block out of range");
  std::vector<Triplet> t;
  for (std::size_t r = begin; r < begin + count; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t c = col_idx_[k];
      if (c >= col_begin && c < col_begin + col_count) t.push_back({r - begin, c - col_begin, weights_[k]});
    }
  }
  return from_triplets(count, col_count, std::move(t));
}

SparseMatrix SparseMatrix::row_normalized() const {
  SparseMatrix out = *this;
  for (std::size_t r = 0; r < rows_; ++r) {
    double total = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) total += weights_[k];
    if (total == 0.0) continue;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.weights_[k] = weights_[k] / total;
  }
  return out;
}

Matrix spmm(const SparseMatrix& s, const Matrix& d) {
  if (s.cols() != d.rows()) {
    throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + " x " +
                     shape_string(d));
  }
  Matrix out(s.rows(), d.cols());
  const auto cols = s.col_idx();
  const auto w = s.weights();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto orow = out.row(r);
    for (std::size_t k = s.row_begin(r); k < s.row_end(r); ++k) {
      auto drow = d.row(cols[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) orow[j] += w[k] * drow[j];
    }
  }
  return out;
}

Matrix spmm_transposed(const SparseMatrix& s, const Matrix& d) {
  if (s.rows() != d.rows()) {
    throw ShapeError("spmm_transposed: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     "^T x " + shape_string(d));
  }
  Matrix out(s.cols(), d.cols());
  const auto cols = s.col_idx();
  const auto w = s.weights();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto drow = d.row(r);
    for (std::size_t k = s.row_begin(r); k < s.row_end(r); ++k) {
      auto orow = out.row(cols[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) orow[j] += w[k] * drow[j];
    }
  }
  return out;
}

}  // namespace srgf

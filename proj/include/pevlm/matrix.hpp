#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace pevlm {

// Dense row-major matrix. float is the working precision; double is the
// oracle / high-precision mode.
template <typename Real>
class MatrixT {
 public:
  MatrixT() = default;
  MatrixT(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Real(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  Real& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Real* row(std::size_t r) { return data_.data() + r * cols_; }
  const Real* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::span<Real> row_span(std::size_t r) { return {row(r), cols_}; }
  std::span<const Real> row_span(std::size_t r) const { return {row(r), cols_}; }

  std::vector<Real>& data() { return data_; }
  const std::vector<Real>& data() const { return data_; }

  // Appends a row; used by the KV cache during decode.
  void append_row(std::span<const Real> values) {
    if (cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw std::invalid_argument("append_row: width mismatch");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool operator==(const MatrixT& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

using Matrix = MatrixT<float>;
using Matrix64 = MatrixT<double>;

template <typename Real>
void require_shape(const MatrixT<Real>& m, std::size_t rows, std::size_t cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

template <typename Real>
void require_finite(const MatrixT<Real>& m, const char* what) {
  if (!m.all_finite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

// Largest absolute element-wise difference; shapes must agree.
template <typename A, typename B>
double max_abs_diff(const MatrixT<A>& a, const MatrixT<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    double d = std::fabs(static_cast<double>(a.data()[i]) -
                         static_cast<double>(b.data()[i]));
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace pevlm

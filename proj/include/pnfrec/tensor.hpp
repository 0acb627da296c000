#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pnfrec/errors.hpp"

namespace pnfrec {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor. Rank is dynamic but every operation in this
// library works on rank-1 vectors or rank-2 matrices; scalars are
// represented as shape {1}.
template <typename Real>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), Real(0)) {}

  Tensor(std::vector<std::size_t> shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_to_string(shape_));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor scalar(Real v) { return Tensor({1}, {v}); }

  static Tensor row_vector(std::vector<Real> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    std::size_t m = rows.size();
    std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<Real> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw DimensionError("ragged row initializer");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::size_t rows() const {
    return shape_.empty() ? 0 : shape_[0];
  }
  std::size_t cols() const {
    return shape_.size() == 2 ? shape_[1] : (shape_.size() == 1 ? 1 : 0);
  }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  Real operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }

  Real* row(std::size_t r) { return data_.data() + r * shape_[1]; }
  const Real* row(std::size_t r) const { return data_.data() + r * shape_[1]; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<Other>(data_[i]);
    }
    return Tensor<Other>(shape_, std::move(out));
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw DimensionError("zero dimension in shape " + shape_to_string(shape));
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<Real> data_;
};

template <typename Real>
void require_finite(const Tensor<Real>& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite values in ") + what);
  }
}

template <typename Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes disagree: " +
                         shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
}

template <typename Real>
void require_matrix(const Tensor<Real>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_to_string(t.shape()));
  }
}

namespace lin {

// c (m x n) += a (m x k) * b (k x n)
template <typename Real>
void gemm_nn_acc(Real* c, const Real* a, const Real* b, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = a + i * k;
    Real* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = ai[p];
      const Real* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c (m x n) += a (m x k) * b^T, where b is (n x k)
template <typename Real>
void gemm_nt_acc(Real* c, const Real* a, const Real* b, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = a + i * k;
    Real* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* bj = b + j * k;
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c (k x n) += a^T * b, where a is (m x k) and b is (m x n)
template <typename Real>
void gemm_tn_acc(Real* c, const Real* a, const Real* b, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = a + i * k;
    const Real* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = ai[p];
      Real* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace lin
}  // namespace pnfrec

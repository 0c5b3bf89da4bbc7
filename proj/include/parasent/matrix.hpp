#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace parasent {

// Dense row-major matrix. Vectors are stored as (n x 1) matrices.
template <class T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const BasicMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  template <class U>
  BasicMatrix<U> cast() const {
    BasicMatrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const BasicMatrix& a, const BasicMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;

inline std::string shape_string(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// y += A x, accumulating each dot product in double.
template <class T>
void gemv_acc(const BasicMatrix<T>& a, std::span<const T> x, std::span<T> y) {
  assert(x.size() == a.cols() && y.size() == a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* row = a.data() + r * a.cols();
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) acc += double(row[c]) * double(x[c]);
    y[r] = static_cast<T>(double(y[r]) + acc);
  }
}

// x += A^T y.
template <class T>
void gemv_t_acc(const BasicMatrix<T>& a, std::span<const T> y, std::span<T> x) {
  assert(y.size() == a.rows() && x.size() == a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* row = a.data() + r * a.cols();
    const T yr = y[r];
    if (yr == T{0}) continue;
    for (std::size_t c = 0; c < a.cols(); ++c) x[c] += row[c] * yr;
  }
}

// A += u v^T.
template <class T>
void outer_acc(std::span<const T> u, std::span<const T> v, BasicMatrix<T>& a) {
  assert(u.size() == a.rows() && v.size() == a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T ur = u[r];
    if (ur == T{0}) continue;
    T* row = a.data() + r * a.cols();
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += ur * v[c];
  }
}

template <class T>
double dot(std::span<const T> a, std::span<const T> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

}  // namespace parasent

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fxprof {

/// Raised whenever operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace grad {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Dense row-major matrix. Vectors are stored as single-column tensors.
/// Storage starts on the widest SIMD boundary: Eigen peels unaligned heads
/// differently, so malloc alignment would otherwise change rounding from run
/// to run.
template <typename T>
class Tensor2 {
 public:
  using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, const std::vector<T>& data)
      : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
    check_length();
  }
  Tensor2(std::size_t rows, std::size_t cols, std::initializer_list<T> data)
      : rows_(rows), cols_(cols), data_(data) {
    check_length();
  }
  Tensor2(std::size_t rows, std::size_t cols, Storage data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_length();
  }

  static Tensor2 column(const std::vector<T>& values) { return Tensor2(values.size(), 1, values); }
  static Tensor2 row(const std::vector<T>& values) { return Tensor2(1, values.size(), values); }
  static Tensor2 identity(std::size_t n) {
    Tensor2 t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = T{1};
    return t;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  Storage& storage() noexcept { return data_; }
  const Storage& storage() const noexcept { return data_; }
  std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

  std::span<T> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  MatrixMap<T> matrix() { return MatrixMap<T>(data_.data(), rows_, cols_); }
  ConstMatrixMap<T> matrix() const { return ConstMatrixMap<T>(data_.data(), rows_, cols_); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor2& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  template <typename U>
  Tensor2<U> cast() const {
    Tensor2<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor2& a, const Tensor2& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  void check_length() const {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Storage data_;
};

using Tensor2f = Tensor2<float>;
using Tensor2d = Tensor2<double>;

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
std::string shape_str(const Tensor2<T>& t) {
  return shape_str(t.rows(), t.cols());
}

}  // namespace grad
}  // namespace fxprof

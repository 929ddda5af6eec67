// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors and the handful of kernels everything else is built
// from: reshape, permute, tensordot, matmul and truncated SVD.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mpogpt/errors.hpp"

namespace mpogpt {

using Shape = std::vector<std::size_t>;
using Axes = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);
Axes inverse_permutation(const Axes& axes);

template <typename T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "Tensor supports f32 and f64 only");

 public:
  using value_type = T;

  /// Rank-0 tensor holding 0.
  Tensor() : data_(1, T{0}) {}
  /// Zero-filled tensor.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
  static Tensor filled(Shape shape, T value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  T at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
  T& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

  /// Value of a single-element tensor.
  T item() const;

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
struct SvdResult {
  Tensor<T> u;            // m x r
  std::vector<double> s;  // r values, non-increasing
  Tensor<T> vt;           // r x n
  double discarded_sq = 0.0;
};

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape new_shape);

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const Axes& axes);

/// Contracts `a_axes` of a with `b_axes` of b pairwise. The result carries the
/// free axes of a followed by the free axes of b.
template <typename T>
Tensor<T> tensordot(const Tensor<T>& a, const Tensor<T>& b, const Axes& a_axes, const Axes& b_axes);

/// Rank-2 product.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& m);

/// Kronecker product of two matrices.
template <typename T>
Tensor<T> kron(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> identity(std::size_t n);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> operator*(T scale, const Tensor<T>& a);

/// Best rank-r approximation with r = min(max_rank, rows, cols). Computed in
/// f64 regardless of T. Each left singular vector is signed so that its
/// largest-magnitude component is positive.
template <typename T>
SvdResult<T> truncated_svd(const Tensor<T>& m, std::size_t max_rank);

template <typename T>
double frobenius_norm(const Tensor<T>& t);

/// ||w - w_hat||_F / ||w||_F.
template <typename T>
double relative_error(const Tensor<T>& w, const Tensor<T>& w_hat);

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
bool all_finite(const Tensor<T>& t);

template <typename T>
Tensor<T> randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);

namespace kernels {

/// C = alpha * op(A) * op(B) + beta * C on row-major buffers, where op(A) is
/// m x k and op(B) is k x n. A transposed operand is stored as its transpose.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

}  // namespace kernels

}  // namespace mpogpt

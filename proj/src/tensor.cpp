// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mpogpt {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Axes inverse_permutation(const Axes& axes) {
  Axes inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inv.at(axes[i]) = i;
  return inv;
}

namespace {

void check_extents(const Shape& shape) {
  for (auto e : shape)
    if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
}

void check_permutation(const Axes& axes, std::size_t rank) {
  if (axes.size() != rank) throw ShapeError("permutation length does not match rank");
  std::vector<bool> seen(rank, false);
  for (auto a : axes) {
    if (a >= rank || seen[a]) throw ShapeError("invalid permutation");
    seen[a] = true;
  }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), T{0});
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_size(shape_) != data_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
std::size_t Tensor<T>::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

template <typename T>
T Tensor<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

template <typename T>
std::size_t Tensor<T>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank mismatch");
  std::size_t off = 0;
  std::size_t k = 0;
  for (auto i : index) {
    if (i >= shape_[k]) throw ShapeError("index out of range");
    off = off * shape_[k++] + i;
  }
  return off;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape new_shape) {
  if (shape_size(new_shape) != t.size())
    throw ShapeError("cannot reshape " + shape_str(t.shape()) + " to " + shape_str(new_shape));
  return Tensor<T>(std::move(new_shape), t.values());
}

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const Axes& axes) {
  const auto rank = t.rank();
  check_permutation(axes, rank);
  bool identity = true;
  for (std::size_t i = 0; i < rank; ++i) identity = identity && axes[i] == i;
  if (identity) return t;

  const auto& in_shape = t.shape();
  Shape out_shape(rank);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  std::vector<std::size_t> stride(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    out_shape[k] = in_shape[axes[k]];
    stride[k] = in_strides[axes[k]];
  }

  Tensor<T> out(out_shape);
  auto src = t.data();
  auto dst = out.data();
  // Innermost output axis handled as a strided run.
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t inner_stride = stride[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src_off = 0;
  for (std::size_t o = 0; o < dst.size(); o += inner) {
    for (std::size_t j = 0; j < inner; ++j) dst[o + j] = src[src_off + j * inner_stride];
    for (std::size_t k = rank - 1; k-- > 0;) {
      src_off += stride[k];
      if (++idx[k] < out_shape[k]) break;
      src_off -= stride[k] * out_shape[k];
      idx[k] = 0;
    }
  }
  return out;
}

template <typename T>
Tensor<T> tensordot(const Tensor<T>& a, const Tensor<T>& b, const Axes& a_axes, const Axes& b_axes) {
  if (a_axes.size() != b_axes.size()) throw ShapeError("tensordot: axis lists differ in length");
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  std::size_t contracted = 1;
  for (std::size_t i = 0; i < a_axes.size(); ++i) {
    const auto ax = a_axes[i], bx = b_axes[i];
    if (ax >= a.rank() || bx >= b.rank() || a_used[ax] || b_used[bx])
      throw ShapeError("tensordot: invalid contraction axes");
    if (a.shape()[ax] != b.shape()[bx])
      throw ShapeError("tensordot: extent mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    a_used[ax] = b_used[bx] = true;
    contracted *= a.shape()[ax];
  }

  Axes a_perm, b_perm;
  Shape out_shape;
  std::size_t m = 1, n = 1;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (!a_used[i]) {
      a_perm.push_back(i);
      out_shape.push_back(a.shape()[i]);
      m *= a.shape()[i];
    }
  a_perm.insert(a_perm.end(), a_axes.begin(), a_axes.end());
  b_perm.assign(b_axes.begin(), b_axes.end());
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (!b_used[i]) {
      b_perm.push_back(i);
      out_shape.push_back(b.shape()[i]);
      n *= b.shape()[i];
    }

  const Tensor<T> ap = permute(a, a_perm);
  const Tensor<T> bp = permute(b, b_perm);
  Tensor<T> out(out_shape);
  kernels::gemm<T>(false, false, m, n, contracted, T{1}, ap.data().data(), bp.data().data(), T{0},
                   out.data().data());
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects matrices");
  return tensordot(a, b, {1}, {0});
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& m) {
  if (m.rank() != 2) throw ShapeError("transpose expects a matrix");
  return permute(m, {1, 0});
}

template <typename T>
Tensor<T> kron(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("kron expects matrices");
  const auto ar = a.shape()[0], ac = a.shape()[1], br = b.shape()[0], bc = b.shape()[1];
  Tensor<T> out({ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j)
      for (std::size_t k = 0; k < br; ++k)
        for (std::size_t l = 0; l < bc; ++l)
          out.at({i * br + k, j * bc + l}) = a.at({i, j}) * b.at({k, l});
  return out;
}

template <typename T>
Tensor<T> identity(std::size_t n) {
  Tensor<T> out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at({i, i}) = T{1};
  return out;
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

template <typename T>
Tensor<T> operator*(T scale, const Tensor<T>& a) {
  Tensor<T> out = a;
  for (auto& v : out.data()) v *= scale;
  return out;
}

template <typename T>
SvdResult<T> truncated_svd(const Tensor<T>& m, std::size_t max_rank) {
  if (m.rank() != 2) throw ShapeError("truncated_svd expects a matrix, got " + shape_str(m.shape()));
  if (max_rank == 0) throw UsageError("truncated_svd: max_rank must be positive");
  if (!all_finite(m)) throw NumericError("truncated_svd: non-finite entries");

  const auto rows = m.shape()[0], cols = m.shape()[1];
  RowMat<double> a(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) a.data()[i] = static_cast<double>(m[i]);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd v = svd.matrixV();

  const std::size_t full = std::min(rows, cols);
  const std::size_t r = std::min(max_rank, full);

  SvdResult<T> out;
  out.u = Tensor<T>({rows, r});
  out.vt = Tensor<T>({r, cols});
  out.s.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    Eigen::Index pivot = 0;
    u.col(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff(&pivot);
    const double sign = u(pivot, static_cast<Eigen::Index>(k)) < 0 ? -1.0 : 1.0;
    out.s[k] = sv(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < rows; ++i)
      out.u.at({i, k}) = static_cast<T>(sign * u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    for (std::size_t j = 0; j < cols; ++j)
      out.vt.at({k, j}) = static_cast<T>(sign * v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
  }
  for (std::size_t k = r; k < full; ++k) out.discarded_sq += sv(static_cast<Eigen::Index>(k)) * sv(static_cast<Eigen::Index>(k));
  return out;
}

template <typename T>
double frobenius_norm(const Tensor<T>& t) {
  double acc = 0.0;
  for (auto v : t.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

template <typename T>
double relative_error(const Tensor<T>& w, const Tensor<T>& w_hat) {
  if (w.shape() != w_hat.shape()) throw ShapeError("relative_error: shape mismatch");
  const double ref = frobenius_norm(w);
  if (ref == 0.0) throw DomainError("relative_error: reference has zero norm");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = static_cast<double>(w[i]) - static_cast<double>(w_hat[i]);
    acc += d * d;
  }
  return std::sqrt(acc) / ref;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> randn(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor<T> out(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : out.data()) v = static_cast<T>(dist(rng));
  return out;
}

namespace kernels {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  using Map = Eigen::Map<const RowMat<T>>;
  const auto em = static_cast<Eigen::Index>(m), en = static_cast<Eigen::Index>(n),
             ek = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMat<T>> cm(c, em, en);
  if (beta == T{0})
    cm.setZero();
  else if (beta != T{1})
    cm *= beta;
  if (!trans_a && !trans_b)
    cm.noalias() += alpha * Map(a, em, ek) * Map(b, ek, en);
  else if (trans_a && !trans_b)
    cm.noalias() += alpha * Map(a, ek, em).transpose() * Map(b, ek, en);
  else if (!trans_a && trans_b)
    cm.noalias() += alpha * Map(a, em, ek) * Map(b, en, ek).transpose();
  else
    cm.noalias() += alpha * Map(a, ek, em).transpose() * Map(b, en, ek).transpose();
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*, const float*,
                          float, float*);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double, const double*,
                           const double*, double, double*);

}  // namespace kernels

#define MPOGPT_INSTANTIATE_TENSOR(T)                                                          \
  template class Tensor<T>;                                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> permute(const Tensor<T>&, const Axes&);                                  \
  template Tensor<T> tensordot(const Tensor<T>&, const Tensor<T>&, const Axes&, const Axes&); \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> kron(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> identity<T>(std::size_t);                                                \
  template Tensor<T> operator+(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> operator-(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> operator*(T, const Tensor<T>&);                                          \
  template SvdResult<T> truncated_svd(const Tensor<T>&, std::size_t);                         \
  template double frobenius_norm(const Tensor<T>&);                                           \
  template double relative_error(const Tensor<T>&, const Tensor<T>&);                         \
  template double max_abs_diff(const Tensor<T>&, const Tensor<T>&);                           \
  template bool all_finite(const Tensor<T>&);                                                 \
  template Tensor<T> randn<T>(Shape, std::mt19937_64&, double);

MPOGPT_INSTANTIATE_TENSOR(float)
MPOGPT_INSTANTIATE_TENSOR(double)

}  // namespace mpogpt

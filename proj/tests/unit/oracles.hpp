// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the tests. Nothing here calls
// into the library's numerical kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mpogpt/tensor.hpp"

namespace oracle {

using mpogpt::Shape;
using mpogpt::TensorD;

inline std::vector<std::size_t> strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * shape[k];
  return s;
}

inline std::vector<std::size_t> unravel(std::size_t flat, const Shape& shape) {
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t k = shape.size(); k-- > 0;) {
    idx[k] = flat % shape[k];
    flat /= shape[k];
  }
  return idx;
}

inline std::size_t ravel(const std::vector<std::size_t>& idx, const Shape& shape) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) flat = flat * shape[k] + idx[k];
  return flat;
}

inline TensorD permute(const TensorD& t, const std::vector<std::size_t>& axes) {
  Shape out_shape;
  for (auto a : axes) out_shape.push_back(t.shape()[a]);
  TensorD out(out_shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto src = unravel(i, t.shape());
    std::vector<std::size_t> dst(axes.size());
    for (std::size_t k = 0; k < axes.size(); ++k) dst[k] = src[axes[k]];
    out[ravel(dst, out_shape)] = t[i];
  }
  return out;
}

/// Brute-force contraction over every index combination.
inline TensorD tensordot(const TensorD& a, const TensorD& b, const std::vector<std::size_t>& aa,
                         const std::vector<std::size_t>& ba) {
  std::vector<std::size_t> a_free, b_free;
  for (std::size_t k = 0; k < a.rank(); ++k) {
    if (std::find(aa.begin(), aa.end(), k) == aa.end()) a_free.push_back(k);
  }
  for (std::size_t k = 0; k < b.rank(); ++k) {
    if (std::find(ba.begin(), ba.end(), k) == ba.end()) b_free.push_back(k);
  }
  Shape out_shape, c_shape;
  for (auto k : a_free) out_shape.push_back(a.shape()[k]);
  for (auto k : b_free) out_shape.push_back(b.shape()[k]);
  for (auto k : aa) c_shape.push_back(a.shape()[k]);
  std::size_t n_out = 1, n_c = 1;
  for (auto e : out_shape) n_out *= e;
  for (auto e : c_shape) n_c *= e;
  TensorD out(out_shape);
  for (std::size_t o = 0; o < n_out; ++o) {
    auto oi = unravel(o, out_shape);
    double acc = 0.0;
    for (std::size_t c = 0; c < n_c; ++c) {
      auto ci = unravel(c, c_shape);
      std::vector<std::size_t> ia(a.rank()), ib(b.rank());
      for (std::size_t k = 0; k < a_free.size(); ++k) ia[a_free[k]] = oi[k];
      for (std::size_t k = 0; k < b_free.size(); ++k) ib[b_free[k]] = oi[a_free.size() + k];
      for (std::size_t k = 0; k < aa.size(); ++k) {
        ia[aa[k]] = ci[k];
        ib[ba[k]] = ci[k];
      }
      acc += a[ravel(ia, a.shape())] * b[ravel(ib, b.shape())];
    }
    out[o] = acc;
  }
  return out;
}

inline TensorD matmul(const TensorD& a, const TensorD& b) {
  std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  TensorD c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
  return c;
}

inline TensorD transpose(const TensorD& a) { return permute(a, {1, 0}); }

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> symmetric_eigenvalues(TensorD a) {
  const std::size_t n = a.shape()[0];
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Squared singular values of m (descending) from the eigenvalues of the
/// smaller Gram matrix.
inline std::vector<double> squared_singular_values(const TensorD& m) {
  bool tall = m.shape()[0] >= m.shape()[1];
  TensorD gram = tall ? matmul(transpose(m), m) : matmul(m, transpose(m));
  auto ev = symmetric_eigenvalues(gram);
  for (auto& e : ev) e = std::max(e, 0.0);
  return ev;
}

/// Optimal rank-r squared Frobenius error: the tail sum of squared singular values.
inline double tail_energy(const TensorD& m, std::size_t r) {
  auto s2 = squared_singular_values(m);
  double tail = 0.0;
  for (std::size_t i = r; i < s2.size(); ++i) tail += s2[i];
  return tail;
}

inline TensorD random(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  TensorD t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

inline double frobenius(const TensorD& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
  return std::sqrt(s);
}

inline double max_abs(const TensorD& a, const TensorD& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_diff(const TensorD& a, const TensorD& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  double n = frobenius(a);
  return n > 0 ? std::sqrt(d) / n : std::sqrt(d);
}

/// Central-difference gradient of a scalar function of a tensor.
inline TensorD numeric_gradient(const std::function<double(const TensorD&)>& f, const TensorD& x, double h = 1e-5) {
  TensorD g(x.shape());
  TensorD xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Dense matrix of an MPO chain by explicit summation over all bond indices.
inline TensorD mpo_to_matrix(const std::vector<TensorD>& cores) {
  std::size_t L = cores.size();
  std::vector<std::size_t> dout(L), din(L);
  std::size_t out = 1, in = 1;
  for (std::size_t l = 0; l < L; ++l) {
    dout[l] = cores[l].shape()[1];
    din[l] = cores[l].shape()[2];
    out *= dout[l];
    in *= din[l];
  }
  TensorD w({out, in});
  for (std::size_t r = 0; r < out; ++r) {
    auto ri = unravel(r, Shape(dout.begin(), dout.end()));
    for (std::size_t c = 0; c < in; ++c) {
      auto ci = unravel(c, Shape(din.begin(), din.end()));
      // Row vector of the running product over sites.
      std::vector<double> v{1.0};
      for (std::size_t l = 0; l < L; ++l) {
        const auto& a = cores[l];
        std::size_t chi_l = a.shape()[0], o = a.shape()[1], i = a.shape()[2], chi_r = a.shape()[3];
        std::vector<double> next(chi_r, 0.0);
        for (std::size_t p = 0; p < chi_l; ++p) {
          for (std::size_t q = 0; q < chi_r; ++q) {
            next[q] += v[p] * a[((p * o + ri[l]) * i + ci[l]) * chi_r + q];
          }
        }
        v = std::move(next);
      }
      w[r * in + c] = v[0];
    }
  }
  return w;
}

}  // namespace oracle

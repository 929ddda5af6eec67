// SPDX-License-Identifier: Apache-2.0
//
// Matrix Product Operator representation of a weight matrix.
//
// A matrix W (out x in) with out = prod(d_out) and in = prod(d_in) is stored as
// L cores, core l having shape (chi_{l-1}, d_out[l], d_in[l], chi_l) with
// chi_0 = chi_L = 1. Row index (i_1 .. i_L) and column index (j_1 .. j_L) are
// row-major multi-indices over d_out and d_in respectively; contracting the
// bond indices of the chain yields W[(i_1..i_L), (j_1..j_L)].
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mpogpt/autograd.hpp"
#include "mpogpt/tensor.hpp"

namespace mpogpt {

struct FactorizationPlan {
  std::vector<std::size_t> d_out;
  std::vector<std::size_t> d_in;
  std::size_t chi = 1;

  std::size_t sites() const noexcept { return d_out.size(); }
  std::size_t out() const;
  std::size_t in() const;

  /// Throws ShapeError unless d_out/d_in have equal nonzero length, entries >= 1
  /// and chi >= 1.
  void validate() const;
  /// Additionally checks the products against a concrete (out, in).
  void validate_for(std::size_t out, std::size_t in) const;

  bool operator==(const FactorizationPlan&) const = default;
};

/// Bond dimensions chi_0..chi_L after clipping each interior bond to
/// min(chi, chi_{l-1} * d_out[l] * d_in[l], prod of the remaining site dims).
std::vector<std::size_t> bond_dims(const FactorizationPlan& plan);

/// Exact number of core entries for the clipped bonds. Equals out*in for L = 1.
std::size_t param_count(const FactorizationPlan& plan);

/// Core entry standard deviation n_in^{-1/4} * chi^{-(L-1)/(2L)}.
double init_scale(const FactorizationPlan& plan, std::size_t n_in);

template <typename T>
struct MpoCores {
  std::vector<Tensor<T>> cores;

  std::size_t sites() const noexcept { return cores.size(); }
  std::vector<std::size_t> bond_dims() const;
  std::vector<std::size_t> d_out() const;
  std::vector<std::size_t> d_in() const;
  std::size_t out() const;
  std::size_t in() const;
  std::size_t param_count() const;

  /// Checks core ranks, boundary bonds and bond agreement between neighbours.
  void validate() const;
};

using MpoCoresF = MpoCores<float>;
using MpoCoresD = MpoCores<double>;

template <typename T>
struct TtSvdResult {
  MpoCores<T> cores;
  /// Sum of squared singular values dropped at each of the L-1 unfoldings.
  std::vector<double> discarded_sq;

  double total_discarded_sq() const;
};

/// (out, in) -> (d_out[0], d_in[0], d_out[1], d_in[1], ...).
template <typename T>
Tensor<T> interleave(const Tensor<T>& w, const FactorizationPlan& plan);

/// Inverse of interleave.
template <typename T>
Tensor<T> deinterleave(const Tensor<T>& t, const FactorizationPlan& plan);

/// Sequential unfold-and-truncate SVD sweep producing left-canonical cores.
/// Computed in f64 internally. A zero matrix yields zero cores with unit bonds.
template <typename T>
TtSvdResult<T> tt_svd(const Tensor<T>& w, const FactorizationPlan& plan);

/// Contracts the chain into the dense (out, in) matrix.
template <typename T>
Tensor<T> reconstruct(const MpoCores<T>& mpo);

/// Differentiable reconstruction through tensordot/reshape/permute.
template <typename T>
Var<T> reconstruct(std::span<const Var<T>> cores);

/// x (batch, in) -> x * W^T (batch, out), contracting the cores one site at a
/// time. Never forms the (out, in) matrix.
template <typename T>
Tensor<T> apply_direct(const MpoCores<T>& mpo, const Tensor<T>& x);

/// dLoss/dCore[site] from dLoss/dW via explicit left and right environments.
template <typename T>
Tensor<T> environment_gradient(const MpoCores<T>& mpo, const Tensor<T>& upstream, std::size_t site);

/// i.i.d. N(0, init_scale(plan, in)^2) cores with clipped bonds.
template <typename T>
MpoCores<T> random_init(const FactorizationPlan& plan, std::uint64_t seed);

/// Linear layer with an MPO weight and a dense bias: y = x W^T + b.
template <typename T>
struct MpoLinear {
  FactorizationPlan plan;
  MpoCores<T> cores;
  std::optional<Tensor<T>> bias;

  /// Forward on plain tensors; x is (batch, in).
  Tensor<T> forward(const Tensor<T>& x, bool direct = false) const;
  std::size_t param_count() const { return cores.param_count() + (bias ? bias->size() : 0); }
};

}  // namespace mpogpt

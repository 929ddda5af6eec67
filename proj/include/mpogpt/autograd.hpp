// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation. A Tape is rebuilt for every forward
// pass; Vars are cheap handles into it. Backward visits the recorded
// operations in exact reverse order and accumulates gradients additively.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mpogpt/tensor.hpp"

namespace mpogpt {

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kMul,
  kScale,
  kSum,
  kReshape,
  kPermute,
  kTensordot,
  kMatmul,
  kLinear,
  kEmbedding,
  kLayerNorm,
  kSoftmax,
  kRelu,
  kCrossEntropy,
};

const char* op_name(OpKind kind);

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  /// Null until backward reaches this Var.
  const Tensor<T>* grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Handed to a backward rule: read-only access to the forward values and
/// lazily allocated accumulation buffers for the inputs that need gradients.
template <typename T>
class GradSink {
 public:
  const Tensor<T>& input(std::size_t k) const;
  const Tensor<T>& output() const;
  bool wants(std::size_t k) const;
  std::span<T> grad(std::size_t k);

 private:
  friend class Tape<T>;
  GradSink(Tape<T>& tape, std::size_t node) : tape_(tape), node_(node) {}
  Tape<T>& tape_;
  std::size_t node_;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(const Tensor<T>& upstream, GradSink<T>& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Registers an operation. The output requires grad iff any input does; the
  /// backward rule is dropped otherwise.
  Var<T> record(OpKind kind, std::vector<Var<T>> inputs, Tensor<T> output, Backward backward);

  /// Populates grads of every requires_grad Var reachable from `loss`.
  void backward(const Var<T>& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }

 private:
  friend class Var<T>;
  friend class GradSink<T>;

  struct Node {
    Tensor<T> value;
    std::optional<Tensor<T>> grad;
    bool requires_grad = false;
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Backward backward;
  };

  std::deque<Node> nodes_;
};

// Differentiable operations. All operands must live on the same tape.

/// a + b, where b's shape equals a's or a trailing suffix of it (broadcast).
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);
template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T>
Var<T> permute(const Var<T>& a, const Axes& axes);
template <typename T>
Var<T> tensordot(const Var<T>& a, const Var<T>& b, const Axes& a_axes, const Axes& b_axes);

/// Batched product over the last two axes: (..., m, k) x (..., k, n). b may be
/// a plain matrix shared across the batch. With transpose_b, b is (..., n, k).
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_b = false);

/// x (..., in) times w (out, in) transposed, plus an optional bias (out).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const std::optional<Var<T>>& bias);

/// Rows of `table` (V, D) selected by ids; output shape is ids_shape + (D).
template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, const Shape& ids_shape);

template <typename T>
Var<T> layernorm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = 1e-5);

/// Softmax over the last axis. The causal variant adds -1e9 to entries whose
/// key index exceeds the query index (last two axes).
template <typename T>
Var<T> softmax(const Var<T>& x, bool causal);

template <typename T>
Var<T> relu(const Var<T>& x);

/// Mean over positions of -log softmax(logits)[target]; logits (..., V).
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets);

inline constexpr double kCausalMaskValue = -1e9;

struct GradCheckReport {
  double max_rel_deviation = 0.0;
  double max_abs_deviation = 0.0;
  std::size_t worst_index = 0;
  bool non_finite = false;
  bool passed = false;
};

/// Compares tape gradients of scalar f at x against central differences.
/// Elementwise deviation is |g - fd| / max(|g|, |fd|), treated as zero when
/// |g - fd| <= abs_floor.
GradCheckReport grad_check(const std::function<Var<double>(const Var<double>&)>& f, const TensorD& x,
                           double tolerance, double step = 1e-5, double abs_floor = 1e-8);

}  // namespace mpogpt

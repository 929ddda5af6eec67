// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpogpt {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute: return "permute";
    case OpKind::kTensordot: return "tensordot";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kLinear: return "linear";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kLayerNorm: return "layernorm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kRelu: return "relu";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

// ---- Var / GradSink / Tape ------------------------------------------------

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (!tape_) throw UsageError("Var is not attached to a tape");
  return tape_->nodes_.at(id_).value;
}

template <typename T>
bool Var<T>::requires_grad() const {
  if (!tape_) throw UsageError("Var is not attached to a tape");
  return tape_->nodes_.at(id_).requires_grad;
}

template <typename T>
const Tensor<T>* Var<T>::grad() const {
  if (!tape_) throw UsageError("Var is not attached to a tape");
  const auto& g = tape_->nodes_.at(id_).grad;
  return g ? &*g : nullptr;
}

template <typename T>
const Tensor<T>& GradSink<T>::input(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(k)].value;
}

template <typename T>
const Tensor<T>& GradSink<T>::output() const {
  return tape_.nodes_[node_].value;
}

template <typename T>
bool GradSink<T>::wants(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(k)].requires_grad;
}

template <typename T>
std::span<T> GradSink<T>::grad(std::size_t k) {
  auto& in = tape_.nodes_[tape_.nodes_[node_].inputs.at(k)];
  if (!in.grad) in.grad.emplace(in.value.shape());
  return in.grad->data();
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(OpKind kind, std::vector<Var<T>> inputs, Tensor<T> output, Backward backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(output);
  for (const auto& v : inputs) {
    if (v.tape() != this) throw UsageError(std::string("operands of ") + op_name(kind) + " belong to different tapes");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.tape() != this) throw UsageError("backward: loss belongs to a different tape");
  if (nodes_[loss.id()].value.size() != 1)
    throw UsageError("backward: loss must be scalar, got shape " + shape_str(nodes_[loss.id()].value.shape()));
  for (auto& n : nodes_) n.grad.reset();
  auto& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad = Tensor<T>::filled(root.value.shape(), T{1});
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.grad || !n.backward) continue;
    GradSink<T> sink(*this, id);
    n.backward(*n.grad, sink);
  }
}

// ---- helpers -----------------------------------------------------------------

namespace {

template <typename T>
Tape<T>* common_tape(std::initializer_list<const Var<T>*> vars, const char* op) {
  Tape<T>* tape = nullptr;
  for (const auto* v : vars) {
    if (!v->valid()) throw UsageError(std::string(op) + ": operand is not attached to a tape");
    if (tape && v->tape() != tape) throw UsageError(std::string(op) + ": operands belong to different tapes");
    tape = v->tape();
  }
  return tape;
}

template <typename T>
void axpy(std::span<T> dst, std::span<const T> src, T factor = T{1}) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

}  // namespace

// ---- elementwise ---------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto* tape = common_tape({&a, &b}, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_suffix(av.shape(), bv.shape()))
    throw ShapeError("add: cannot broadcast " + shape_str(bv.shape()) + " onto " + shape_str(av.shape()));
  Tensor<T> out = av;
  const std::size_t period = bv.size();
  auto o = out.data();
  auto bd = bv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i % period];
  return tape->record(OpKind::kAdd, {a, b}, std::move(out), [period](const Tensor<T>& g, GradSink<T>& s) {
    if (s.wants(0)) axpy<T>(s.grad(0), g.data());
    if (s.wants(1)) {
      auto gb = s.grad(1);
      auto gd = g.data();
      for (std::size_t i = 0; i < gd.size(); ++i) gb[i % period] += gd[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto* tape = common_tape({&a, &b}, "mul");
  if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return tape->record(OpKind::kMul, {a, b}, std::move(out), [](const Tensor<T>& g, GradSink<T>& s) {
    auto gd = g.data();
    if (s.wants(0)) {
      auto ga = s.grad(0);
      auto bv = s.input(1).data();
      for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i] * bv[i];
    }
    if (s.wants(1)) {
      auto gb = s.grad(1);
      auto av = s.input(0).data();
      for (std::size_t i = 0; i < gd.size(); ++i) gb[i] += gd[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  auto* tape = common_tape({&a}, "scale");
  Tensor<T> out = factor * a.value();
  return tape->record(OpKind::kScale, {a}, std::move(out), [factor](const Tensor<T>& g, GradSink<T>& s) {
    axpy<T>(s.grad(0), g.data(), factor);
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  auto* tape = common_tape({&a}, "sum");
  double acc = 0.0;
  for (auto v : a.value().data()) acc += v;
  return tape->record(OpKind::kSum, {a}, Tensor<T>::scalar(static_cast<T>(acc)),
                      [](const Tensor<T>& g, GradSink<T>& s) {
                        const T up = g[0];
                        for (auto& v : s.grad(0)) v += up;
                      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  auto* tape = common_tape({&x}, "relu");
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return tape->record(OpKind::kRelu, {x}, std::move(out), [](const Tensor<T>& g, GradSink<T>& s) {
    auto gx = s.grad(0);
    auto xv = s.input(0).data();
    auto gd = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i)
      if (xv[i] > T{0}) gx[i] += gd[i];
  });
}

// ---- shape ---------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  auto* tape = common_tape({&a}, "reshape");
  Tensor<T> out = reshape(a.value(), std::move(shape));
  return tape->record(OpKind::kReshape, {a}, std::move(out), [](const Tensor<T>& g, GradSink<T>& s) {
    axpy<T>(s.grad(0), g.data());
  });
}

template <typename T>
Var<T> permute(const Var<T>& a, const Axes& axes) {
  auto* tape = common_tape({&a}, "permute");
  Tensor<T> out = permute(a.value(), axes);
  return tape->record(OpKind::kPermute, {a}, std::move(out),
                      [inv = inverse_permutation(axes)](const Tensor<T>& g, GradSink<T>& s) {
                        axpy<T>(s.grad(0), permute(g, inv).data());
                      });
}

template <typename T>
Var<T> tensordot(const Var<T>& a, const Var<T>& b, const Axes& a_axes, const Axes& b_axes) {
  auto* tape = common_tape({&a, &b}, "tensordot");
  Tensor<T> out = tensordot(a.value(), b.value(), a_axes, b_axes);
  const std::size_t ra = a.value().rank(), rb = b.value().rank();
  // Free-axis positions in the output.
  std::vector<bool> a_used(ra, false), b_used(rb, false);
  for (auto x : a_axes) a_used[x] = true;
  for (auto x : b_axes) b_used[x] = true;
  Axes a_free, b_free;
  for (std::size_t i = 0; i < ra; ++i)
    if (!a_used[i]) a_free.push_back(i);
  for (std::size_t i = 0; i < rb; ++i)
    if (!b_used[i]) b_free.push_back(i);
  Axes sorted_a(a_axes), sorted_b(b_axes);
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  auto position = [](const Axes& list, std::size_t axis) {
    return static_cast<std::size_t>(std::find(list.begin(), list.end(), axis) - list.begin());
  };

  return tape->record(
      OpKind::kTensordot, {a, b}, std::move(out),
      [=](const Tensor<T>& g, GradSink<T>& s) {
        const std::size_t na = a_free.size(), nb = b_free.size();
        Axes g_a_axes(nb), g_b_axes(na);  // g axes holding b's / a's free indices
        for (std::size_t i = 0; i < nb; ++i) g_a_axes[i] = na + i;
        for (std::size_t i = 0; i < na; ++i) g_b_axes[i] = i;
        if (s.wants(0)) {
          // dA[a_free..., a_axes...] = g[a_free, b_free] . B[b_axes, b_free]
          // Remaining axes of B come back in ascending order; map them to A's axes.
          Tensor<T> d = tensordot(g, s.input(1), g_a_axes, b_free);
          Axes order(a_free);
          for (auto bx : sorted_b) order.push_back(a_axes[position(b_axes, bx)]);
          axpy<T>(s.grad(0), permute(d, inverse_permutation(order)).data());
        }
        if (s.wants(1)) {
          // dB[b_axes..., b_free...] = A[a_free, a_axes] . g[a_free, b_free]
          Tensor<T> d = tensordot(s.input(0), g, a_free, g_b_axes);
          Axes order;
          for (auto ax : sorted_a) order.push_back(b_axes[position(a_axes, ax)]);
          order.insert(order.end(), b_free.begin(), b_free.end());
          axpy<T>(s.grad(1), permute(d, inverse_permutation(order)).data());
        }
      });
}

// ---- products --------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_b) {
  auto* tape = common_tape({&a, &b}, "matmul");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) throw ShapeError("matmul: operands need rank >= 2");
  const bool shared_b = bs.size() == 2 && as.size() > 2;
  if (!shared_b && (as.size() != bs.size() || !std::equal(as.begin(), as.end() - 2, bs.begin())))
    throw ShapeError("matmul: batch dims differ " + shape_str(as) + " vs " + shape_str(bs));
  const std::size_t m = as[as.size() - 2], k = as.back();
  const std::size_t bk = transpose_b ? bs.back() : bs[bs.size() - 2];
  const std::size_t n = transpose_b ? bs[bs.size() - 2] : bs.back();
  if (bk != k) throw ShapeError("matmul: inner extents differ " + shape_str(as) + " vs " + shape_str(bs));
  const std::size_t batch = a.value().size() / (m * k);

  Shape os(as.begin(), as.end() - 1);
  os.push_back(n);
  Tensor<T> out(os);
  const T* ap = a.value().data().data();
  const T* bp = b.value().data().data();
  T* op = out.data().data();
  for (std::size_t i = 0; i < batch; ++i)
    kernels::gemm<T>(false, transpose_b, m, n, k, T{1}, ap + i * m * k, bp + (shared_b ? 0 : i * k * n), T{0},
                     op + i * m * n);

  return tape->record(OpKind::kMatmul, {a, b}, std::move(out),
                      [=](const Tensor<T>& g, GradSink<T>& s) {
                        const T* gp = g.data().data();
                        if (s.wants(0)) {
                          T* ga = s.grad(0).data();
                          const T* bv = s.input(1).data().data();
                          // dA = g . op(B)^T
                          for (std::size_t i = 0; i < batch; ++i)
                            kernels::gemm<T>(false, !transpose_b, m, k, n, T{1}, gp + i * m * n,
                                             bv + (shared_b ? 0 : i * k * n), T{1}, ga + i * m * k);
                        }
                        if (s.wants(1)) {
                          T* gb = s.grad(1).data();
                          const T* av = s.input(0).data().data();
                          for (std::size_t i = 0; i < batch; ++i) {
                            T* dst = gb + (shared_b ? 0 : i * k * n);
                            if (transpose_b)  // dB (n x k) = g^T . A
                              kernels::gemm<T>(true, false, n, k, m, T{1}, gp + i * m * n, av + i * m * k, T{1}, dst);
                            else  // dB (k x n) = A^T . g
                              kernels::gemm<T>(true, false, k, n, m, T{1}, av + i * m * k, gp + i * m * n, T{1}, dst);
                          }
                        }
                      });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const std::optional<Var<T>>& bias) {
  auto* tape = bias ? common_tape({&x, &w, &*bias}, "linear") : common_tape({&x, &w}, "linear");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.size() != 2 || xs.empty() || xs.back() != ws[1])
    throw ShapeError("linear: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
  const std::size_t out_f = ws[0], in_f = ws[1];
  if (bias && bias->shape() != Shape{out_f}) throw ShapeError("linear: bias must have shape (out)");
  const std::size_t rows = x.value().size() / in_f;

  Shape os = xs;
  os.back() = out_f;
  Tensor<T> out(os);
  T* op = out.data().data();
  if (bias) {
    auto bv = bias->value().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), op + r * out_f);
  }
  kernels::gemm<T>(false, true, rows, out_f, in_f, T{1}, x.value().data().data(), w.value().data().data(),
                   bias ? T{1} : T{0}, op);

  std::vector<Var<T>> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return tape->record(OpKind::kLinear, std::move(inputs), std::move(out),
                      [=](const Tensor<T>& g, GradSink<T>& s) {
                        const T* gp = g.data().data();
                        if (s.wants(0))
                          kernels::gemm<T>(false, false, rows, in_f, out_f, T{1}, gp, s.input(1).data().data(), T{1},
                                           s.grad(0).data());
                        if (s.wants(1))
                          kernels::gemm<T>(true, false, out_f, in_f, rows, T{1}, gp, s.input(0).data().data(), T{1},
                                           s.grad(1).data());
                        if (has_bias && s.wants(2)) {
                          auto gb = s.grad(2);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < out_f; ++j) gb[j] += gp[r * out_f + j];
                        }
                      });
}

// ---- model-specific ops ------------------------------------------------------------

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, const Shape& ids_shape) {
  auto* tape = common_tape({&table}, "embedding");
  if (table.shape().size() != 2) throw ShapeError("embedding: table must be (V, D)");
  if (shape_size(ids_shape) != ids.size()) throw ShapeError("embedding: ids do not match ids_shape");
  const std::size_t vocab = table.shape()[0], dim = table.shape()[1];
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw InputError("embedding: token id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
  Shape os = ids_shape;
  os.push_back(dim);
  Tensor<T> out(os);
  auto tv = table.value().data();
  auto o = out.data();
  for (std::size_t p = 0; p < ids.size(); ++p)
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[p]) * dim), dim,
                o.begin() + static_cast<std::ptrdiff_t>(p * dim));
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return tape->record(OpKind::kEmbedding, {table}, std::move(out),
                      [idv = std::move(idv), dim](const Tensor<T>& g, GradSink<T>& s) {
                        auto gt = s.grad(0);
                        auto gd = g.data();
                        for (std::size_t p = 0; p < idv.size(); ++p)
                          for (std::size_t j = 0; j < dim; ++j)
                            gt[static_cast<std::size_t>(idv[p]) * dim + j] += gd[p * dim + j];
                      });
}

template <typename T>
Var<T> layernorm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  auto* tape = common_tape({&x, &gain, &bias}, "layernorm");
  const std::size_t dim = x.shape().back();
  if (gain.shape() != Shape{dim} || bias.shape() != Shape{dim})
    throw ShapeError("layernorm: gain/bias must match the last axis");
  const std::size_t rows = x.value().size() / dim;
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.value().size());
  std::vector<T> rstd(rows);
  auto xv = x.value().data();
  auto gv = gain.value().data();
  auto bv = bias.value().data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * dim;
    double mean = 0.0;
    for (std::size_t j = 0; j < dim; ++j) mean += row[j];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t j = 0; j < dim; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(dim);
    const double inv = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(inv);
    for (std::size_t j = 0; j < dim; ++j) {
      const T h = static_cast<T>((row[j] - mean) * inv);
      xhat[r * dim + j] = h;
      o[r * dim + j] = h * gv[j] + bv[j];
    }
  }
  return tape->record(OpKind::kLayerNorm, {x, gain, bias}, std::move(out),
                      [xhat = std::move(xhat), rstd = std::move(rstd), dim, rows](const Tensor<T>& g, GradSink<T>& s) {
                        auto gd = g.data();
                        if (s.wants(0)) {
                          auto gx = s.grad(0);
                          auto gv = s.input(1).data();
                          for (std::size_t r = 0; r < rows; ++r) {
                            double mean_d = 0.0, mean_dh = 0.0;
                            for (std::size_t j = 0; j < dim; ++j) {
                              const double d = static_cast<double>(gd[r * dim + j]) * gv[j];
                              mean_d += d;
                              mean_dh += d * xhat[r * dim + j];
                            }
                            mean_d /= static_cast<double>(dim);
                            mean_dh /= static_cast<double>(dim);
                            for (std::size_t j = 0; j < dim; ++j) {
                              const double d = static_cast<double>(gd[r * dim + j]) * gv[j];
                              gx[r * dim + j] += static_cast<T>(rstd[r] * (d - mean_d - xhat[r * dim + j] * mean_dh));
                            }
                          }
                        }
                        if (s.wants(1)) {
                          auto gg = s.grad(1);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < dim; ++j) gg[j] += gd[r * dim + j] * xhat[r * dim + j];
                        }
                        if (s.wants(2)) {
                          auto gb = s.grad(2);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < dim; ++j) gb[j] += gd[r * dim + j];
                        }
                      });
}

template <typename T>
Var<T> softmax(const Var<T>& x, bool causal) {
  auto* tape = common_tape({&x}, "softmax");
  const Shape& xs = x.shape();
  if (xs.empty()) throw ShapeError("softmax: rank-0 input");
  const std::size_t cols = xs.back();
  std::size_t qlen = 1;
  if (causal) {
    if (xs.size() < 2) throw ShapeError("causal softmax needs (..., Tq, Tk)");
    qlen = xs[xs.size() - 2];
    if (qlen > cols) throw ShapeError("causal softmax: more queries than keys");
  }
  const std::size_t rows = x.value().size() / cols;
  Tensor<T> out(xs);
  auto xv = x.value().data();
  auto o = out.data();
  const std::size_t shift = cols - qlen;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * cols;
    T* y = o.data() + r * cols;
    const std::size_t allowed = causal ? (r % qlen) + shift + 1 : cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = j < allowed ? in[j] : static_cast<T>(in[j] + kCausalMaskValue);
      mx = std::max(mx, y[j]);
    }
    T total = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(y[j] - mx);
      total += y[j];
    }
    const T inv = T{1} / total;
    for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
  }
  return tape->record(OpKind::kSoftmax, {x}, std::move(out), [rows, cols](const Tensor<T>& g, GradSink<T>& s) {
    auto gx = s.grad(0);
    auto y = s.output().data();
    auto gd = g.data();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < cols; ++j) dot += gd[r * cols + j] * y[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += y[r * cols + j] * (gd[r * cols + j] - dot);
    }
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets) {
  auto* tape = common_tape({&logits}, "cross_entropy");
  const std::size_t vocab = logits.shape().back();
  const std::size_t rows = logits.value().size() / vocab;
  if (targets.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                     " positions");
  auto lv = logits.value().data();
  std::vector<T> probs(lv.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) throw InputError("cross_entropy: target out of range");
    const T* row = lv.data() + r * vocab;
    const T mx = *std::max_element(row, row + vocab);
    double total = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const double e = std::exp(static_cast<double>(row[j] - mx));
      probs[r * vocab + j] = static_cast<T>(e);
      total += e;
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[r * vocab + j] = static_cast<T>(probs[r * vocab + j] / total);
    loss += std::log(total) + mx - row[t];
  }
  loss /= static_cast<double>(rows);
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return tape->record(OpKind::kCrossEntropy, {logits}, Tensor<T>::scalar(static_cast<T>(loss)),
                      [probs = std::move(probs), tv = std::move(tv), rows, vocab](const Tensor<T>& g, GradSink<T>& s) {
                        const T f = g[0] / static_cast<T>(rows);
                        auto gl = s.grad(0);
                        for (std::size_t i = 0; i < probs.size(); ++i) gl[i] += f * probs[i];
                        for (std::size_t r = 0; r < rows; ++r) gl[r * vocab + static_cast<std::size_t>(tv[r])] -= f;
                      });
}

// ---- gradient check -----------------------------------------------------------------

GradCheckReport grad_check(const std::function<Var<double>(const Var<double>&)>& f, const TensorD& x,
                           double tolerance, double step, double abs_floor) {
  GradCheckReport report;
  TensorD analytic;
  {
    Tape<double> tape;
    auto xv = tape.leaf(x, true);
    auto y = f(xv);
    tape.backward(y);
    analytic = xv.grad() ? *xv.grad() : TensorD(x.shape());
  }
  auto eval = [&](const TensorD& point) {
    Tape<double> tape;
    return f(tape.constant(point)).value().item();
  };
  TensorD probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = eval(probe);
    probe[i] = orig - step;
    const double fm = eval(probe);
    probe[i] = orig;
    const double fd = (fp - fm) / (2.0 * step);
    const double g = analytic[i];
    if (!std::isfinite(fd) || !std::isfinite(g)) {
      report.non_finite = true;
      continue;
    }
    const double diff = std::abs(g - fd);
    report.max_abs_deviation = std::max(report.max_abs_deviation, diff);
    const double rel = diff <= abs_floor ? 0.0 : diff / std::max(std::abs(g), std::abs(fd));
    if (rel > report.max_rel_deviation) {
      report.max_rel_deviation = rel;
      report.worst_index = i;
    }
  }
  report.passed = !report.non_finite && report.max_rel_deviation <= tolerance;
  return report;
}

#define MPOGPT_INSTANTIATE_AUTOGRAD(T)                                                             \
  template class Var<T>;                                                                           \
  template class GradSink<T>;                                                                      \
  template class Tape<T>;                                                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                               \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                               \
  template Var<T> scale(const Var<T>&, T);                                                         \
  template Var<T> sum(const Var<T>&);                                                              \
  template Var<T> reshape(const Var<T>&, Shape);                                                   \
  template Var<T> permute(const Var<T>&, const Axes&);                                             \
  template Var<T> tensordot(const Var<T>&, const Var<T>&, const Axes&, const Axes&);               \
  template Var<T> matmul(const Var<T>&, const Var<T>&, bool);                                      \
  template Var<T> linear(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&);              \
  template Var<T> embedding(const Var<T>&, std::span<const std::int32_t>, const Shape&);           \
  template Var<T> layernorm(const Var<T>&, const Var<T>&, const Var<T>&, double);                  \
  template Var<T> softmax(const Var<T>&, bool);                                                    \
  template Var<T> relu(const Var<T>&);                                                             \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::int32_t>);

MPOGPT_INSTANTIATE_AUTOGRAD(float)
MPOGPT_INSTANTIATE_AUTOGRAD(double)

}  // namespace mpogpt

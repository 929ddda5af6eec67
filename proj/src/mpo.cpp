// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/mpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpogpt {

namespace {

std::size_t product(const std::vector<std::size_t>& v, std::size_t from = 0, std::size_t to = SIZE_MAX) {
  to = std::min(to, v.size());
  std::size_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= v[i];
  return p;
}

Axes interleave_axes(std::size_t sites) {
  Axes axes;
  for (std::size_t l = 0; l < sites; ++l) {
    axes.push_back(l);
    axes.push_back(sites + l);
  }
  return axes;
}

Shape interleaved_shape(const std::vector<std::size_t>& d_out, const std::vector<std::size_t>& d_in) {
  Shape s;
  for (std::size_t l = 0; l < d_out.size(); ++l) {
    s.push_back(d_out[l]);
    s.push_back(d_in[l]);
  }
  return s;
}

FactorizationPlan plan_of(const std::vector<std::size_t>& d_out, const std::vector<std::size_t>& d_in) {
  return FactorizationPlan{d_out, d_in, 1};
}

}  // namespace

// ---- plan ------------------------------------------------------------------------

std::size_t FactorizationPlan::out() const { return product(d_out); }
std::size_t FactorizationPlan::in() const { return product(d_in); }

void FactorizationPlan::validate() const {
  if (d_out.empty() || d_out.size() != d_in.size())
    throw ShapeError("plan: d_out and d_in must have the same nonzero length");
  if (chi == 0) throw ShapeError("plan: chi must be >= 1");
  for (std::size_t l = 0; l < d_out.size(); ++l)
    if (d_out[l] == 0 || d_in[l] == 0) throw ShapeError("plan: local dimensions must be >= 1");
}

void FactorizationPlan::validate_for(std::size_t out_dim, std::size_t in_dim) const {
  validate();
  if (out() != out_dim || in() != in_dim)
    throw ShapeError("plan " + shape_str(d_out) + "x" + shape_str(d_in) + " does not factor (" +
                     std::to_string(out_dim) + ", " + std::to_string(in_dim) + ")");
}

std::vector<std::size_t> bond_dims(const FactorizationPlan& plan) {
  plan.validate();
  const std::size_t sites = plan.sites();
  std::vector<std::size_t> local(sites);
  for (std::size_t l = 0; l < sites; ++l) local[l] = plan.d_out[l] * plan.d_in[l];
  std::vector<std::size_t> bonds(sites + 1, 1);
  for (std::size_t l = 0; l + 1 < sites; ++l)
    bonds[l + 1] = std::min({plan.chi, bonds[l] * local[l], product(local, l + 1)});
  return bonds;
}

std::size_t param_count(const FactorizationPlan& plan) {
  const auto bonds = bond_dims(plan);
  std::size_t total = 0;
  for (std::size_t l = 0; l < plan.sites(); ++l) total += bonds[l] * plan.d_out[l] * plan.d_in[l] * bonds[l + 1];
  return total;
}

double init_scale(const FactorizationPlan& plan, std::size_t n_in) {
  plan.validate();
  if (n_in == 0) throw UsageError("init_scale: n_in must be >= 1");
  const double sites = static_cast<double>(plan.sites());
  return std::pow(static_cast<double>(n_in), -0.25) *
         std::pow(static_cast<double>(plan.chi), -(sites - 1.0) / (2.0 * sites));
}

// ---- cores -----------------------------------------------------------------------

template <typename T>
std::vector<std::size_t> MpoCores<T>::bond_dims() const {
  std::vector<std::size_t> bonds;
  if (cores.empty()) return bonds;
  bonds.push_back(cores.front().shape()[0]);
  for (const auto& c : cores) bonds.push_back(c.shape()[3]);
  return bonds;
}

template <typename T>
std::vector<std::size_t> MpoCores<T>::d_out() const {
  std::vector<std::size_t> d;
  for (const auto& c : cores) d.push_back(c.shape()[1]);
  return d;
}

template <typename T>
std::vector<std::size_t> MpoCores<T>::d_in() const {
  std::vector<std::size_t> d;
  for (const auto& c : cores) d.push_back(c.shape()[2]);
  return d;
}

template <typename T>
std::size_t MpoCores<T>::out() const {
  return product(d_out());
}

template <typename T>
std::size_t MpoCores<T>::in() const {
  return product(d_in());
}

template <typename T>
std::size_t MpoCores<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& c : cores) n += c.size();
  return n;
}

template <typename T>
void MpoCores<T>::validate() const {
  if (cores.empty()) throw ShapeError("MPO has no cores");
  for (std::size_t l = 0; l < cores.size(); ++l) {
    if (cores[l].rank() != 4) throw ShapeError("MPO core " + std::to_string(l) + " must have rank 4");
    if (l > 0 && cores[l - 1].shape()[3] != cores[l].shape()[0])
      throw ShapeError("MPO bond mismatch between cores " + std::to_string(l - 1) + " and " + std::to_string(l) +
                       ": " + shape_str(cores[l - 1].shape()) + " vs " + shape_str(cores[l].shape()));
  }
  if (cores.front().shape()[0] != 1 || cores.back().shape()[3] != 1)
    throw ShapeError("MPO boundary bonds must be 1");
}

template <typename T>
double TtSvdResult<T>::total_discarded_sq() const {
  return std::accumulate(discarded_sq.begin(), discarded_sq.end(), 0.0);
}

// ---- interleaving ----------------------------------------------------------------

template <typename T>
Tensor<T> interleave(const Tensor<T>& w, const FactorizationPlan& plan) {
  if (w.rank() != 2) throw ShapeError("interleave expects a matrix");
  plan.validate_for(w.shape()[0], w.shape()[1]);
  Shape split(plan.d_out);
  split.insert(split.end(), plan.d_in.begin(), plan.d_in.end());
  return permute(reshape(w, split), interleave_axes(plan.sites()));
}

template <typename T>
Tensor<T> deinterleave(const Tensor<T>& t, const FactorizationPlan& plan) {
  plan.validate();
  if (t.shape() != interleaved_shape(plan.d_out, plan.d_in))
    throw ShapeError("deinterleave: shape " + shape_str(t.shape()) + " does not match plan");
  return reshape(permute(t, inverse_permutation(interleave_axes(plan.sites()))), {plan.out(), plan.in()});
}

// ---- TT-SVD ----------------------------------------------------------------------

template <typename T>
TtSvdResult<T> tt_svd(const Tensor<T>& w, const FactorizationPlan& plan) {
  if (w.rank() != 2) throw ShapeError("tt_svd expects a matrix");
  plan.validate_for(w.shape()[0], w.shape()[1]);
  if (!all_finite(w)) throw NumericError("tt_svd: non-finite entries in weight");

  const std::size_t sites = plan.sites();
  TtSvdResult<T> result;

  if (frobenius_norm(w) == 0.0) {
    for (std::size_t l = 0; l < sites; ++l) result.cores.cores.emplace_back(Shape{1, plan.d_out[l], plan.d_in[l], 1});
    result.discarded_sq.assign(sites - 1, 0.0);
    return result;
  }

  TensorD remainder = interleave(w.template cast<double>(), plan);
  std::size_t bond_left = 1;
  for (std::size_t l = 0; l + 1 < sites; ++l) {
    const std::size_t rows = bond_left * plan.d_out[l] * plan.d_in[l];
    const TensorD unfolding = reshape(remainder, {rows, remainder.size() / rows});
    auto svd = truncated_svd(unfolding, plan.chi);
    const std::size_t r = svd.s.size();
    result.cores.cores.push_back(reshape(svd.u, {bond_left, plan.d_out[l], plan.d_in[l], r}).template cast<T>());
    result.discarded_sq.push_back(svd.discarded_sq);
    // remainder <- diag(s) . V^T
    TensorD next = std::move(svd.vt);
    const std::size_t cols = next.shape()[1];
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t j = 0; j < cols; ++j) next[k * cols + j] *= svd.s[k];
    remainder = std::move(next);
    bond_left = r;
  }
  result.cores.cores.push_back(
      reshape(remainder, {bond_left, plan.d_out[sites - 1], plan.d_in[sites - 1], 1}).template cast<T>());
  return result;
}

// ---- contraction -----------------------------------------------------------------

template <typename T>
Tensor<T> reconstruct(const MpoCores<T>& mpo) {
  mpo.validate();
  const auto& first = mpo.cores.front();
  // acc: (interleaved physical indices so far, bond)
  Tensor<T> acc = reshape(first, {first.size() / first.shape()[3], first.shape()[3]});
  for (std::size_t l = 1; l < mpo.sites(); ++l) {
    const auto& c = mpo.cores[l];
    Tensor<T> next = tensordot(acc, c, {1}, {0});
    acc = reshape(next, {next.size() / c.shape()[3], c.shape()[3]});
  }
  return deinterleave(reshape(acc, interleaved_shape(mpo.d_out(), mpo.d_in())), plan_of(mpo.d_out(), mpo.d_in()));
}

template <typename T>
Var<T> reconstruct(std::span<const Var<T>> cores) {
  if (cores.empty()) throw ShapeError("reconstruct: no cores");
  std::vector<std::size_t> d_out, d_in;
  for (std::size_t l = 0; l < cores.size(); ++l) {
    const auto& s = cores[l].shape();
    if (s.size() != 4) throw ShapeError("reconstruct: cores must have rank 4");
    if (l > 0 && cores[l - 1].shape()[3] != s[0]) throw ShapeError("reconstruct: bond mismatch");
    d_out.push_back(s[1]);
    d_in.push_back(s[2]);
  }
  if (cores.front().shape()[0] != 1 || cores.back().shape()[3] != 1)
    throw ShapeError("reconstruct: boundary bonds must be 1");

  const auto& s0 = cores[0].shape();
  Var<T> acc = reshape(cores[0], {s0[1] * s0[2], s0[3]});
  for (std::size_t l = 1; l < cores.size(); ++l) {
    const auto& s = cores[l].shape();
    Var<T> next = tensordot(acc, cores[l], {1}, {0});
    acc = reshape(next, {next.value().size() / s[3], s[3]});
  }
  const std::size_t sites = cores.size();
  Var<T> t = reshape(acc, interleaved_shape(d_out, d_in));
  t = permute(t, inverse_permutation(interleave_axes(sites)));
  return reshape(t, {product(d_out), product(d_in)});
}

template <typename T>
Tensor<T> apply_direct(const MpoCores<T>& mpo, const Tensor<T>& x) {
  mpo.validate();
  if (x.rank() != 2 || x.shape()[1] != mpo.in())
    throw ShapeError("apply_direct: input " + shape_str(x.shape()) + " does not match in=" + std::to_string(mpo.in()));
  const std::size_t batch = x.shape()[0];
  const auto d_in = mpo.d_in();

  // state: (batch, processed out, bond, current in, remaining in)
  std::size_t out_done = 1;
  Tensor<T> state = reshape(x, {batch, 1, 1, d_in[0], product(d_in, 1)});
  for (std::size_t l = 0; l < mpo.sites(); ++l) {
    const auto& core = mpo.cores[l];
    const std::size_t rest = state.shape()[4];
    // (batch, out_done, rest, d_out_l, bond_r)
    Tensor<T> c = tensordot(state, core, {2, 3}, {0, 2});
    c = permute(c, {0, 1, 3, 4, 2});
    out_done *= core.shape()[1];
    const std::size_t bond_r = core.shape()[3];
    if (l + 1 < mpo.sites()) {
      const std::size_t next_in = d_in[l + 1];
      state = reshape(c, {batch, out_done, bond_r, next_in, rest / next_in});
    } else {
      state = reshape(c, {batch, out_done, 1, 1, 1});
    }
  }
  return reshape(state, {batch, out_done});
}

template <typename T>
Tensor<T> environment_gradient(const MpoCores<T>& mpo, const Tensor<T>& upstream, std::size_t site) {
  mpo.validate();
  const std::size_t sites = mpo.sites();
  if (site >= sites) throw ShapeError("environment_gradient: site out of range");
  if (upstream.shape() != Shape{mpo.out(), mpo.in()})
    throw ShapeError("environment_gradient: upstream must be (out, in)");
  const auto d_out = mpo.d_out();
  const auto d_in = mpo.d_in();
  // Left environment (O_left, I_left, chi_{l-1}).
  const std::size_t o_left = product(d_out, 0, site), i_left = product(d_in, 0, site);
  Tensor<T> left = Tensor<T>::filled({1, 1, 1}, T{1});
  for (std::size_t l = 0; l < site; ++l) {
    const auto& c = mpo.cores[l];
    // (O, I, a) x (a, o, i, b) -> (O, I, o, i, b) -> (O, o, I, i, b)
    Tensor<T> t = permute(tensordot(left, c, {2}, {0}), {0, 2, 1, 3, 4});
    const auto& s = t.shape();
    left = reshape(t, {s[0] * s[1], s[2] * s[3], s[4]});
  }

  // Right environment (chi_l, O_right, I_right).
  const std::size_t o_right = product(d_out, site + 1), i_right = product(d_in, site + 1);
  Tensor<T> right = Tensor<T>::filled({1, 1, 1}, T{1});
  for (std::size_t l = sites; l-- > site + 1;) {
    const auto& c = mpo.cores[l];
    // (a, o, i, b) x (b, O, I) -> (a, o, i, O, I) -> (a, o, O, i, I)
    Tensor<T> t = permute(tensordot(c, right, {3}, {0}), {0, 1, 3, 2, 4});
    const auto& s = t.shape();
    right = reshape(t, {s[0], s[1] * s[2], s[3] * s[4]});
  }

  // upstream (O_left, o, O_right, I_left, i, I_right)
  const Tensor<T> u = reshape(upstream, {o_left, d_out[site], o_right, i_left, d_in[site], i_right});
  // Contract O_left, I_left with the left environment -> (o, O_right, i, I_right, a)
  Tensor<T> t = tensordot(u, left, {0, 3}, {0, 1});
  // Contract O_right, I_right with the right environment -> (o, i, a, b)
  t = tensordot(t, right, {1, 3}, {1, 2});
  return permute(t, {2, 0, 1, 3});
}

template <typename T>
MpoCores<T> random_init(const FactorizationPlan& plan, std::uint64_t seed) {
  const auto bonds = bond_dims(plan);
  const double sigma = init_scale(plan, plan.in());
  std::mt19937_64 rng(seed);
  MpoCores<T> mpo;
  for (std::size_t l = 0; l < plan.sites(); ++l)
    mpo.cores.push_back(randn<T>({bonds[l], plan.d_out[l], plan.d_in[l], bonds[l + 1]}, rng, sigma));
  return mpo;
}

template <typename T>
Tensor<T> MpoLinear<T>::forward(const Tensor<T>& x, bool direct) const {
  if (x.rank() != 2) throw ShapeError("MpoLinear::forward expects (batch, in)");
  Tensor<T> y = direct ? apply_direct(cores, x) : matmul(x, transpose(reconstruct(cores)));
  if (bias) {
    const std::size_t out = bias->size();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*bias)[i % out];
  }
  return y;
}

#define MPOGPT_INSTANTIATE_MPO(T)                                                          \
  template struct MpoCores<T>;                                                             \
  template struct TtSvdResult<T>;                                                          \
  template struct MpoLinear<T>;                                                            \
  template Tensor<T> interleave(const Tensor<T>&, const FactorizationPlan&);               \
  template Tensor<T> deinterleave(const Tensor<T>&, const FactorizationPlan&);             \
  template TtSvdResult<T> tt_svd(const Tensor<T>&, const FactorizationPlan&);              \
  template Tensor<T> reconstruct(const MpoCores<T>&);                                      \
  template Var<T> reconstruct(std::span<const Var<T>>);                                    \
  template Tensor<T> apply_direct(const MpoCores<T>&, const Tensor<T>&);                   \
  template Tensor<T> environment_gradient(const MpoCores<T>&, const Tensor<T>&, std::size_t); \
  template MpoCores<T> random_init<T>(const FactorizationPlan&, std::uint64_t);

MPOGPT_INSTANTIATE_MPO(float)
MPOGPT_INSTANTIATE_MPO(double)

}  // namespace mpogpt

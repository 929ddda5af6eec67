// SPDX-License-Identifier: Apache-2.0
//
// Character-level GPT: token embedding + sinusoidal positions, N pre-norm
// blocks (causal multi-head attention, ReLU FFN), final layernorm, LM head.
// Every projection and the LM head is either dense or an MPO chain.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpogpt/autograd.hpp"
#include "mpogpt/mpo.hpp"
#include "mpogpt/tensor.hpp"

namespace mpogpt {

enum class LinearMode : std::uint8_t { kDense, kMpo };
enum class LayerKind : std::uint8_t { kAttention, kFfnUp, kFfnDown, kLmHead };
enum class ParamRole : std::uint8_t { kEmbedding, kWeight, kCore, kBias, kNorm };

const char* to_string(LinearMode mode);
const char* to_string(LayerKind kind);
const char* to_string(ParamRole role);
LinearMode parse_linear_mode(const std::string& s);
LayerKind parse_layer_kind(const std::string& s);

struct ModelConfig {
  std::size_t vocab = 65;
  std::size_t embed = 128;
  std::size_t heads = 4;
  std::size_t layers = 4;
  std::size_t context = 256;
  LinearMode mode = LinearMode::kDense;
  /// Bond cap for MPO layers.
  std::size_t chi = 8;
  /// Bond dimension at which local dimensions are chosen, so a chi sweep keeps
  /// the same factorization.
  std::size_t plan_chi = 8;
  std::size_t attn_sites = 2;
  std::size_t ffn_sites = 3;
  std::size_t head_sites = 2;
  double init_std = 0.02;
  /// Explicit local dimensions per layer kind; chi is taken from `chi`.
  std::map<LayerKind, FactorizationPlan> plan_overrides;

  std::size_t ffn() const noexcept { return 4 * embed; }
  std::size_t head_dim() const noexcept { return embed / heads; }
  std::pair<std::size_t, std::size_t> shape_of(LayerKind kind) const;
  /// Factorization for a layer kind with bond cap `chi`.
  FactorizationPlan plan_for(LayerKind kind) const;
  void validate() const;
};

template <typename T>
struct Parameter {
  std::string name;
  ParamRole role = ParamRole::kWeight;
  Tensor<T> value;
};

/// One linear projection: its weight is either params[first] (dense) or the
/// cores params[first .. first+count).
struct LinearSlot {
  std::string name;
  LayerKind kind = LayerKind::kAttention;
  std::size_t out = 0;
  std::size_t in = 0;
  std::optional<FactorizationPlan> plan;
  std::size_t first = 0;
  std::size_t count = 1;
  std::size_t bias = 0;
};

struct TokenBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<std::int32_t> ids;  // batch x len, row-major
};

/// PE[t, 2k] = sin(t / 10000^{2k/D}), PE[t, 2k+1] = cos(t / 10000^{2k/D}).
template <typename T>
Tensor<T> sinusoidal_pe(std::size_t length, std::size_t dim);

template <typename T>
class Transformer {
 public:
  /// Fresh model: dense weights/embeddings ~ N(0, init_std^2), MPO cores from
  /// random_init, zero biases, unit layernorm gains.
  static Transformer init(const ModelConfig& cfg, std::uint64_t seed);
  /// Adopts parameters loaded from elsewhere; names, roles and shapes are checked.
  static Transformer from_params(const ModelConfig& cfg, std::vector<Parameter<T>> params);

  const ModelConfig& config() const noexcept { return cfg_; }
  const std::vector<Parameter<T>>& params() const noexcept { return params_; }
  std::vector<Parameter<T>>& params() noexcept { return params_; }
  const std::vector<LinearSlot>& linears() const noexcept { return slots_; }
  std::size_t param_count() const;

  /// Leaves for every parameter, in params() order.
  std::vector<Var<T>> bind(Tape<T>& tape, bool requires_grad) const;
  /// Logits (B, T', V) recorded on the tape of `bound`.
  Var<T> forward(const std::vector<Var<T>>& bound, const TokenBatch& tokens) const;
  /// Gradient-free forward.
  Tensor<T> logits(const TokenBatch& tokens) const;

  /// Dense (out, in) weight of a projection, reconstructing MPO layers.
  Tensor<T> dense_weight(const LinearSlot& slot) const;

  template <typename U>
  Transformer<U> cast() const;

 private:
  Transformer(ModelConfig cfg, std::vector<Parameter<T>> params);
  void build_layout();
  void check_token_batch(const TokenBatch& tokens) const;
  Var<T> apply_linear(const std::vector<Var<T>>& bound, const LinearSlot& slot, const Var<T>& x) const;

  struct BlockIndex {
    std::size_t ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    std::size_t q, k, v, o, up, down;  // into slots_
  };

  ModelConfig cfg_;
  std::vector<Parameter<T>> params_;
  std::vector<LinearSlot> slots_;
  std::vector<BlockIndex> blocks_;
  std::size_t embedding_ = 0, lnf_gain_ = 0, lnf_bias_ = 0, head_ = 0;
  Tensor<T> pe_;
};

using TransformerF = Transformer<float>;
using TransformerD = Transformer<double>;

/// Mean next-token cross-entropy over all positions.
template <typename T>
Var<T> sequence_loss(const Var<T>& logits, const TokenBatch& targets);

/// Fraction of positions whose argmax (lowest index on ties) equals the target.
template <typename T>
double token_accuracy(const Tensor<T>& logits, std::span<const std::int32_t> targets);

/// Loss value without recording a backward pass.
template <typename T>
double cross_entropy_value(const Tensor<T>& logits, std::span<const std::int32_t> targets);

struct LayerError {
  std::string layer;
  std::size_t chi = 0;
  double rel_err = 0.0;
  std::size_t params_dense = 0;
  std::size_t params_mpo = 0;
};

template <typename T>
struct Compressed {
  Transformer<T> model;
  std::vector<LayerError> layers;
};

/// Replaces every dense projection of `dense` with TT-SVD cores at bond cap chi.
template <typename T>
Compressed<T> compress_model(const Transformer<T>& dense, std::size_t chi);

/// Per-layer TT-SVD relative error without building the compressed model.
template <typename T>
std::vector<LayerError> reconstruction_errors(const Transformer<T>& dense, std::size_t chi);

/// A bond cap at which no unfolding of any layer is truncated.
std::size_t full_rank_chi(const ModelConfig& cfg);

/// Autoregressive sampling. temperature == 0 picks the argmax.
template <typename T>
std::vector<std::int32_t> generate(const Transformer<T>& model, std::vector<std::int32_t> prompt, std::size_t length,
                                   double temperature, std::mt19937_64& rng);

}  // namespace mpogpt

// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "mpogpt/errors.hpp"
#include "mpogpt/factorize.hpp"

namespace mpogpt {

namespace {

constexpr LayerKind kAllKinds[] = {LayerKind::kAttention, LayerKind::kFfnUp, LayerKind::kFfnDown,
                                   LayerKind::kLmHead};

std::size_t argmax_row(const auto* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

void check_targets(std::size_t positions, std::span<const std::int32_t> targets, std::size_t vocab) {
  if (targets.size() != positions) {
    throw ShapeError("targets: expected " + std::to_string(positions) + " ids, got " +
                     std::to_string(targets.size()));
  }
  for (auto t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw InputError("target id " + std::to_string(t) + " outside [0, " + std::to_string(vocab) + ")");
    }
  }
}

}  // namespace

const char* to_string(LinearMode mode) { return mode == LinearMode::kDense ? "dense" : "mpo"; }

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kAttention: return "attention";
    case LayerKind::kFfnUp: return "ffn_up";
    case LayerKind::kFfnDown: return "ffn_down";
    case LayerKind::kLmHead: return "lm_head";
  }
  return "?";
}

const char* to_string(ParamRole role) {
  switch (role) {
    case ParamRole::kEmbedding: return "embedding";
    case ParamRole::kWeight: return "weight";
    case ParamRole::kCore: return "core";
    case ParamRole::kBias: return "bias";
    case ParamRole::kNorm: return "norm";
  }
  return "?";
}

LinearMode parse_linear_mode(const std::string& s) {
  if (s == "dense") return LinearMode::kDense;
  if (s == "mpo") return LinearMode::kMpo;
  throw InputError("unknown linear mode '" + s + "' (expected dense or mpo)");
}

LayerKind parse_layer_kind(const std::string& s) {
  for (auto kind : kAllKinds) {
    if (s == to_string(kind)) return kind;
  }
  throw InputError("unknown layer kind '" + s + "'");
}

std::pair<std::size_t, std::size_t> ModelConfig::shape_of(LayerKind kind) const {
  switch (kind) {
    case LayerKind::kAttention: return {embed, embed};
    case LayerKind::kFfnUp: return {ffn(), embed};
    case LayerKind::kFfnDown: return {embed, ffn()};
    case LayerKind::kLmHead: return {vocab, embed};
  }
  throw UsageError("bad layer kind");
}

FactorizationPlan ModelConfig::plan_for(LayerKind kind) const {
  auto [out, in] = shape_of(kind);
  FactorizationPlan plan;
  if (auto it = plan_overrides.find(kind); it != plan_overrides.end()) {
    plan = it->second;
  } else {
    std::size_t sites = kind == LayerKind::kAttention ? attn_sites : kind == LayerKind::kLmHead ? head_sites : ffn_sites;
    plan = plan_balanced(PlanRequest{out, in, sites, plan_chi});
  }
  plan.chi = chi;
  plan.validate_for(out, in);
  return plan;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("model config: " + what);
  };
  require(vocab >= 1, "vocab must be >= 1");
  require(embed >= 2 && embed % 2 == 0, "embed must be even (sinusoidal positions), got " + std::to_string(embed));
  require(heads >= 1 && embed % heads == 0, "embed must be divisible by heads");
  require(layers >= 1, "layers must be >= 1");
  require(context >= 1, "context must be >= 1");
  require(chi >= 1 && plan_chi >= 1, "chi and plan_chi must be >= 1");
  require(attn_sites >= 1 && ffn_sites >= 1 && head_sites >= 1, "site counts must be >= 1");
  require(init_std > 0.0 && std::isfinite(init_std), "init_std must be positive");
  if (mode == LinearMode::kMpo) {
    for (auto kind : kAllKinds) {
      try {
        (void)plan_for(kind);
      } catch (const std::exception& e) {
        throw InputError(std::string("model config: plan for ") + to_string(kind) + ": " + e.what());
      }
    }
  }
}

std::size_t full_rank_chi(const ModelConfig& cfg) {
  std::size_t best = 1;
  for (auto kind : kAllKinds) {
    auto [out, in] = cfg.shape_of(kind);
    best = std::max(best, out * in);
  }
  return best;
}

template <typename T>
Tensor<T> sinusoidal_pe(std::size_t length, std::size_t dim) {
  if (dim % 2 != 0) throw InputError("sinusoidal_pe: dimension must be even, got " + std::to_string(dim));
  Tensor<T> pe({length, dim});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t k = 0; 2 * k < dim; ++k) {
      double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(dim));
      pe[t * dim + 2 * k] = static_cast<T>(std::sin(angle));
      pe[t * dim + 2 * k + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

// ---- layout -------------------------------------------------------------

namespace {

enum class InitKind : std::uint8_t { kNormal, kZeros, kOnes, kCore };

struct ParamSpec {
  std::string name;
  ParamRole role;
  Shape shape;
  InitKind init;
  std::size_t slot = 0;  // for cores
  std::size_t site = 0;
};

}  // namespace

template <typename T>
Transformer<T>::Transformer(ModelConfig cfg, std::vector<Parameter<T>> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {}

template <typename T>
void Transformer<T>::build_layout() {
  cfg_.validate();
  std::vector<ParamSpec> specs;
  std::map<LayerKind, FactorizationPlan> plans;
  if (cfg_.mode == LinearMode::kMpo) {
    for (auto kind : kAllKinds) plans[kind] = cfg_.plan_for(kind);
  }
  slots_.clear();
  blocks_.clear();

  auto add = [&](std::string name, ParamRole role, Shape shape, InitKind init) {
    specs.push_back({std::move(name), role, std::move(shape), init});
    return specs.size() - 1;
  };
  auto add_linear = [&](const std::string& name, LayerKind kind) {
    auto [out, in] = cfg_.shape_of(kind);
    LinearSlot slot;
    slot.name = name;
    slot.kind = kind;
    slot.out = out;
    slot.in = in;
    slot.first = specs.size();
    if (cfg_.mode == LinearMode::kDense) {
      add(name + ".weight", ParamRole::kWeight, {out, in}, InitKind::kNormal);
    } else {
      const auto& plan = plans.at(kind);
      slot.plan = plan;
      slot.count = plan.sites();
      auto bonds = bond_dims(plan);
      for (std::size_t l = 0; l < plan.sites(); ++l) {
        auto idx = add(name + ".core" + std::to_string(l), ParamRole::kCore,
                       {bonds[l], plan.d_out[l], plan.d_in[l], bonds[l + 1]}, InitKind::kCore);
        specs[idx].slot = slots_.size();
        specs[idx].site = l;
      }
    }
    slot.bias = add(name + ".bias", ParamRole::kBias, {out}, InitKind::kZeros);
    slots_.push_back(std::move(slot));
    return slots_.size() - 1;
  };

  embedding_ = add("tok_emb", ParamRole::kEmbedding, {cfg_.vocab, cfg_.embed}, InitKind::kNormal);
  for (std::size_t b = 0; b < cfg_.layers; ++b) {
    std::string p = "blocks." + std::to_string(b) + ".";
    BlockIndex blk{};
    blk.ln1_gain = add(p + "ln1.gain", ParamRole::kNorm, {cfg_.embed}, InitKind::kOnes);
    blk.ln1_bias = add(p + "ln1.bias", ParamRole::kNorm, {cfg_.embed}, InitKind::kZeros);
    blk.q = add_linear(p + "attn.q", LayerKind::kAttention);
    blk.k = add_linear(p + "attn.k", LayerKind::kAttention);
    blk.v = add_linear(p + "attn.v", LayerKind::kAttention);
    blk.o = add_linear(p + "attn.o", LayerKind::kAttention);
    blk.ln2_gain = add(p + "ln2.gain", ParamRole::kNorm, {cfg_.embed}, InitKind::kOnes);
    blk.ln2_bias = add(p + "ln2.bias", ParamRole::kNorm, {cfg_.embed}, InitKind::kZeros);
    blk.up = add_linear(p + "ffn.up", LayerKind::kFfnUp);
    blk.down = add_linear(p + "ffn.down", LayerKind::kFfnDown);
    blocks_.push_back(blk);
  }
  lnf_gain_ = add("ln_f.gain", ParamRole::kNorm, {cfg_.embed}, InitKind::kOnes);
  lnf_bias_ = add("ln_f.bias", ParamRole::kNorm, {cfg_.embed}, InitKind::kZeros);
  head_ = add_linear("lm_head", LayerKind::kLmHead);

  pe_ = sinusoidal_pe<T>(cfg_.context, cfg_.embed);

  if (params_.empty()) {
    // Caller asked for the layout only; init() fills values afterwards.
    params_.reserve(specs.size());
    for (const auto& s : specs) params_.push_back({s.name, s.role, Tensor<T>(s.shape)});
    return;
  }

  if (params_.size() != specs.size()) {
    throw InputError("model expects " + std::to_string(specs.size()) + " tensors, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto& p = params_[i];
    if (p.name != s.name || p.role != s.role) {
      throw InputError("tensor " + std::to_string(i) + ": expected '" + s.name + "' (" + to_string(s.role) +
                       "), got '" + p.name + "' (" + to_string(p.role) + ")");
    }
    if (s.role != ParamRole::kCore && p.value.shape() != s.shape) {
      throw InputError("tensor '" + s.name + "': expected shape " + shape_str(s.shape) + ", got " +
                       shape_str(p.value.shape()));
    }
  }
  // Core bonds may be smaller than the plan's clip (e.g. TT-SVD of a zero
  // matrix); only local dims and chain consistency are fixed.
  for (const auto& slot : slots_) {
    if (!slot.plan) continue;
    MpoCores<T> mpo;
    for (std::size_t l = 0; l < slot.count; ++l) {
      const auto& core = params_[slot.first + l].value;
      if (core.rank() != 4 || core.extent(1) != slot.plan->d_out[l] || core.extent(2) != slot.plan->d_in[l] ||
          core.extent(3) > cfg_.chi) {
        throw InputError("tensor '" + params_[slot.first + l].name + "': shape " + shape_str(core.shape()) +
                         " does not fit the plan");
      }
      mpo.cores.push_back(core);
    }
    try {
      mpo.validate();
    } catch (const ShapeError& e) {
      throw InputError("layer '" + slot.name + "': " + e.what());
    }
  }
}

template <typename T>
Transformer<T> Transformer<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  Transformer model(cfg, {});
  model.build_layout();
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    auto& p = model.params_[i];
    switch (p.role) {
      case ParamRole::kEmbedding:
      case ParamRole::kWeight:
        p.value = randn<T>(p.value.shape(), rng, cfg.init_std);
        break;
      case ParamRole::kBias:
        break;
      case ParamRole::kNorm:
        if (p.name.ends_with(".gain")) p.value = Tensor<T>::filled(p.value.shape(), T{1});
        break;
      case ParamRole::kCore:
        break;
    }
    // Cores of one layer are drawn together when the layer's first core is reached.
    for (const auto& slot : model.slots_) {
      if (slot.plan && slot.first == i) {
        auto mpo = random_init<T>(*slot.plan, rng());
        for (std::size_t l = 0; l < slot.count; ++l) model.params_[slot.first + l].value = std::move(mpo.cores[l]);
      }
    }
  }
  return model;
}

template <typename T>
Transformer<T> Transformer<T>::from_params(const ModelConfig& cfg, std::vector<Parameter<T>> params) {
  if (params.empty()) throw InputError("model has no tensors");
  Transformer model(cfg, std::move(params));
  model.build_layout();
  return model;
}

template <typename T>
std::size_t Transformer<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::vector<Var<T>> Transformer<T>::bind(Tape<T>& tape, bool requires_grad) const {
  std::vector<Var<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.leaf(p.value, requires_grad));
  return out;
}

template <typename T>
void Transformer<T>::check_token_batch(const TokenBatch& tokens) const {
  if (tokens.batch == 0 || tokens.len == 0) throw InputError("empty token batch");
  if (tokens.ids.size() != tokens.batch * tokens.len) {
    throw ShapeError("token batch holds " + std::to_string(tokens.ids.size()) + " ids, expected " +
                     std::to_string(tokens.batch * tokens.len));
  }
  if (tokens.len > cfg_.context) {
    throw InputError("sequence length " + std::to_string(tokens.len) + " exceeds context " +
                     std::to_string(cfg_.context));
  }
  for (auto id : tokens.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab) {
      throw InputError("token id " + std::to_string(id) + " outside [0, " + std::to_string(cfg_.vocab) + ")");
    }
  }
}

template <typename T>
Var<T> Transformer<T>::apply_linear(const std::vector<Var<T>>& bound, const LinearSlot& slot, const Var<T>& x) const {
  Var<T> w = slot.plan ? reconstruct<T>(std::span<const Var<T>>(bound).subspan(slot.first, slot.count))
                       : bound[slot.first];
  return linear(x, w, std::optional<Var<T>>(bound[slot.bias]));
}

template <typename T>
Var<T> Transformer<T>::forward(const std::vector<Var<T>>& bound, const TokenBatch& tokens) const {
  check_token_batch(tokens);
  if (bound.size() != params_.size()) throw UsageError("forward: bound parameter count mismatch");
  Tape<T>& tape = *bound.front().tape();
  const std::size_t B = tokens.batch, L = tokens.len, D = cfg_.embed, H = cfg_.heads, hd = cfg_.head_dim();

  std::vector<T> pe_rows(pe_.data().begin(), pe_.data().begin() + static_cast<std::ptrdiff_t>(L * D));
  Var<T> pe = tape.constant(Tensor<T>({L, D}, std::move(pe_rows)));
  Var<T> x = add(embedding(bound[embedding_], tokens.ids, {B, L}), pe);

  auto split_heads = [&](const Var<T>& t) { return permute(reshape(t, {B, L, H, hd}), {0, 2, 1, 3}); };
  const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  for (const auto& blk : blocks_) {
    Var<T> h = layernorm(x, bound[blk.ln1_gain], bound[blk.ln1_bias]);
    Var<T> q = split_heads(apply_linear(bound, slots_[blk.q], h));
    Var<T> k = split_heads(apply_linear(bound, slots_[blk.k], h));
    Var<T> v = split_heads(apply_linear(bound, slots_[blk.v], h));
    Var<T> att = softmax(scale(matmul(q, k, true), att_scale), true);
    Var<T> y = reshape(permute(matmul(att, v), {0, 2, 1, 3}), {B, L, D});
    x = add(x, apply_linear(bound, slots_[blk.o], y));

    Var<T> h2 = layernorm(x, bound[blk.ln2_gain], bound[blk.ln2_bias]);
    Var<T> u = relu(apply_linear(bound, slots_[blk.up], h2));
    x = add(x, apply_linear(bound, slots_[blk.down], u));
  }
  Var<T> hf = layernorm(x, bound[lnf_gain_], bound[lnf_bias_]);
  return apply_linear(bound, slots_[head_], hf);
}

template <typename T>
Tensor<T> Transformer<T>::logits(const TokenBatch& tokens) const {
  Tape<T> tape;
  auto bound = bind(tape, false);
  return forward(bound, tokens).value();
}

template <typename T>
Tensor<T> Transformer<T>::dense_weight(const LinearSlot& slot) const {
  if (!slot.plan) return params_.at(slot.first).value;
  MpoCores<T> mpo;
  for (std::size_t l = 0; l < slot.count; ++l) mpo.cores.push_back(params_.at(slot.first + l).value);
  return reconstruct(mpo);
}

template <typename T>
template <typename U>
Transformer<U> Transformer<T>::cast() const {
  std::vector<Parameter<U>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back({p.name, p.role, p.value.template cast<U>()});
  return Transformer<U>::from_params(cfg_, std::move(out));
}

// ---- losses -------------------------------------------------------------

template <typename T>
Var<T> sequence_loss(const Var<T>& logits, const TokenBatch& targets) {
  const auto& shape = logits.shape();
  if (shape.size() != 3 || shape[0] != targets.batch || shape[1] != targets.len) {
    throw ShapeError("sequence_loss: logits " + shape_str(shape) + " vs targets (" + std::to_string(targets.batch) +
                     ", " + std::to_string(targets.len) + ")");
  }
  return cross_entropy(logits, std::span<const std::int32_t>(targets.ids));
}

template <typename T>
double token_accuracy(const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  if (logits.rank() == 0) throw ShapeError("token_accuracy: logits must have a vocabulary axis");
  const std::size_t V = logits.shape().back();
  const std::size_t n = logits.size() / V;
  check_targets(n, targets, V);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (argmax_row(logits.data().data() + i * V, V) == static_cast<std::size_t>(targets[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

template <typename T>
double cross_entropy_value(const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  if (logits.rank() == 0) throw ShapeError("cross_entropy_value: logits must have a vocabulary axis");
  const std::size_t V = logits.shape().back();
  const std::size_t n = logits.size() / V;
  check_targets(n, targets, V);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data().data() + i * V;
    double mx = static_cast<double>(*std::max_element(row, row + V));
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    total += mx + std::log(z) - static_cast<double>(row[targets[i]]);
  }
  return total / static_cast<double>(n);
}

// ---- compression --------------------------------------------------------

namespace {

template <typename T>
struct LayerCompression {
  LayerError error;
  MpoCores<T> cores;
};

template <typename T>
std::vector<LayerCompression<T>> compress_layers(const Transformer<T>& dense, std::size_t chi) {
  if (dense.config().mode != LinearMode::kDense) throw UsageError("compression needs a dense model");
  if (chi < 1) throw UsageError("chi must be >= 1");
  ModelConfig cfg = dense.config();
  cfg.chi = chi;
  std::map<LayerKind, FactorizationPlan> plans;
  for (auto kind : kAllKinds) plans[kind] = cfg.plan_for(kind);

  std::vector<LayerCompression<T>> out;
  for (const auto& slot : dense.linears()) {
    const auto& w = dense.params()[slot.first].value;
    auto tt = tt_svd(w, plans.at(slot.kind));
    double norm = frobenius_norm(w);
    double err = norm > 0.0 ? relative_error(w, reconstruct(tt.cores)) : 0.0;
    out.push_back({LayerError{slot.name, chi, err, slot.out * slot.in, tt.cores.param_count()},
                   std::move(tt.cores)});
  }
  return out;
}

}  // namespace

template <typename T>
std::vector<LayerError> reconstruction_errors(const Transformer<T>& dense, std::size_t chi) {
  std::vector<LayerError> out;
  for (auto& layer : compress_layers(dense, chi)) out.push_back(layer.error);
  return out;
}

template <typename T>
Compressed<T> compress_model(const Transformer<T>& dense, std::size_t chi) {
  auto layers = compress_layers(dense, chi);
  std::unordered_map<std::string, const Tensor<T>*> by_name;
  for (const auto& p : dense.params()) by_name[p.name] = &p.value;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& name = dense.linears()[i].name;
    for (std::size_t l = 0; l < layers[i].cores.sites(); ++l) {
      by_name[name + ".core" + std::to_string(l)] = &layers[i].cores.cores[l];
    }
  }

  ModelConfig cfg = dense.config();
  cfg.mode = LinearMode::kMpo;
  cfg.chi = chi;
  // Layout of the target model, filled by name from the dense model and cores.
  auto target = Transformer<T>::init(cfg, 0);
  std::vector<Parameter<T>> params;
  for (const auto& p : target.params()) params.push_back({p.name, p.role, *by_name.at(p.name)});

  Compressed<T> result{Transformer<T>::from_params(cfg, std::move(params)), {}};
  for (auto& layer : layers) result.layers.push_back(layer.error);
  return result;
}

// ---- generation ---------------------------------------------------------

template <typename T>
std::vector<std::int32_t> generate(const Transformer<T>& model, std::vector<std::int32_t> prompt, std::size_t length,
                                   double temperature, std::mt19937_64& rng) {
  const auto& cfg = model.config();
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw UsageError("temperature must be >= 0");
  for (auto id : prompt) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab) {
      throw InputError("prompt token " + std::to_string(id) + " outside the vocabulary");
    }
  }
  if (length > 0 && prompt.empty()) throw InputError("generation needs a non-empty prompt");
  for (std::size_t step = 0; step < length; ++step) {
    std::size_t ctx = std::min(prompt.size(), cfg.context);
    TokenBatch batch{1, ctx, std::vector<std::int32_t>(prompt.end() - static_cast<std::ptrdiff_t>(ctx), prompt.end())};
    Tensor<T> logits = model.logits(batch);
    const T* row = logits.data().data() + (ctx - 1) * cfg.vocab;
    std::size_t next = 0;
    if (temperature == 0.0) {
      next = argmax_row(row, cfg.vocab);
    } else {
      double mx = static_cast<double>(*std::max_element(row, row + cfg.vocab));
      std::vector<double> p(cfg.vocab);
      double z = 0.0;
      for (std::size_t j = 0; j < cfg.vocab; ++j) z += p[j] = std::exp((static_cast<double>(row[j]) - mx) / temperature);
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * z;
      next = cfg.vocab - 1;
      for (std::size_t j = 0; j < cfg.vocab; ++j) {
        if (u < p[j]) {
          next = j;
          break;
        }
        u -= p[j];
      }
    }
    prompt.push_back(static_cast<std::int32_t>(next));
  }
  return prompt;
}

#define MPOGPT_INSTANTIATE(T)                                                                                  \
  template Tensor<T> sinusoidal_pe<T>(std::size_t, std::size_t);                                              \
  template class Transformer<T>;                                                                               \
  template Var<T> sequence_loss<T>(const Var<T>&, const TokenBatch&);                                          \
  template double token_accuracy<T>(const Tensor<T>&, std::span<const std::int32_t>);                          \
  template double cross_entropy_value<T>(const Tensor<T>&, std::span<const std::int32_t>);                     \
  template std::vector<LayerError> reconstruction_errors<T>(const Transformer<T>&, std::size_t);               \
  template Compressed<T> compress_model<T>(const Transformer<T>&, std::size_t);                                \
  template std::vector<std::int32_t> generate<T>(const Transformer<T>&, std::vector<std::int32_t>, std::size_t, \
                                                 double, std::mt19937_64&);

MPOGPT_INSTANTIATE(float)
MPOGPT_INSTANTIATE(double)
#undef MPOGPT_INSTANTIATE

template Transformer<double> Transformer<float>::cast<double>() const;
template Transformer<float> Transformer<double>::cast<float>() const;
template Transformer<float> Transformer<float>::cast<float>() const;
template Transformer<double> Transformer<double>::cast<double>() const;

}  // namespace mpogpt

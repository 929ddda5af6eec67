// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "mpogpt/errors.hpp"

namespace mpogpt {

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("train config: " + what);
  };
  require(batch >= 1 && seq >= 1, "batch and seq must be >= 1");
  require(warmup <= steps, "warmup must not exceed steps");
  require(lr_max >= 0.0 && lr_min >= 0.0 && lr_min <= lr_max, "need 0 <= lr_min <= lr_max");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(eps > 0.0, "eps must be positive");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(clip_norm > 0.0, "clip_norm must be positive");
  require(eval_every >= 1 && eval_batches >= 1 && eval_batch_size >= 1, "eval settings must be >= 1");
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
  if (step < cfg.warmup) return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup);
  if (cfg.steps <= cfg.warmup) return cfg.lr_max;
  double progress = static_cast<double>(std::min(step, cfg.steps) - cfg.warmup) / static_cast<double>(cfg.steps - cfg.warmup);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
                double lr, const TrainConfig& cfg) {
  if (grads.size() != params.size()) throw UsageError("adamw_step: one gradient per parameter required");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("adamw_step: gradient of '" + params[i].name + "' has shape " + shape_str(grads[i].shape()));
    }
    if (!all_finite(grads[i])) throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    const bool decay = cfg.weight_decay > 0.0 && cfg.decay_roles.contains(params[i].role);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double gj = g[j];
      double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      double th = theta[j];
      if (decay) th -= lr * cfg.weight_decay * th;
      th -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
      theta[j] = static_cast<T>(th);
    }
  }
}

template <typename T>
double clip_global_norm(std::vector<Tensor<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (T x : g.data()) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double f = max_norm / norm;
    for (auto& g : grads) {
      for (T& x : g.data()) x = static_cast<T>(x * f);
    }
  }
  return norm;
}

template <typename T>
EvalResult evaluate(const Transformer<T>& model, std::span<const std::int32_t> val, const TrainConfig& cfg,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EvalResult r;
  for (std::size_t i = 0; i < cfg.eval_batches; ++i) {
    auto batch = sample_batch(val, cfg.eval_batch_size, cfg.seq, rng);
    auto logits = model.logits(batch.inputs);
    r.loss += cross_entropy_value(logits, batch.targets.ids);
    r.accuracy += token_accuracy(logits, batch.targets.ids);
  }
  r.loss /= static_cast<double>(cfg.eval_batches);
  r.accuracy /= static_cast<double>(cfg.eval_batches);
  return r;
}

namespace {

// Training batches come from their own stream so that the model init stream
// (seeded with cfg.seed) and the data order are decoupled.
constexpr std::uint64_t kDataStream = 0x5851F42D4C957F2DULL;

}  // namespace

template <typename T>
TrainResult<T> train(Transformer<T> model, const SplitCorpus& corpus, const TrainConfig& cfg,
                     const MetricsObserver& observer) {
  cfg.validate();
  if (cfg.seq > model.config().context) {
    throw InputError("train config: seq " + std::to_string(cfg.seq) + " exceeds model context " +
                     std::to_string(model.config().context));
  }
  if (corpus.vocab.size() != model.config().vocab) {
    throw InputError("corpus vocabulary has " + std::to_string(corpus.vocab.size()) + " symbols, model expects " +
                     std::to_string(model.config().vocab));
  }

  TrainResult<T> result{std::move(model), {}, false, {}};
  auto& net = result.model;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.seed ^ kDataStream);
  AdamState<T> adam;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  auto emit = [&](std::size_t step, double train_loss) {
    auto ev = evaluate(net, corpus.val, cfg, cfg.eval_seed + step);
    MetricsRecord rec{step, train_loss, ev.loss, ev.accuracy, lr_at(step, cfg),
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.metrics.push_back(rec);
    if (observer) observer(rec);
  };
  auto abort = [&](std::size_t step, double loss, std::string why) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    MetricsRecord rec{step, loss, nan, nan, lr_at(step, cfg),
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.metrics.push_back(rec);
    if (observer) observer(rec);
    result.diverged = true;
    result.diagnostic = "step " + std::to_string(step) + ": " + why;
  };

  for (std::size_t step = 0;; ++step) {
    if (step == cfg.steps) {
      if (loss_count == 0) {
        auto batch = sample_batch(corpus.train, cfg.batch, cfg.seq, rng);
        loss_sum = cross_entropy_value(net.logits(batch.inputs), batch.targets.ids);
        loss_count = 1;
      }
      emit(step, loss_sum / static_cast<double>(loss_count));
      break;
    }

    auto batch = sample_batch(corpus.train, cfg.batch, cfg.seq, rng);
    Tape<T> tape;
    auto bound = net.bind(tape, true);
    Var<T> loss = sequence_loss(net.forward(bound, batch.inputs), batch.targets);
    double loss_value = static_cast<double>(loss.value().item());
    if (!std::isfinite(loss_value)) {
      abort(step, loss_value, "non-finite training loss");
      break;
    }
    tape.backward(loss);
    loss_sum += loss_value;
    ++loss_count;

    if (step % cfg.eval_every == 0) {
      emit(step, loss_sum / static_cast<double>(loss_count));
      loss_sum = 0.0;
      loss_count = 0;
    }

    std::vector<Tensor<T>> grads;
    grads.reserve(bound.size());
    for (std::size_t i = 0; i < bound.size(); ++i) {
      const Tensor<T>* g = bound[i].grad();
      grads.push_back(g ? *g : Tensor<T>(net.params()[i].value.shape()));
    }
    try {
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!all_finite(grads[i])) throw NumericError("non-finite gradient for parameter '" + net.params()[i].name + "'");
      }
      clip_global_norm(grads, cfg.clip_norm);
      adamw_step(net.params(), grads, adam, lr_at(step, cfg), cfg);
    } catch (const NumericError& e) {
      abort(step, loss_value, e.what());
      break;
    }
  }
  return result;
}

template <typename T>
TrainResult<T> train_from_scratch(const ModelConfig& model_cfg, const SplitCorpus& corpus, const TrainConfig& cfg,
                                  const MetricsObserver& observer) {
  return train(Transformer<T>::init(model_cfg, cfg.seed), corpus, cfg, observer);
}

template <typename T>
FinetuneResult<T> compress_then_finetune(const Transformer<T>& dense, const SplitCorpus& corpus, std::size_t chi,
                                         const TrainConfig& cfg, const MetricsObserver& observer) {
  auto compressed = compress_model(dense, chi);
  EvalResult before = evaluate(compressed.model, corpus.val, cfg, cfg.eval_seed);
  auto run = train(std::move(compressed.model), corpus, cfg, observer);
  return {std::move(run), std::move(compressed.layers), before};
}

#define MPOGPT_INSTANTIATE(T)                                                                                        \
  template void adamw_step<T>(std::vector<Parameter<T>>&, const std::vector<Tensor<T>>&, AdamState<T>&, double,       \
                              const TrainConfig&);                                                                    \
  template double clip_global_norm<T>(std::vector<Tensor<T>>&, double);                                              \
  template EvalResult evaluate<T>(const Transformer<T>&, std::span<const std::int32_t>, const TrainConfig&,           \
                                  std::uint64_t);                                                                     \
  template TrainResult<T> train<T>(Transformer<T>, const SplitCorpus&, const TrainConfig&, const MetricsObserver&);   \
  template TrainResult<T> train_from_scratch<T>(const ModelConfig&, const SplitCorpus&, const TrainConfig&,           \
                                                const MetricsObserver&);                                              \
  template FinetuneResult<T> compress_then_finetune<T>(const Transformer<T>&, const SplitCorpus&, std::size_t,        \
                                                       const TrainConfig&, const MetricsObserver&);

MPOGPT_INSTANTIATE(float)
MPOGPT_INSTANTIATE(double)
#undef MPOGPT_INSTANTIATE

}  // namespace mpogpt

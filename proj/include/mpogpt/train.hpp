// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mpogpt/data.hpp"
#include "mpogpt/model.hpp"

namespace mpogpt {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 32;
  std::size_t seq = 256;
  double lr_max = 3e-4;
  double lr_min = 0.0;
  std::size_t warmup = 100;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  /// Parameter roles that receive decoupled weight decay.
  std::set<ParamRole> decay_roles{ParamRole::kWeight, ParamRole::kCore};
  double clip_norm = 1.0;
  std::size_t eval_every = 100;
  std::size_t eval_batches = 20;
  std::size_t eval_batch_size = 8;
  std::uint64_t seed = 0;
  /// Validation batches at step s are drawn from a generator seeded with
  /// eval_seed + s, independent of the training stream.
  std::uint64_t eval_seed = 1000003;

  void validate() const;
};

struct MetricsRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double wall_clock = 0.0;  // seconds since the run started
};

/// Linear warmup from 0, then cosine decay to lr_min at cfg.steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update with decoupled decay on cfg.decay_roles.
/// A non-finite gradient throws NumericError naming the parameter, before any
/// parameter is modified.
template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
                double lr, const TrainConfig& cfg);

/// Scales grads in place so their global l2 norm is at most max_norm. Returns
/// the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<Tensor<T>>& grads, double max_norm = 1.0);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and token accuracy over cfg.eval_batches batches drawn with `seed`.
template <typename T>
EvalResult evaluate(const Transformer<T>& model, std::span<const std::int32_t> val, const TrainConfig& cfg,
                    std::uint64_t seed);

using MetricsObserver = std::function<void(const MetricsRecord&)>;

template <typename T>
struct TrainResult {
  Transformer<T> model;
  std::vector<MetricsRecord> metrics;
  bool diverged = false;
  std::string diagnostic;
};

/// Runs cfg.steps optimizer steps on `model`. A record is emitted at step 0
/// and every eval_every steps, plus the final step; its train_loss is the mean
/// batch loss since the previous record. Non-finite losses or gradients stop
/// the run with diverged = true and the partial metrics.
template <typename T>
TrainResult<T> train(Transformer<T> model, const SplitCorpus& corpus, const TrainConfig& cfg,
                     const MetricsObserver& observer = {});

template <typename T>
TrainResult<T> train_from_scratch(const ModelConfig& model_cfg, const SplitCorpus& corpus, const TrainConfig& cfg,
                                  const MetricsObserver& observer = {});

template <typename T>
struct FinetuneResult {
  TrainResult<T> run;
  std::vector<LayerError> layers;
  /// Validation metrics of the compressed model before any update.
  EvalResult before;
};

/// TT-SVD at bond cap chi, then cfg.steps steps of the same recipe.
template <typename T>
FinetuneResult<T> compress_then_finetune(const Transformer<T>& dense, const SplitCorpus& corpus, std::size_t chi,
                                         const TrainConfig& cfg, const MetricsObserver& observer = {});

}  // namespace mpogpt

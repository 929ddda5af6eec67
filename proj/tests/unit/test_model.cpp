// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mpogpt/errors.hpp"
#include "mpogpt/model.hpp"
#include "oracles.hpp"

using namespace mpogpt;

namespace {

ModelConfig small_config(LinearMode mode = LinearMode::kDense, std::size_t chi = 4) {
  ModelConfig cfg;
  cfg.vocab = 11;
  cfg.embed = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.context = 6;
  cfg.mode = mode;
  cfg.chi = chi;
  return cfg;
}

TokenBatch random_tokens(std::size_t b, std::size_t t, std::size_t vocab, std::mt19937_64& rng) {
  TokenBatch tb{b, t, {}};
  std::uniform_int_distribution<std::int32_t> d(0, static_cast<std::int32_t>(vocab) - 1);
  for (std::size_t i = 0; i < b * t; ++i) tb.ids.push_back(d(rng));
  return tb;
}

// Every dense weight replaced by a random matrix of moderate scale so that
// compression is not trivially exact.
template <typename T>
void perturb(Transformer<T>& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : model.params()) {
    if (p.role == ParamRole::kNorm) continue;
    p.value = randn<T>(p.value.shape(), rng, 0.3);
  }
}

}  // namespace

TEST(PositionalEncoding, Examples) {
  auto pe = sinusoidal_pe<double>(5, 8);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(pe.at({0, k}), k % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(pe.at({1, 0}), 0.84147, 1e-5);
  for (double v : pe.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t k = 0; k < 4; ++k) {
      double angle = static_cast<double>(t) / std::pow(10000.0, 2.0 * static_cast<double>(k) / 8.0);
      EXPECT_NEAR(pe.at({t, 2 * k}), std::cos(angle - std::numbers::pi / 2), 1e-12);
      EXPECT_NEAR(pe.at({t, 2 * k + 1}), std::cos(angle), 1e-12);
    }
  }
  EXPECT_THROW(sinusoidal_pe<double>(4, 7), InputError);
}

TEST(ModelConfig, Defaults) {
  ModelConfig cfg;
  EXPECT_EQ(cfg.vocab, 65u);
  EXPECT_EQ(cfg.embed, 128u);
  EXPECT_EQ(cfg.heads, 4u);
  EXPECT_EQ(cfg.layers, 4u);
  EXPECT_EQ(cfg.context, 256u);
  EXPECT_EQ(cfg.ffn(), 512u);
}

TEST(ModelConfig, Validation) {
  auto cfg = small_config();
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = small_config();
  cfg.embed = 7;
  cfg.heads = 1;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = small_config(LinearMode::kMpo);
  cfg.plan_overrides[LayerKind::kAttention] = FactorizationPlan{{2, 2}, {2, 2}, 1};  // 4x4, not 8x8
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(ModelConfig, PlansFollowReferenceChiNotBondCap) {
  ModelConfig cfg;
  cfg.mode = LinearMode::kMpo;
  for (std::size_t chi : {4u, 8u, 16u, 32u}) {
    cfg.chi = chi;
    auto w1 = cfg.plan_for(LayerKind::kFfnUp);
    EXPECT_EQ(w1.d_out, (std::vector<std::size_t>{8, 8, 8}));
    EXPECT_EQ(w1.d_in, (std::vector<std::size_t>{4, 4, 8}));
    EXPECT_EQ(w1.chi, chi);
    EXPECT_EQ(cfg.plan_for(LayerKind::kAttention).d_out, (std::vector<std::size_t>{8, 16}));
    EXPECT_EQ(cfg.plan_for(LayerKind::kLmHead).d_out, (std::vector<std::size_t>{5, 13}));
  }
}

TEST(Transformer, LogitShape) {
  std::mt19937_64 rng(1);
  ModelConfig cfg = small_config();
  cfg.vocab = 65;
  auto model = TransformerF::init(cfg, 0);
  for (std::size_t len : {1u, 3u, 6u}) {
    auto logits = model.logits(random_tokens(2, len, 65, rng));
    EXPECT_EQ(logits.shape(), (Shape{2, len, 65}));
  }
}

TEST(Transformer, InputErrors) {
  auto model = TransformerF::init(small_config(), 0);
  EXPECT_THROW(model.logits(TokenBatch{1, 7, std::vector<std::int32_t>(7, 0)}), InputError);
  EXPECT_THROW(model.logits(TokenBatch{1, 2, {0, 11}}), InputError);
  EXPECT_THROW(model.logits(TokenBatch{1, 2, {0, -1}}), InputError);
  EXPECT_THROW(model.logits(TokenBatch{2, 2, {0, 1, 2}}), ShapeError);
}

TEST(Transformer, CausalityEveryDepth) {
  std::mt19937_64 rng(2);
  for (auto mode : {LinearMode::kDense, LinearMode::kMpo}) {
    for (std::size_t layers : {1u, 2u, 3u}) {
      auto cfg = small_config(mode);
      cfg.layers = layers;
      auto model = TransformerF::init(cfg, layers);
      perturb(model, 5);
      auto base = random_tokens(1, 6, cfg.vocab, rng);
      auto ref = model.logits(base);
      for (std::size_t t = 0; t < 6; ++t) {
        auto changed = base;
        changed.ids[t] = (changed.ids[t] + 1) % static_cast<std::int32_t>(cfg.vocab);
        auto out = model.logits(changed);
        for (std::size_t i = 0; i < t * cfg.vocab; ++i) ASSERT_EQ(out[i], ref[i]) << "t=" << t << " i=" << i;
        bool differs = false;
        for (std::size_t i = t * cfg.vocab; i < (t + 1) * cfg.vocab; ++i) differs |= out[i] != ref[i];
        EXPECT_TRUE(differs);
      }
    }
  }
}

TEST(Transformer, ParameterInventory) {
  auto cfg = small_config();
  auto model = TransformerF::init(cfg, 0);
  const std::size_t D = 8, V = 11, F = 32, N = 2;
  std::size_t want = V * D                                  // embedding
                     + N * (4 * (D * D + D)                 // attention projections
                            + (F * D + F) + (D * F + D)     // ffn
                            + 4 * D)                        // two layernorms
                     + 2 * D                                // final layernorm
                     + V * D + V;                           // head
  EXPECT_EQ(model.param_count(), want);
  EXPECT_EQ(model.linears().size(), 6 * N + 1);

  std::size_t norm = 0, bias = 0, emb = 0;
  for (const auto& p : model.params()) {
    if (p.role == ParamRole::kNorm) norm += p.value.size();
    if (p.role == ParamRole::kBias) bias += p.value.size();
    if (p.role == ParamRole::kEmbedding) emb += p.value.size();
  }
  EXPECT_EQ(norm, (2 * N + 1) * 2 * D);
  EXPECT_EQ(bias, N * (4 * D + F + D) + V);
  EXPECT_EQ(emb, V * D);
}

TEST(Transformer, MpoCountDiffersByPlanTerms) {
  auto dense_cfg = small_config();
  auto mpo_cfg = small_config(LinearMode::kMpo, 3);
  auto dense = TransformerF::init(dense_cfg, 0);
  auto mpo = TransformerF::init(mpo_cfg, 0);
  long long delta = 0;
  for (const auto& slot : mpo.linears()) {
    delta += static_cast<long long>(param_count(*slot.plan)) - static_cast<long long>(slot.out * slot.in);
  }
  EXPECT_EQ(static_cast<long long>(mpo.param_count()) - static_cast<long long>(dense.param_count()), delta);
}

TEST(Transformer, DenseInitialization) {
  ModelConfig cfg;
  cfg.vocab = 65;
  auto model = TransformerD::init(cfg, 3);
  for (const auto& p : model.params()) {
    if (p.role == ParamRole::kBias) {
      for (double v : p.value.data()) ASSERT_EQ(v, 0.0);
    } else if (p.role == ParamRole::kNorm) {
      double want = p.name.ends_with(".gain") ? 1.0 : 0.0;
      for (double v : p.value.data()) ASSERT_EQ(v, want) << p.name;
    } else if (p.value.size() > 10000) {
      double ss = 0.0;
      for (double v : p.value.data()) ss += v * v;
      EXPECT_NEAR(std::sqrt(ss / static_cast<double>(p.value.size())), 0.02, 0.001) << p.name;
    }
  }
  EXPECT_EQ(TransformerD::init(cfg, 3).params()[0].value, model.params()[0].value);
}

TEST(Transformer, FullRankTransferReproducesLogits) {
  std::mt19937_64 rng(3);
  auto dense = TransformerF::init(small_config(), 0);
  perturb(dense, 9);
  auto compressed = compress_model(dense, full_rank_chi(dense.config()));
  for (const auto& l : compressed.layers) EXPECT_LE(l.rel_err, 1e-5) << l.layer;
  auto tokens = random_tokens(3, 6, 11, rng);
  auto a = dense.logits(tokens), b = compressed.model.logits(tokens);
  EXPECT_LE(relative_error(a, b), 1e-4);
  EXPECT_NEAR(cross_entropy_value(a, tokens.ids), cross_entropy_value(b, tokens.ids), 1e-3);
}

TEST(Transformer, CompressionErrorsShrinkWithChi) {
  auto dense = TransformerF::init(small_config(), 0);
  perturb(dense, 10);
  auto e1 = reconstruction_errors(dense, 1);
  auto e2 = reconstruction_errors(dense, 2);
  ASSERT_EQ(e1.size(), dense.linears().size());
  for (std::size_t i = 0; i < e1.size(); ++i) {
    EXPECT_GE(e1[i].rel_err + 1e-12, e2[i].rel_err);
    EXPECT_EQ(e1[i].params_dense, dense.linears()[i].out * dense.linears()[i].in);
  }
  auto mpo = TransformerF::init(small_config(LinearMode::kMpo), 0);
  EXPECT_THROW(compress_model(mpo, 2), UsageError);
}

TEST(Transformer, FromParamsChecksLayout) {
  auto model = TransformerF::init(small_config(), 0);
  auto params = model.params();
  EXPECT_NO_THROW(TransformerF::from_params(model.config(), params));
  auto renamed = params;
  renamed[1].name = "nope";
  EXPECT_THROW(TransformerF::from_params(model.config(), renamed), InputError);
  auto reshaped = params;
  reshaped[0].value = TensorF({11, 9});
  EXPECT_THROW(TransformerF::from_params(model.config(), reshaped), InputError);
  params.pop_back();
  EXPECT_THROW(TransformerF::from_params(model.config(), params), InputError);
}

TEST(Transformer, CastKeepsValues) {
  auto model = TransformerF::init(small_config(LinearMode::kMpo), 4);
  auto wide = model.cast<double>();
  auto back = wide.cast<float>();
  for (std::size_t i = 0; i < model.params().size(); ++i) EXPECT_EQ(back.params()[i].value, model.params()[i].value);
}

TEST(Loss, UniformLogitsGiveLogV) {
  TensorF logits({2, 3, 65});
  std::vector<std::int32_t> t{0, 5, 64, 3, 2, 1};
  EXPECT_NEAR(cross_entropy_value(logits, t), std::log(65.0), 1e-6);
  Tape<float> tape;
  auto v = tape.leaf(logits);
  EXPECT_NEAR(sequence_loss(v, TokenBatch{2, 3, t}).value().item(), std::log(65.0), 1e-5);
}

TEST(Loss, LargeMarginGoesToZero) {
  TensorD logits({1, 2, 4});
  logits.at({0, 0, 2}) = 60.0;
  logits.at({0, 1, 1}) = 60.0;
  EXPECT_LT(cross_entropy_value(logits, std::vector<std::int32_t>{2, 1}), 1e-20);
}

TEST(Loss, MatchesScalarLoop) {
  std::mt19937_64 rng(4);
  auto logits = oracle::random({2, 3, 5}, rng);
  std::vector<std::int32_t> t{4, 0, 1, 3, 3, 2};
  double want = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 5; ++j) z += std::exp(logits[i * 5 + j]);
    want += -(logits[i * 5 + static_cast<std::size_t>(t[i])] - std::log(z));
  }
  want /= 6.0;
  EXPECT_NEAR(cross_entropy_value(logits, t), want, 1e-12);
  Tape<double> tape;
  EXPECT_NEAR(sequence_loss(tape.leaf(logits), TokenBatch{2, 3, t}).value().item(), want, 1e-6);
}

TEST(Accuracy, OneHotAndTies) {
  std::vector<std::int32_t> t{3, 0, 2, 2, 1, 0};
  TensorD onehot({6, 4});
  for (std::size_t i = 0; i < 6; ++i) onehot.at({i, static_cast<std::size_t>(t[i])}) = 1.0;
  EXPECT_EQ(token_accuracy(onehot, t), 1.0);
  TensorD flat({6, 4});
  EXPECT_DOUBLE_EQ(token_accuracy(flat, t), 2.0 / 6.0);  // ties resolve to id 0
}

TEST(Accuracy, RandomLogitsNearChance) {
  std::mt19937_64 rng(5);
  const std::size_t n = 20000, V = 65;
  auto logits = oracle::random({n, V}, rng);
  std::vector<std::int32_t> t(n);
  std::uniform_int_distribution<std::int32_t> d(0, V - 1);
  for (auto& x : t) x = d(rng);
  double p = 1.0 / V, sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(token_accuracy(logits, t), p, 3 * sigma);
}

TEST(Transformer, GradientCheckDeskScale) {
  ModelConfig cfg;
  cfg.vocab = 5;
  cfg.embed = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.context = 4;
  cfg.chi = 2;
  TokenBatch in{1, 4, {0, 3, 1, 4}}, tg{1, 4, {3, 1, 4, 2}};
  for (auto mode : {LinearMode::kDense, LinearMode::kMpo}) {
    cfg.mode = mode;
    auto model = TransformerD::init(cfg, 1);
    perturb(model, 2);
    // One parameter of each role, including MPO cores.
    std::vector<std::string> picks{"tok_emb", "blocks.0.ln1.gain", "blocks.0.attn.q.bias", "ln_f.bias"};
    picks.push_back(mode == LinearMode::kDense ? "blocks.0.attn.k.weight" : "blocks.0.attn.k.core1");
    picks.push_back(mode == LinearMode::kDense ? "lm_head.weight" : "lm_head.core0");
    for (const auto& name : picks) {
      std::size_t idx = 0;
      while (model.params()[idx].name != name) ++idx;
      auto f = [&](const Var<double>& v) {
        auto& tape = *v.tape();
        std::vector<Var<double>> bound;
        for (std::size_t j = 0; j < model.params().size(); ++j) {
          bound.push_back(j == idx ? v : tape.leaf(model.params()[j].value, false));
        }
        return sequence_loss(model.forward(bound, in), tg);
      };
      auto r = grad_check(f, model.params()[idx].value, 1e-4);
      EXPECT_TRUE(r.passed) << to_string(mode) << " " << name << " dev " << r.max_rel_deviation;
    }
  }
}

TEST(Generate, ContractAndDeterminism) {
  auto model = TransformerF::init(small_config(), 0);
  perturb(model, 3);
  std::mt19937_64 r1(0), r2(0);
  std::vector<std::int32_t> prompt{1, 2, 3};
  auto a = generate(model, prompt, 10, 0.0, r1);
  auto b = generate(model, prompt, 10, 0.0, r2);
  EXPECT_EQ(a.size(), 13u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::vector<std::int32_t>(a.begin(), a.begin() + 3), prompt);
  EXPECT_EQ(generate(model, prompt, 0, 1.0, r1), prompt);

  std::mt19937_64 s1(7), s2(7);
  EXPECT_EQ(generate(model, prompt, 12, 1.0, s1), generate(model, prompt, 12, 1.0, s2));
  EXPECT_THROW(generate(model, {1, 99}, 1, 0.0, s1), InputError);
  EXPECT_THROW(generate(model, prompt, 1, -1.0, s1), UsageError);
}

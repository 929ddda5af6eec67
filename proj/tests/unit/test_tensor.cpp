// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mpogpt/errors.hpp"
#include "mpogpt/tensor.hpp"
#include "oracles.hpp"

using namespace mpogpt;

namespace {

TensorD iota(Shape shape) {
  TensorD t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i + 1);
  return t;
}

Shape random_shape(std::mt19937_64& rng, std::size_t rank, std::size_t max_extent = 6) {
  std::uniform_int_distribution<std::size_t> d(1, max_extent);
  Shape s(rank);
  for (auto& e : s) e = d(rng);
  return s;
}

}  // namespace

TEST(Tensor, ConstructionValidatesShape) {
  EXPECT_THROW(TensorD({2, 0}), ShapeError);
  EXPECT_THROW(TensorD({2, 2}, std::vector<double>(3)), ShapeError);
  TensorD s;
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.item(), 0.0);
}

TEST(Tensor, ReshapeIsRowMajorRelabel) {
  auto t = reshape(iota({2, 3}), {3, 2});
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_EQ(t.at({0, 0}), 1);
  EXPECT_EQ(t.at({0, 1}), 2);
  EXPECT_EQ(t.at({1, 0}), 3);
  EXPECT_EQ(t.at({2, 1}), 6);
}

TEST(Tensor, ReshapeRoundTripAndErrors) {
  auto id = identity<double>(4);
  EXPECT_EQ(reshape(reshape(id, {2, 2, 2, 2}), {4, 4}), id);
  EXPECT_EQ(reshape(id, id.shape()), id);
  EXPECT_THROW(reshape(id, {3, 5}), ShapeError);
}

TEST(Tensor, PermuteMatchesIndexLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t rank = 1 + trial % 4;
    auto t = oracle::random(random_shape(rng, rank), rng);
    Axes p(rank);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    auto got = permute(t, p);
    EXPECT_EQ(got, oracle::permute(t, p));
    EXPECT_EQ(permute(got, inverse_permutation(p)), t);
  }
}

TEST(Tensor, PermuteTransposeAndErrors) {
  auto m = iota({2, 3});
  auto t = permute(m, {1, 0});
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_EQ(t.at({2, 1}), m.at({1, 2}));
  EXPECT_EQ(permute(m, {0, 1}), m);
  EXPECT_THROW(permute(m, {0, 0}), ShapeError);
  EXPECT_THROW(permute(m, {0}), ShapeError);
}

TEST(Tensor, TensordotExamples) {
  TensorD v({2}, {1, 2});
  EXPECT_EQ(tensordot(identity<double>(2), v, {1}, {0}), v);

  auto outer = tensordot(iota({2}), iota({3}), {}, {});
  EXPECT_EQ(outer.shape(), (Shape{2, 3}));
  EXPECT_EQ(outer.at({1, 2}), 6);

  std::mt19937_64 rng(2);
  auto a = oracle::random({3, 4}, rng), b = oracle::random({4, 2}, rng);
  EXPECT_LT(oracle::max_abs(tensordot(a, b, {1}, {0}), oracle::matmul(a, b)), 1e-12);
  EXPECT_THROW(tensordot(a, b, {0}, {0}), ShapeError);
}

TEST(Tensor, TensordotMatchesNaiveContractionUpToRank4) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> rank_dist(1, 4);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t ra = rank_dist(rng), rb = rank_dist(rng);
    std::size_t nc = std::uniform_int_distribution<std::size_t>(0, std::min(ra, rb))(rng);
    Shape sa = random_shape(rng, ra), sb = random_shape(rng, rb);
    Axes aa(ra), ba(rb);
    std::iota(aa.begin(), aa.end(), 0);
    std::iota(ba.begin(), ba.end(), 0);
    std::shuffle(aa.begin(), aa.end(), rng);
    std::shuffle(ba.begin(), ba.end(), rng);
    aa.resize(nc);
    ba.resize(nc);
    for (std::size_t k = 0; k < nc; ++k) sb[ba[k]] = sa[aa[k]];
    auto a = oracle::random(sa, rng), b = oracle::random(sb, rng);
    auto got = tensordot(a, b, aa, ba);
    auto want = oracle::tensordot(a, b, aa, ba);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(oracle::max_abs(got, want), 1e-12) << "trial " << trial;
  }
}

TEST(TruncatedSvd, IdentityIsExact) {
  auto r = truncated_svd(identity<double>(3), 3);
  ASSERT_EQ(r.s.size(), 3u);
  for (double s : r.s) EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_EQ(r.discarded_sq, 0.0);
}

TEST(TruncatedSvd, RankOneInput) {
  std::mt19937_64 rng(4);
  auto u = oracle::random({6, 1}, rng), v = oracle::random({1, 4}, rng);
  auto m = oracle::matmul(u, v);
  auto r = truncated_svd(m, 1);
  TensorD approx = matmul(r.u, matmul(TensorD({1, 1}, {r.s[0]}), r.vt));
  EXPECT_LE(oracle::frobenius(m - approx), 1e-6 * oracle::frobenius(m));
}

TEST(TruncatedSvd, DiscardedEnergyMatchesGramOracle) {
  std::mt19937_64 rng(5);
  auto m = oracle::random({6, 4}, rng);
  auto s2 = oracle::squared_singular_values(m);
  auto r = truncated_svd(m, 2);
  EXPECT_NEAR(r.discarded_sq, s2[2] + s2[3], 1e-10);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.s[i] * r.s[i], s2[i], 1e-10);
}

TEST(TruncatedSvd, OrthonormalFactorsAndSorting) {
  std::mt19937_64 rng(6);
  auto m = oracle::random({9, 7}, rng);
  auto r = truncated_svd(m, 7);
  for (std::size_t i = 1; i < r.s.size(); ++i) EXPECT_GE(r.s[i - 1], r.s[i]);
  for (double s : r.s) EXPECT_GE(s, 0.0);
  auto utu = oracle::matmul(oracle::transpose(r.u), r.u);
  auto vvt = oracle::matmul(r.vt, oracle::transpose(r.vt));
  EXPECT_LT(oracle::max_abs(utu, identity<double>(7)), 1e-10);
  EXPECT_LT(oracle::max_abs(vvt, identity<double>(7)), 1e-10);

  auto rf = truncated_svd(m.cast<float>(), 7);
  auto utu_f = oracle::matmul(oracle::transpose(rf.u.cast<double>()), rf.u.cast<double>());
  EXPECT_LT(oracle::max_abs(utu_f, identity<double>(7)), 1e-6);
}

TEST(TruncatedSvd, SignConventionLargestComponentPositive) {
  std::mt19937_64 rng(7);
  auto r = truncated_svd(oracle::random({5, 5}, rng), 5);
  for (std::size_t c = 0; c < 5; ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 5; ++i) {
      if (std::abs(r.u.at({i, c})) > std::abs(r.u.at({best, c}))) best = i;
    }
    EXPECT_GT(r.u.at({best, c}), 0.0);
  }
}

TEST(TruncatedSvd, FullRankReconstruction) {
  std::mt19937_64 rng(8);
  for (std::size_t n : {1u, 5u, 17u, 64u}) {
    auto m = oracle::random({n, (n * 3) / 4 + 1}, rng);
    auto r = truncated_svd(m, 1000);
    TensorD s({r.s.size(), r.s.size()});
    for (std::size_t i = 0; i < r.s.size(); ++i) s.at({i, i}) = r.s[i];
    EXPECT_LE(relative_error(m, matmul(r.u, matmul(s, r.vt))), 1e-12) << n;

    auto mf = m.cast<float>();
    auto rf = truncated_svd(mf, 1000);
    TensorF sf({rf.s.size(), rf.s.size()});
    for (std::size_t i = 0; i < rf.s.size(); ++i) sf.at({i, i}) = static_cast<float>(rf.s[i]);
    EXPECT_LE(relative_error(mf, matmul(rf.u, matmul(sf, rf.vt))), 1e-6) << n;
  }
}

TEST(TruncatedSvd, EckartYoungErrorNonIncreasingInRank) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = oracle::random({8, 8}, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r <= 8; ++r) {
      auto res = truncated_svd(m, r);
      EXPECT_LE(res.discarded_sq, prev + 1e-12);
      EXPECT_NEAR(res.discarded_sq, oracle::tail_energy(m, r), 1e-9);
      prev = res.discarded_sq;
    }
  }
}

TEST(TruncatedSvd, Errors) {
  EXPECT_THROW(truncated_svd(iota({2, 2, 2}), 1), ShapeError);
  auto m = iota({2, 2});
  m[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(truncated_svd(m, 1), NumericError);
}

TEST(Norms, FrobeniusAndRelativeError) {
  TensorD v({2}, {3, 4});
  TensorD z({2});
  EXPECT_DOUBLE_EQ(frobenius_norm(v), 5.0);
  EXPECT_DOUBLE_EQ(relative_error(v, z), 1.0);
  EXPECT_DOUBLE_EQ(relative_error(v, v), 0.0);
  EXPECT_THROW(relative_error(z, v), DomainError);
  EXPECT_THROW(relative_error(v, TensorD({3})), ShapeError);
}

TEST(Kernels, KronAgainstDefinition) {
  std::mt19937_64 rng(10);
  auto a = oracle::random({2, 3}, rng), b = oracle::random({3, 2}, rng);
  auto k = kron(a, b);
  ASSERT_EQ(k.shape(), (Shape{6, 6}));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_DOUBLE_EQ(k.at({i, j}), a.at({i / 3, j / 2}) * b.at({i % 3, j % 2}));
    }
  }
}

TEST(Kernels, GemmTransposeFlags) {
  std::mt19937_64 rng(11);
  auto a = oracle::random({4, 3}, rng), b = oracle::random({5, 3}, rng);
  TensorD c({4, 5});
  kernels::gemm<double>(false, true, 4, 5, 3, 1.0, a.data().data(), b.data().data(), 0.0, c.data().data());
  EXPECT_LT(oracle::max_abs(c, oracle::matmul(a, oracle::transpose(b))), 1e-12);
}

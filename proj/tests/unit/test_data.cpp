// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "mpogpt/data.hpp"
#include "mpogpt/errors.hpp"

using namespace mpogpt;
namespace fs = std::filesystem;

TEST(Vocab, SortedDistinctCodePoints) {
  auto v = build_vocab("aba");
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.encode("aba"), (std::vector<std::int32_t>{0, 1, 0}));
  EXPECT_EQ(v.decode(std::vector<std::int32_t>{1, 0}), "ba");
  EXPECT_THROW(build_vocab(""), InputError);
}

TEST(Vocab, RoundTripIncludingMultibyte) {
  std::string text = "To be, or not to be\nthat is the question: caf\xc3\xa9 \xe2\x80\x94 \xf0\x9f\x8e\xad!";
  auto v = build_vocab(text);
  EXPECT_EQ(v.decode(v.encode(text)), text);
  EXPECT_EQ(utf8_encode(utf8_decode(text)), text);
  for (std::size_t i = 1; i < v.chars().size(); ++i) EXPECT_LT(v.chars()[i - 1], v.chars()[i]);
}

TEST(Vocab, UnknownCharacterNamed) {
  auto v = build_vocab("abc");
  try {
    v.encode("abz");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("U+007A"), std::string::npos) << e.what();
  }
  EXPECT_THROW(v.char_of(3), InputError);
  EXPECT_THROW(v.char_of(-1), InputError);
}

TEST(Utf8, MalformedInputRejected) {
  EXPECT_THROW(utf8_decode("\xc3"), InputError);
  EXPECT_THROW(utf8_decode("\x80"), InputError);
  EXPECT_THROW(utf8_decode("\xc0\xaf"), InputError);
  EXPECT_THROW(utf8_decode("\xed\xa0\x80"), InputError);
}

TEST(Split, NinetyTenAtFloor) {
  std::string text(1001, 'x');
  for (std::size_t i = 0; i < text.size(); ++i) text[i] = static_cast<char>('a' + i % 7);
  auto c = split_corpus(text);
  EXPECT_EQ(c.train.size(), 900u);
  EXPECT_EQ(c.val.size(), 101u);
  EXPECT_EQ(c.vocab.size(), 7u);
  EXPECT_EQ(c.vocab.decode(c.train) + c.vocab.decode(c.val), text);
}

TEST(Batches, TargetsAreShiftedInputs) {
  std::vector<std::int32_t> split(50);
  std::iota(split.begin(), split.end(), 0);
  std::mt19937_64 rng(1);
  auto b = sample_batch(split, 4, 8, rng);
  EXPECT_EQ(b.inputs.batch, 4u);
  EXPECT_EQ(b.inputs.len, 8u);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t t = 0; t < 8; ++t) {
      EXPECT_EQ(b.targets.ids[r * 8 + t], b.inputs.ids[r * 8 + t] + 1);
      if (t > 0) EXPECT_EQ(b.inputs.ids[r * 8 + t], b.inputs.ids[r * 8 + t - 1] + 1);
    }
  }
}

TEST(Batches, OffsetsUniformChiSquare) {
  const std::size_t len = 20, seq = 5, bins = len - seq;  // offsets 0..14
  std::vector<std::int32_t> split(len);
  std::iota(split.begin(), split.end(), 0);
  std::mt19937_64 rng(2);
  std::vector<double> counts(bins, 0.0);
  const std::size_t draws = 15000;
  for (std::size_t i = 0; i < draws / 10; ++i) {
    auto b = sample_batch(split, 10, seq, rng);
    for (std::size_t r = 0; r < 10; ++r) counts[static_cast<std::size_t>(b.inputs.ids[r * seq])] += 1.0;
  }
  double expected = static_cast<double>(draws) / bins, chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 36.12);  // 14 dof, p = 0.001
  EXPECT_GT(counts.front(), 0.0);
  EXPECT_GT(counts.back(), 0.0);
}

TEST(Batches, DeterministicAndErrors) {
  std::vector<std::int32_t> split(30, 1);
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(sample_batch(split, 2, 4, a).inputs.ids, sample_batch(split, 2, 4, b).inputs.ids);
  EXPECT_THROW(sample_batch(std::vector<std::int32_t>(5, 0), 1, 5, a), InputError);
  EXPECT_NO_THROW(sample_batch(std::vector<std::int32_t>(6, 0), 1, 5, a));
}

TEST(UniformIndex, RangeAndEdge) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_index(rng, 3), 3u);
  EXPECT_EQ(uniform_index(rng, 1), 0u);
}

TEST(Hash, KnownDigests) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(CorpusPath, EnvironmentOverride) {
  ::unsetenv(kCorpusEnv);
  EXPECT_EQ(resolve_corpus_path("a/b.txt"), fs::path("a/b.txt"));
  ::setenv(kCorpusEnv, "/tmp/elsewhere.txt", 1);
  EXPECT_EQ(resolve_corpus_path("a/b.txt"), fs::path("/tmp/elsewhere.txt"));
  ::unsetenv(kCorpusEnv);
}

TEST(CorpusFile, ReadAndMissing) {
  auto path = fs::temp_directory_path() / "mpogpt_test_corpus.txt";
  {
    std::ofstream f(path, std::ios::binary);
    f << "hello\nworld";
  }
  EXPECT_EQ(read_text_file(path), "hello\nworld");
  fs::remove(path);
  EXPECT_THROW(read_text_file(path), InputError);
}

TEST(CorpusFile, ExistingFileWithMatchingDigestIsKept) {
  auto path = fs::temp_directory_path() / "mpogpt_fetch_cached.txt";
  {
    std::ofstream f(path, std::ios::binary);
    f << "abc";
  }
  EXPECT_NO_THROW(fetch_corpus("http://127.0.0.1:9/unused", sha256_hex("abc"), path));
  EXPECT_EQ(read_text_file(path), "abc");
  fs::remove(path);
}

TEST(CorpusFile, TinyShakespeareVocabulary) {
  const char* env = std::getenv("MPOGPT_TINY_SHAKESPEARE");
  if (env == nullptr) GTEST_SKIP() << "MPOGPT_TINY_SHAKESPEARE not set";
  auto c = split_corpus(read_text_file(env));
  EXPECT_EQ(c.vocab.size(), 65u);
}

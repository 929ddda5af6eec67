// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mpogpt/model.hpp"

namespace mpogpt {

/// UTF-8 <-> code points. Malformed input throws InputError.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);

/// Character vocabulary: distinct code points sorted ascending.
class CharVocab {
 public:
  CharVocab() = default;
  explicit CharVocab(std::u32string chars);

  std::size_t size() const noexcept { return chars_.size(); }
  const std::u32string& chars() const noexcept { return chars_; }
  std::int32_t id_of(char32_t c) const;
  char32_t char_of(std::int32_t id) const;

  std::vector<std::int32_t> encode(std::string_view text) const;
  std::string decode(std::span<const std::int32_t> ids) const;

 private:
  std::u32string chars_;
  std::unordered_map<char32_t, std::int32_t> index_;
};

CharVocab build_vocab(std::string_view text);

struct SplitCorpus {
  CharVocab vocab;
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> val;
};

/// Tokenizes text and splits at floor(0.9 * length).
SplitCorpus split_corpus(std::string_view text);

struct Batch {
  TokenBatch inputs;
  TokenBatch targets;
};

/// Uniform integer in [0, n) by rejection; stable across standard libraries.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// B windows at independent uniform offsets in [0, len - T - 1]; targets are the
/// inputs shifted by one.
Batch sample_batch(std::span<const std::int32_t> split, std::size_t batch, std::size_t seq, std::mt19937_64& rng);

inline constexpr const char* kCorpusEnv = "MPOGPT_CORPUS";

/// $MPOGPT_CORPUS if set, otherwise `fallback`.
std::filesystem::path resolve_corpus_path(const std::filesystem::path& fallback);

std::string read_text_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Downloads `url` to `dest` unless dest already exists with the expected
/// digest. A digest mismatch throws InputError and leaves no file behind.
void fetch_corpus(const std::string& url, const std::string& sha256, const std::filesystem::path& dest);

}  // namespace mpogpt

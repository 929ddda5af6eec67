// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <iomanip>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "mpogpt/errors.hpp"

namespace mpogpt {

std::u32string utf8_decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size()) {
      throw InputError("invalid UTF-8 at byte " + std::to_string(i));
    }
    char32_t cp = len == 1 ? b0 : b0 & (0x7F >> len);
    for (std::size_t k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) throw InputError("invalid UTF-8 at byte " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw InputError("invalid UTF-8 code point at byte " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

CharVocab::CharVocab(std::u32string chars) : chars_(std::move(chars)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (i > 0 && chars_[i] <= chars_[i - 1]) throw InputError("vocabulary must be strictly increasing");
    index_.emplace(chars_[i], static_cast<std::int32_t>(i));
  }
}

std::int32_t CharVocab::id_of(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) {
    throw InputError("character '" + utf8_encode(std::u32string(1, c)) + "' (U+" +
                     [&] {
                       std::ostringstream os;
                       os << std::hex << std::uppercase << std::setw(4) << std::setfill('0') << static_cast<std::uint32_t>(c);
                       return os.str();
                     }() +
                     ") is not in the vocabulary");
  }
  return it->second;
}

char32_t CharVocab::char_of(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= chars_.size()) {
    throw InputError("token id " + std::to_string(id) + " outside the vocabulary");
  }
  return chars_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> CharVocab::encode(std::string_view text) const {
  auto cps = utf8_decode(text);
  std::vector<std::int32_t> ids;
  ids.reserve(cps.size());
  for (char32_t c : cps) ids.push_back(id_of(c));
  return ids;
}

std::string CharVocab::decode(std::span<const std::int32_t> ids) const {
  std::u32string cps;
  cps.reserve(ids.size());
  for (auto id : ids) cps.push_back(char_of(id));
  return utf8_encode(cps);
}

CharVocab build_vocab(std::string_view text) {
  if (text.empty()) throw InputError("cannot build a vocabulary from empty text");
  auto cps = utf8_decode(text);
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  return CharVocab(std::move(cps));
}

SplitCorpus split_corpus(std::string_view text) {
  SplitCorpus out;
  out.vocab = build_vocab(text);
  auto ids = out.vocab.encode(text);
  std::size_t cut = ids.size() * 9 / 10;
  out.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
  out.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
  return out;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw UsageError("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

Batch sample_batch(std::span<const std::int32_t> split, std::size_t batch, std::size_t seq, std::mt19937_64& rng) {
  if (batch == 0 || seq == 0) throw UsageError("sample_batch: batch and seq must be positive");
  if (split.size() < seq + 1) {
    throw InputError("corpus split of " + std::to_string(split.size()) + " tokens is shorter than seq + 1 = " +
                     std::to_string(seq + 1));
  }
  Batch b{{batch, seq, {}}, {batch, seq, {}}};
  b.inputs.ids.reserve(batch * seq);
  b.targets.ids.reserve(batch * seq);
  const std::uint64_t offsets = split.size() - seq;  // [0, len - T - 1]
  for (std::size_t i = 0; i < batch; ++i) {
    auto off = static_cast<std::size_t>(uniform_index(rng, offsets));
    b.inputs.ids.insert(b.inputs.ids.end(), split.begin() + off, split.begin() + off + seq);
    b.targets.ids.insert(b.targets.ids.end(), split.begin() + off + 1, split.begin() + off + seq + 1);
  }
  return b;
}

std::filesystem::path resolve_corpus_path(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv(kCorpusEnv); env != nullptr && *env != '\0') return env;
  return fallback;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

void fetch_corpus(const std::string& url, const std::string& sha256, const std::filesystem::path& dest) {
  if (std::filesystem::exists(dest) && sha256_hex(read_text_file(dest)) == sha256) return;

  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("malformed URL '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_follow_location(true);
  auto res = client.Get(path);
  if (!res) throw InputError("download of '" + url + "' failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw InputError("download of '" + url + "' returned HTTP " + std::to_string(res->status));

  std::string got = sha256_hex(res->body);
  if (got != sha256) throw InputError("checksum mismatch for '" + url + "': expected " + sha256 + ", got " + got);

  if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
  auto tmp = dest;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, dest);
}

}  // namespace mpogpt

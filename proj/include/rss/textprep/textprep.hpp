// SPDX-License-Identifier: Apache-2.0
#pragma once

// Corpus preparation: rule-based tokenization, byte-pair encoding,
// vocabulary construction and id-sequence corpora.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rss {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Lowercases ASCII letters, splits on whitespace and makes every ASCII
/// punctuation character its own token.
std::vector<std::string> tokenize(std::string_view line);

/// Splits a UTF-8 string into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view s);

class BpeModel {
 public:
  /// Appended to the last symbol of every word.
  static constexpr std::string_view kEndOfWord = "</w>";

  BpeModel() = default;
  explicit BpeModel(std::vector<std::pair<std::string, std::string>> merges);

  const std::vector<std::pair<std::string, std::string>>& merges() const noexcept { return merges_; }

  std::vector<std::string> encode(std::string_view word) const;
  /// Encodes every whitespace token of a pre-tokenized sentence.
  std::vector<std::string> encode_tokens(const std::vector<std::string>& words) const;

  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
};

/// Greedy most-frequent-pair merging over the word frequencies of
/// `sentences`. Ties go to the lexicographically smallest pair. Stops early
/// when no pair occurs. Throws std::invalid_argument on an empty corpus.
BpeModel bpe_train(const std::vector<std::vector<std::string>>& sentences, std::size_t num_merges);

/// Joins subwords back into space-separated words.
std::string bpe_decode(const std::vector<std::string>& subwords);

class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr std::size_t kNumReserved = 3;

  /// Reserved tokens only.
  Vocabulary();
  /// Reserved tokens followed by `tokens` (which must not repeat or clash).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;  // kUnk if absent
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Symbols of the BPE-encoded sentences ordered by descending frequency then
/// lexicographically; symbols seen fewer than `min_count` times are left out.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& encoded_sentences, std::size_t min_count = 1);

enum class Split { Train, Dev, Test, Probe };
std::string_view to_string(Split s);

/// Sentences as id sequences, each ending in exactly one <eos>.
struct Corpus {
  std::vector<TokenSeq> sentences;
  Split split = Split::Train;
  std::size_t dropped_too_long = 0;
  std::size_t dropped_empty = 0;

  std::size_t size() const noexcept { return sentences.size(); }
  std::size_t token_count() const noexcept;
};

/// One sentence per line -> tokenize -> BPE -> ids, <eos> appended. Lines
/// whose id sequence (including <eos>) exceeds max_len are dropped and
/// counted. Throws std::runtime_error if a file cannot be read.
Corpus build_corpus(const std::vector<std::filesystem::path>& files, const BpeModel& bpe, const Vocabulary& vocab,
                    std::size_t max_len = 100, Split split = Split::Train);

Corpus build_corpus_from_lines(const std::vector<std::string>& lines, const BpeModel& bpe, const Vocabulary& vocab,
                               std::size_t max_len = 100, Split split = Split::Train);

/// Uniform i.i.d. non-reserved tokens, one sequence per requested length,
/// each followed by <eos>.
Corpus sample_random_sequences(std::size_t vocab_size, const std::vector<std::size_t>& lengths, std::uint64_t seed);

/// Id files: one sentence per line, space-separated decimal ids including the trailing <eos>.
void save_ids(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_ids(const std::filesystem::path& path, Split split = Split::Train);

/// Ids (optionally ending in <eos>) back to text.
std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace rss

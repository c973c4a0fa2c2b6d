// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rss/textprep/textprep.hpp"

namespace rss {
namespace {

const std::vector<std::string> kReserved{"<bos>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_(kReserved) {
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("Vocabulary: empty token");
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write vocabulary: " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < kNumReserved || !std::equal(kReserved.begin(), kReserved.end(), lines.begin())) {
    throw std::runtime_error("vocabulary file must start with <bos>, <eos>, <unk>: " + path.string());
  }
  return Vocabulary(std::vector<std::string>(lines.begin() + kNumReserved, lines.end()));
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& encoded_sentences, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : encoded_sentences)
    for (const auto& t : s) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> items;
  for (auto& [t, c] : freq) {
    if (c >= min_count && std::find(kReserved.begin(), kReserved.end(), t) == kReserved.end()) items.emplace_back(t, c);
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [t, c] : items) tokens.push_back(t);
  return Vocabulary(tokens);
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
    case Split::Probe: return "probe";
  }
  return "unknown";
}

std::size_t Corpus::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Corpus build_corpus_from_lines(const std::vector<std::string>& lines, const BpeModel& bpe, const Vocabulary& vocab,
                               std::size_t max_len, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::unordered_map<std::string, std::vector<TokenId>> cache;
  for (const auto& line : lines) {
    TokenSeq ids;
    for (const auto& word : tokenize(line)) {
      auto it = cache.find(word);
      if (it == cache.end()) {
        std::vector<TokenId> sub;
        for (const auto& s : bpe.encode(word)) sub.push_back(vocab.id(s));
        it = cache.emplace(word, std::move(sub)).first;
      }
      ids.insert(ids.end(), it->second.begin(), it->second.end());
    }
    if (ids.empty()) {
      ++corpus.dropped_empty;
      continue;
    }
    ids.push_back(Vocabulary::kEos);
    if (ids.size() > max_len) {
      ++corpus.dropped_too_long;
      continue;
    }
    corpus.sentences.push_back(std::move(ids));
  }
  return corpus;
}

Corpus build_corpus(const std::vector<std::filesystem::path>& files, const BpeModel& bpe, const Vocabulary& vocab,
                    std::size_t max_len, Split split) {
  std::vector<std::string> lines;
  for (const auto& f : files) {
    auto l = read_lines(f);
    lines.insert(lines.end(), std::make_move_iterator(l.begin()), std::make_move_iterator(l.end()));
  }
  return build_corpus_from_lines(lines, bpe, vocab, max_len, split);
}

Corpus sample_random_sequences(std::size_t vocab_size, const std::vector<std::size_t>& lengths, std::uint64_t seed) {
  if (vocab_size <= Vocabulary::kNumReserved) {
    throw std::invalid_argument("sample_random_sequences: vocabulary has no non-reserved tokens");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> pick(static_cast<TokenId>(Vocabulary::kNumReserved),
                                              static_cast<TokenId>(vocab_size - 1));
  Corpus corpus;
  corpus.split = Split::Probe;
  for (std::size_t len : lengths) {
    TokenSeq s(len);
    for (auto& t : s) t = pick(rng);
    s.push_back(Vocabulary::kEos);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

void save_ids(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write id file: " + path.string());
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
    os << '\n';
  }
}

Corpus load_ids(const std::filesystem::path& path, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TokenSeq s;
    long long v;
    while (ss >> v) s.push_back(static_cast<TokenId>(v));
    if (!ss.eof() || s.empty() || s.back() != Vocabulary::kEos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed id sequence");
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab) {
  std::vector<std::string> sub;
  for (TokenId id : ids) {
    if (id == Vocabulary::kEos) break;
    if (id == Vocabulary::kBos) continue;
    sub.push_back(vocab.token(id));
  }
  return bpe_decode(sub);
}

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <set>
#include <stdexcept>

#include "rss/textprep/textprep.hpp"

namespace rss {
namespace {

using Pair = std::pair<std::string, std::string>;

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> sym = utf8_chars(word);
  if (!sym.empty()) sym.back() += BpeModel::kEndOfWord;
  return sym;
}

void merge_in_place(std::vector<std::string>& sym, const Pair& p) {
  std::vector<std::string> out;
  out.reserve(sym.size());
  for (std::size_t i = 0; i < sym.size(); ++i) {
    if (i + 1 < sym.size() && sym[i] == p.first && sym[i + 1] == p.second) {
      out.push_back(sym[i] + sym[i + 1]);
      ++i;
    } else {
      out.push_back(std::move(sym[i]));
    }
  }
  sym = std::move(out);
}

// Pair counts with an ordered index so the best pair (highest count, then
// lexicographically smallest) is always at begin().
class PairStats {
 public:
  void add(const Pair& p, long delta) {
    if (delta == 0) return;
    auto it = counts_.find(p);
    long old = it == counts_.end() ? 0 : it->second;
    if (old > 0) order_.erase({-old, p});
    const long now = old + delta;
    if (now > 0) {
      counts_[p] = now;
      order_.insert({-now, p});
    } else if (it != counts_.end()) {
      counts_.erase(it);
    }
  }
  bool empty() const { return order_.empty(); }
  const Pair& best() const { return order_.begin()->second; }

 private:
  std::map<Pair, long> counts_;
  std::set<std::pair<long, Pair>> order_;
};

}  // namespace

BpeModel::BpeModel(std::vector<std::pair<std::string, std::string>> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    if (!rank_.emplace(merges_[i], i).second) {
      throw std::invalid_argument("BpeModel: duplicate merge '" + merges_[i].first + " " + merges_[i].second + "'");
    }
  }
}

std::vector<std::string> BpeModel::encode(std::string_view word) const {
  std::vector<std::string> sym = initial_symbols(word);
  while (sym.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      auto it = rank_.find({sym[i], sym[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    merge_in_place(sym, merges_[best_rank]);
  }
  return sym;
}

std::vector<std::string> BpeModel::encode_tokens(const std::vector<std::string>& words) const {
  std::vector<std::string> out;
  for (const auto& w : words) {
    auto sub = encode(w);
    out.insert(out.end(), std::make_move_iterator(sub.begin()), std::make_move_iterator(sub.end()));
  }
  return out;
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write BPE model: " + path.string());
  for (const auto& [a, b] : merges_) os << a << ' ' << b << '\n';
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::vector<Pair> merges;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.find(' ', sp + 1) != std::string::npos) {
      throw std::runtime_error("malformed BPE merge line: '" + line + "'");
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return BpeModel(std::move(merges));
}

BpeModel bpe_train(const std::vector<std::vector<std::string>>& sentences, std::size_t num_merges) {
  std::map<std::string, long> freq;
  for (const auto& s : sentences)
    for (const auto& w : s) ++freq[w];
  if (freq.empty()) throw std::invalid_argument("bpe_train: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  std::map<Pair, std::set<std::size_t>> where;
  PairStats stats;
  for (const auto& [w, c] : freq) {
    words.push_back(initial_symbols(w));
    counts.push_back(c);
  }
  auto account = [&](std::size_t wi, long sign) {
    const auto& sym = words[wi];
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      Pair p{sym[i], sym[i + 1]};
      stats.add(p, sign * counts[wi]);
      if (sign > 0) where[p].insert(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  std::vector<Pair> merges;
  std::set<Pair> used;
  while (merges.size() < num_merges && !stats.empty()) {
    const Pair best = stats.best();
    const std::set<std::size_t> affected = where[best];
    for (std::size_t wi : affected) {
      account(wi, -1);
      merge_in_place(words[wi], best);
      account(wi, +1);
    }
    where.erase(best);
    // A pair can re-form from symbols built by different merge paths; its
    // rank is already fixed, so it is applied but not listed twice.
    if (used.insert(best).second) merges.push_back(best);
  }
  return BpeModel(std::move(merges));
}

std::string bpe_decode(const std::vector<std::string>& subwords) {
  std::string out;
  for (const auto& s : subwords) out += s;
  std::string text;
  std::size_t pos = 0;
  while (true) {
    const auto at = out.find(BpeModel::kEndOfWord, pos);
    if (at == std::string::npos) {
      text += out.substr(pos);
      break;
    }
    text += out.substr(pos, at - pos);
    text += ' ';
    pos = at + BpeModel::kEndOfWord.size();
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

}  // namespace rss

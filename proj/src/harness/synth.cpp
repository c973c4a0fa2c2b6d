// SPDX-License-Identifier: Apache-2.0
#include "rss/harness/synth.hpp"

#include <set>

namespace rss {

namespace {

const std::vector<std::string> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
                                       "st", "tr", "pl", "gr", "sh", "ch", "th"};
const std::vector<std::string> kVowels{"a", "e", "i", "o", "u", "ai", "ou", "ee"};
const std::vector<std::string> kCodas{"", "", "", "n", "r", "l", "s", "m", "k", "t"};
const std::vector<std::string> kDeterminers{"the", "a", "this", "every", "some", "no", "that"};
const std::vector<std::string> kPrepositions{"in", "on", "under", "near", "with", "behind", "over"};
const std::vector<std::string> kInterjections{"yes", "no", "hello", "thanks", "okay"};

std::vector<std::string> make_words(std::mt19937_64& rng, std::size_t n, std::set<std::string>& used,
                                    const std::string& suffix) {
  std::uniform_int_distribution<std::size_t> syl(1, 3);
  std::vector<std::string> words;
  while (words.size() < n) {
    std::string w;
    const std::size_t k = syl(rng);
    for (std::size_t i = 0; i < k; ++i) {
      w += kOnsets[rng() % kOnsets.size()];
      w += kVowels[rng() % kVowels.size()];
      w += kCodas[rng() % kCodas.size()];
    }
    w += suffix;
    if (used.insert(w).second) words.push_back(w);
  }
  return words;
}

}  // namespace

SynthGrammar::SynthGrammar(std::uint64_t lexicon_seed) : SynthGrammar(lexicon_seed, Sizes{}) {}

SynthGrammar::SynthGrammar(std::uint64_t lexicon_seed, Sizes sizes) {
  std::mt19937_64 rng(lexicon_seed);
  std::set<std::string> used(kDeterminers.begin(), kDeterminers.end());
  used.insert(kPrepositions.begin(), kPrepositions.end());
  used.insert(kInterjections.begin(), kInterjections.end());
  used.insert("and");
  nouns_ = make_words(rng, sizes.nouns, used, "");
  verbs_ = make_words(rng, sizes.verbs, used, "s");
  adjectives_ = make_words(rng, sizes.adjectives, used, "y");
  adverbs_ = make_words(rng, sizes.adverbs, used, "ly");
  names_ = make_words(rng, sizes.names, used, "o");
}

std::size_t SynthGrammar::lexicon_size() const {
  return nouns_.size() + verbs_.size() + adjectives_.size() + adverbs_.size() + names_.size() + kDeterminers.size() +
         kPrepositions.size() + kInterjections.size() + 1;
}

const std::string& SynthGrammar::zipf(std::mt19937_64& rng, const std::vector<std::string>& words) {
  // P(rank r) proportional to 1/(r+1), by inversion over the cumulative sum.
  double total = 0.0;
  for (std::size_t r = 0; r < words.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t r = 0; r < words.size(); ++r) {
    u -= 1.0 / static_cast<double>(r + 1);
    if (u <= 0.0) return words[r];
  }
  return words.back();
}

void SynthGrammar::noun_phrase(std::mt19937_64& rng, std::vector<std::string>& out, int depth) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < 0.2) {
    out.push_back(zipf(rng, names_));
    return;
  }
  out.push_back(kDeterminers[rng() % kDeterminers.size()]);
  const double a = u(rng);
  if (a < 0.45) out.push_back(zipf(rng, adjectives_));
  if (a < 0.12) out.push_back(zipf(rng, adjectives_));
  out.push_back(zipf(rng, nouns_));
  if (depth < 2 && u(rng) < 0.2) {
    out.push_back(kPrepositions[rng() % kPrepositions.size()]);
    noun_phrase(rng, out, depth + 1);
  }
}

void SynthGrammar::verb_phrase(std::mt19937_64& rng, std::vector<std::string>& out, int depth) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.push_back(zipf(rng, verbs_));
  if (u(rng) < 0.65) noun_phrase(rng, out, depth + 1);
  if (u(rng) < 0.2) out.push_back(zipf(rng, adverbs_));
  if (depth < 2 && u(rng) < 0.25) {
    out.push_back(kPrepositions[rng() % kPrepositions.size()]);
    noun_phrase(rng, out, depth + 1);
  }
}

std::string SynthGrammar::sentence(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> w;
  if (u(rng) < 0.06) {
    w.push_back(kInterjections[rng() % kInterjections.size()]);
  } else {
    noun_phrase(rng, w, 0);
    verb_phrase(rng, w, 0);
    if (u(rng) < 0.2) {
      w.push_back("and");
      noun_phrase(rng, w, 1);
      verb_phrase(rng, w, 1);
    }
  }
  std::string s;
  for (const auto& x : w) s += x + ' ';
  s += u(rng) < 0.9 ? "." : "!";
  return s;
}

std::vector<std::string> SynthGrammar::generate(std::size_t n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sentence(rng));
  return out;
}

}  // namespace rss

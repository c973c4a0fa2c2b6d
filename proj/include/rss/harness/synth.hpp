// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rss {

/// A small probabilistic grammar over pseudo-words with Zipfian word choice.
/// The lexicon is fixed by `lexicon_seed`; sentences by the generate() seed.
class SynthGrammar {
 public:
  struct Sizes {
    std::size_t nouns = 160, verbs = 90, adjectives = 60, adverbs = 25, names = 40;
  };

  explicit SynthGrammar(std::uint64_t lexicon_seed = 7);
  SynthGrammar(std::uint64_t lexicon_seed, Sizes sizes);

  std::vector<std::string> generate(std::size_t n, std::uint64_t seed) const;
  std::size_t lexicon_size() const;

 private:
  std::string sentence(std::mt19937_64& rng) const;
  void noun_phrase(std::mt19937_64& rng, std::vector<std::string>& out, int depth) const;
  void verb_phrase(std::mt19937_64& rng, std::vector<std::string>& out, int depth) const;
  static const std::string& zipf(std::mt19937_64& rng, const std::vector<std::string>& words);

  std::vector<std::string> nouns_, verbs_, adjectives_, adverbs_, names_;
};

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "rss/lm/checkpoint.hpp"
#include "rss/lm/model.hpp"
#include "rss/lm/train.hpp"
#include "rss/numkernel/grad_check.hpp"
#include "test_support.hpp"

using namespace rss;

namespace {

LmConfig tiny(std::size_t d = 3, std::size_t vocab = 5, std::size_t layers = 2) {
  LmConfig c;
  c.layers = layers;
  c.units = d;
  c.vocab = vocab;
  c.dropout = 0.0;
  return c;
}

LmParameters random_params(const LmConfig& c, std::uint64_t seed, double scale = 0.5) {
  LmParameters p = LmParameters::zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& [name, a] : p.arrays())
    for (double& v : a) v = nd(rng);
  return p;
}

// Whole-model step written directly from the definitions.
std::vector<double> scalar_logits(const LmParameters& p, std::vector<std::vector<double>>& h,
                                  std::vector<std::vector<double>>& c, TokenId token) {
  const std::size_t d = p.config.units;
  std::vector<double> x(p.embedding.row(static_cast<std::size_t>(token)).begin(),
                        p.embedding.row(static_cast<std::size_t>(token)).end());
  for (std::size_t l = 0; l < p.config.layers; ++l) {
    auto out = test::scalar_lstm_step(p.layers[l], x, h[l], c[l]);
    h[l] = out.h;
    c[l] = out.c;
    x = out.h;
  }
  std::vector<double> logits(p.config.vocab);
  for (std::size_t v = 0; v < p.config.vocab; ++v) {
    logits[v] = p.out_bias[v];
    for (std::size_t j = 0; j < d; ++j) logits[v] += p.embedding(v, j) * x[j];
  }
  return logits;
}

std::vector<double> pack(const LmParameters& p) {
  std::vector<double> v;
  for (const auto& [n, a] : p.arrays()) v.insert(v.end(), a.begin(), a.end());
  return v;
}

LmParameters unpack(const LmConfig& c, std::span<const double> v) {
  LmParameters p = LmParameters::zeros(c);
  std::size_t k = 0;
  for (auto& [n, a] : p.arrays())
    for (double& x : a) x = v[k++];
  return p;
}

Corpus corpus_of(std::vector<TokenSeq> s) {
  Corpus c;
  c.sentences = std::move(s);
  return c;
}

}  // namespace

TEST_CASE("init_params") {
  const LmConfig c = tiny(2, 4);
  const LmParameters a = init_params(c, 123);
  CHECK(a == init_params(c, 123));
  CHECK(a.checksum() == init_params(c, 123).checksum());
  CHECK_FALSE(a == init_params(c, 124));
  // Hand count: embedding 4x2 = 8; per layer wx 8x2 + wh 8x2 + bias 8 = 40,
  // two layers = 80; output bias 4. Total 92.
  CHECK(a.parameter_count() == 92);
  CHECK(parameter_count(c) == 92);
  for (const auto& [name, arr] : a.arrays()) {
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const bool forget_bias = name.ends_with(".bias") && i >= 2 && i < 4;
      if (forget_bias) CHECK(arr[i] == 1.0);
      else CHECK(std::abs(arr[i]) < 0.1);
    }
  }
  CHECK(c.model_dim() == 8);
}

TEST_CASE("forward_step") {
  SUBCASE("zero params give zero logits") {
    const LmConfig c = tiny();
    const auto r = forward_step(LmParameters::zeros(c), HiddenState::zeros(c), 3);
    for (double v : r.logits) CHECK(v == 0.0);
  }
  SUBCASE("matches scalar re-implementation over a sequence") {
    const LmConfig c = tiny(4, 7);
    const LmParameters p = random_params(c, 9);
    HiddenState s = HiddenState::zeros(c);
    std::vector<std::vector<double>> h(2, std::vector<double>(4)), cc = h;
    for (TokenId t : {0, 4, 6, 3, 1}) {
      const auto r = forward_step(p, s, t);
      const auto ref = scalar_logits(p, h, cc, t);
      for (std::size_t v = 0; v < 7; ++v) CHECK(std::abs(r.logits[v] - ref[v]) <= 1e-12);
      s = r.state;
    }
  }
  SUBCASE("inference mode is deterministic") {
    const LmConfig c = tiny(4, 7);
    const LmParameters p = random_params(c, 10);
    CHECK(forward_step(p, HiddenState::zeros(c), 5).logits == forward_step(p, HiddenState::zeros(c), 5).logits);
  }
  SUBCASE("invalid token") {
    const LmConfig c = tiny();
    CHECK_THROWS_AS(forward_step(LmParameters::zeros(c), HiddenState::zeros(c), 5), std::out_of_range);
    CHECK_THROWS_AS(forward_step(LmParameters::zeros(c), HiddenState::zeros(c), -1), std::out_of_range);
  }
}

TEST_CASE("score_sentence and perplexity") {
  const LmConfig c = tiny(3, 5);
  SUBCASE("uniform model") {
    const LmParameters z = LmParameters::zeros(c);
    const TokenSeq s{3, 4, 3, Vocabulary::kEos};
    CHECK(score_sentence(z, s) == doctest::Approx(4 * std::log(1.0 / 5.0)).epsilon(1e-14));
    CHECK(perplexity(z, corpus_of({s, {1}})) == doctest::Approx(5.0).epsilon(1e-13));
  }
  SUBCASE("score is the sum of independently computed step log-probs") {
    const LmParameters p = random_params(c, 4);
    const TokenSeq s{2, 4, 3, 3, Vocabulary::kEos};
    HiddenState st = HiddenState::zeros(c);
    double total = 0.0;
    TokenId in = Vocabulary::kBos;
    for (TokenId t : s) {
      const auto r = forward_step(p, st, in);
      double mx = -1e300, z = 0.0;
      for (double v : r.logits) mx = std::max(mx, v);
      for (double v : r.logits) z += std::exp(v - mx);
      total += r.logits[static_cast<std::size_t>(t)] - mx - std::log(z);
      st = r.state;
      in = t;
    }
    CHECK(std::abs(score_sentence(p, s) - total) <= 1e-12);
    CHECK(score_sentence(p, s) <= 0.0);
    const double ppl = perplexity(p, corpus_of({s}));
    CHECK(ppl == doctest::Approx(std::exp(-score_sentence(p, s) / 5.0)).epsilon(1e-13));
    CHECK(ppl >= 1.0);
  }
  SUBCASE("errors") {
    const LmParameters p = LmParameters::zeros(c);
    CHECK_THROWS_AS(score_sentence(p, {}), std::invalid_argument);
    CHECK_THROWS_AS(score_sentence(p, {3, 4}), std::invalid_argument);
    CHECK_THROWS_AS(perplexity(p, Corpus{}), std::invalid_argument);
  }
}

TEST_CASE("NLL gradient matches finite differences on a tiny model") {
  const LmConfig c = tiny(3, 5);
  const TokenSeq s{3, 4, 2, Vocabulary::kEos};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LmParameters p = random_params(c, seed);
    for (bool with_dropout : {false, true}) {
      std::vector<DropoutMasks> masks;
      if (with_dropout) {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution keep(0.7);
        masks.resize(s.size());
        for (auto& m : masks) {
          m.between.assign(1, DenseVector(3));
          m.readout = DenseVector(3);
          for (double& v : m.between[0]) v = keep(rng) ? 1 / 0.7 : 0.0;
          for (double& v : m.readout) v = keep(rng) ? 1 / 0.7 : 0.0;
        }
      }
      LmParameters g = LmParameters::zeros(c);
      sentence_nll_grad(p, s, masks, &g);
      const double err = grad_check(
          [&](std::span<const double> v) { return sentence_nll_grad(unpack(c, v), s, masks, nullptr); },
          [&](std::span<const double>) { return DenseVector(pack(g)); }, pack(p), 1e-5);
      CHECK(err <= 1e-5);
    }
  }
}

TEST_CASE("gradient clipping bounds the global norm") {
  const LmConfig c = tiny(3, 5);
  LmParameters g = random_params(c, 3, 5.0);
  const double before = clip_global_norm(g, 1.0);
  CHECK(before > 1.0);
  CHECK(global_norm(g) <= 1.0 + 1e-9);
  LmParameters small = random_params(c, 3, 1e-4);
  const LmParameters copy = small;
  clip_global_norm(small, 1.0);
  CHECK(small == copy);
}

TEST_CASE("training") {
  SUBCASE("memorizes one repeated sentence") {
    LmConfig c = tiny(8, 10);
    c.dropout = 0.0;
    TrainConfig tc;
    tc.lr = 0.02;
    tc.batch_size = 4;
    tc.eval_interval = 50;
    tc.seed = 7;
    const TokenSeq s{3, 5, 7, 9, 4, Vocabulary::kEos};
    const Corpus corpus = corpus_of(std::vector<TokenSeq>(800, s));
    const auto r = train(corpus, corpus_of({s}), c, tc);
    CHECK(r.log.back().step == 200);
    CHECK(perplexity(r.params, corpus_of({s})) < 1.05);
    for (const auto& rec : r.log) CHECK(rec.lr > 0.0);
  }
  SUBCASE("beats the unigram baseline and is deterministic") {
    // First-order pattern: token k is followed by k+1 (mod), which no unigram
    // model can capture.
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> start(3, 11), len(2, 6);
    std::vector<TokenSeq> sents;
    for (int i = 0; i < 600; ++i) {
      TokenSeq s;
      int t = start(rng);
      for (int k = len(rng); k > 0; --k) {
        s.push_back(t);
        t = 3 + (t - 3 + 1) % 9;
      }
      s.push_back(Vocabulary::kEos);
      sents.push_back(s);
    }
    const Corpus tr = corpus_of({sents.begin(), sents.begin() + 500});
    const Corpus dev = corpus_of({sents.begin() + 500, sents.end()});
    LmConfig c = tiny(8, 12);
    c.dropout = 0.1;
    TrainConfig tc;
    tc.lr = 0.01;
    tc.batch_size = 10;
    tc.eval_interval = 10;
    tc.seed = 11;
    const auto a = train(tr, dev, c, tc);
    CHECK(a.log.back().dev_ppl < unigram_perplexity(tr, dev, 12));
    const auto b = train(tr, dev, c, tc);
    CHECK(a.log == b.log);
    CHECK(a.params == b.params);
    for (std::size_t i = 1; i < a.log.size(); ++i) {
      if (a.log[i].dev_ppl > a.log[i - 1].dev_ppl) CHECK(a.log[i].lr == doctest::Approx(a.log[i - 1].lr / 2));
    }
  }
  SUBCASE("divergence is reported") {
    LmConfig c = tiny(4, 6);
    TrainConfig tc;
    tc.lr = std::numeric_limits<double>::infinity();
    tc.batch_size = 1;
    const Corpus corpus = corpus_of({{3, 4, 1}, {5, 1}, {3, 1}});
    CHECK_THROWS_AS(train(corpus, corpus, c, tc), std::runtime_error);
  }
  SUBCASE("empty corpora rejected") {
    CHECK_THROWS_AS(train(Corpus{}, corpus_of({{1}}), tiny(), TrainConfig{}), std::invalid_argument);
  }
}

TEST_CASE("sampling") {
  const LmConfig c = tiny(3, 6);
  const LmParameters z = LmParameters::zeros(c);
  CHECK(sample(z, 50, 4) == sample(z, 50, 4));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = sample(z, 7, seed);
    CHECK(s.size() >= 1);
    CHECK(s.size() <= 7);
  }
  // Uniform model: every emitted token (including <eos>) is uniform over V.
  std::vector<double> counts(6, 0.0);
  double n = 0;
  for (std::uint64_t seed = 0; seed < 20000; ++seed) {
    for (TokenId t : sample(z, 100, seed)) {
      counts[static_cast<std::size_t>(t)] += 1;
      n += 1;
    }
  }
  double stat = 0.0;
  for (double k : counts) stat += (k - n / 6) * (k - n / 6) / (n / 6);
  CHECK(stat < boost::math::quantile(boost::math::chi_squared(5.0), 0.999));
}

TEST_CASE("checkpoint round trip") {
  LmConfig c = tiny(4, 9);
  c.dropout = 0.25;
  const LmParameters p = random_params(c, 21);
  const auto path = std::filesystem::temp_directory_path() / "rss_lm_test.ckpt";
  save_checkpoint(p, path);
  const LmParameters q = load_checkpoint(path);
  CHECK(q == p);
  CHECK(q.config == c);
  CHECK(q.checksum() == p.checksum());

  std::ofstream(path, std::ios::binary) << "NOTACKPT";
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/rss.ckpt"), std::runtime_error);
}

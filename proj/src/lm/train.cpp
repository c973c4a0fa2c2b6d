// SPDX-License-Identifier: Apache-2.0
#include "rss/lm/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rss/util/seed.hpp"

#include "json.hpp"

namespace rss {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be > 0");
  if (batch_size < 1 || eval_interval < 1 || threads < 1) {
    throw std::invalid_argument("TrainConfig: batch_size, eval_interval and threads must be >= 1");
  }
}

std::string to_json_line(const TrainLogRecord& r) {
  nlohmann::json j{{"step", r.step}, {"lr", r.lr}, {"dev_ppl", r.dev_ppl}, {"train_nll", r.train_nll}};
  return j.dump();
}

double global_norm(const LmParameters& g) {
  double s = 0.0;
  for (const auto& [name, a] : g.arrays())
    for (double v : a) s += v * v;
  return std::sqrt(s);
}

double clip_global_norm(LmParameters& g, double max_norm) {
  const double n = global_norm(g);
  if (n > max_norm) {
    const double scale = max_norm / n;
    for (auto& [name, a] : g.arrays())
      for (double& v : a) v *= scale;
  }
  return n;
}

AdamState::AdamState(const LmConfig& config) : m_(LmParameters::zeros(config)), v_(LmParameters::zeros(config)) {}

void AdamState::step(LmParameters& params, const LmParameters& grads, const TrainConfig& tc, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(t_));
  auto pa = params.arrays();
  const auto ga = grads.arrays();
  auto ma = m_.arrays();
  auto va = v_.arrays();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    auto p = pa[k].second;
    auto g = ga[k].second;
    auto m = ma[k].second;
    auto v = va[k].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
      v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + tc.adam_eps);
    }
  }
}

namespace {

DenseVector sample_mask(std::mt19937_64& rng, std::size_t n, double p) {
  DenseVector m(n, 1.0);
  if (p <= 0.0) return m;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (double& v : m) v = keep(rng) ? scale : 0.0;
  return m;
}

std::vector<DropoutMasks> sample_masks(std::uint64_t seed, const LmConfig& c, std::size_t steps) {
  std::vector<DropoutMasks> out;
  if (c.dropout <= 0.0) return out;
  std::mt19937_64 rng(seed);
  out.resize(steps);
  for (auto& m : out) {
    for (std::size_t l = 0; l + 1 < c.layers; ++l) m.between.push_back(sample_mask(rng, c.units, c.dropout));
    m.readout = sample_mask(rng, c.units, c.dropout);
  }
  return out;
}

void add_into(LmParameters& dst, const LmParameters& src) {
  auto d = dst.arrays();
  const auto s = src.arrays();
  for (std::size_t k = 0; k < d.size(); ++k)
    for (std::size_t i = 0; i < d[k].second.size(); ++i) d[k].second[i] += s[k].second[i];
}

void scale(LmParameters& g, double f) {
  for (auto& [name, a] : g.arrays())
    for (double& v : a) v *= f;
}

}  // namespace

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const LmConfig& config, const TrainConfig& tc,
                  const std::function<void(const TrainLogRecord&)>& on_eval) {
  config.validate();
  tc.validate();
  if (train_corpus.sentences.empty() || dev_corpus.sentences.empty()) {
    throw std::invalid_argument("train: train and dev corpora must be non-empty");
  }

  TrainResult result{init_params(config, derive_seed(tc.seed, {0})), {}};
  LmParameters& params = result.params;
  AdamState adam(config);
  double lr = tc.lr;
  double last_dev = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_corpus.sentences.size());
  std::size_t step = 0;
  double window_nll = 0.0;
  std::size_t window_tokens = 0;

  const std::size_t workers = tc.threads;
  std::vector<LmParameters> partial(workers, LmParameters::zeros(config));
  LmParameters batch_grad = LmParameters::zeros(config);

  auto evaluate = [&] {
    TrainLogRecord rec;
    rec.step = step;
    rec.dev_ppl = perplexity(params, dev_corpus);
    rec.train_nll = window_tokens ? window_nll / static_cast<double>(window_tokens) : 0.0;
    if (!std::isfinite(rec.dev_ppl)) throw std::runtime_error("train: dev perplexity diverged at step " + std::to_string(step));
    if (tc.halve_lr_on_increase && rec.dev_ppl > last_dev) lr *= 0.5;
    last_dev = rec.dev_ppl;
    rec.lr = lr;
    window_nll = 0.0;
    window_tokens = 0;
    result.log.push_back(rec);
    if (on_eval) on_eval(rec);
  };

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(tc.seed, {1, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      std::vector<double> nll(workers, 0.0);
      std::size_t tokens = 0;
      for (std::size_t i = begin; i < end; ++i) tokens += train_corpus.sentences[order[i]].size();

      auto work = [&](std::size_t w) {
        partial[w].set_zero();
        for (std::size_t i = begin + w; i < end; i += workers) {
          const TokenSeq& s = train_corpus.sentences[order[i]];
          const auto masks = sample_masks(derive_seed(tc.seed, {2, epoch, order[i]}), config, s.size());
          nll[w] += sentence_nll_grad(params, s, masks, &partial[w]);
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }
      batch_grad.set_zero();
      double batch_nll = 0.0;
      for (std::size_t w = 0; w < workers; ++w) {
        add_into(batch_grad, partial[w]);
        batch_nll += nll[w];
      }
      if (!std::isfinite(batch_nll)) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) + " (lr " + std::to_string(lr) + ")");
      }
      scale(batch_grad, 1.0 / static_cast<double>(tokens));
      clip_global_norm(batch_grad, tc.clip_norm);
      adam.step(params, batch_grad, tc, lr);
      ++step;
      window_nll += batch_nll;
      window_tokens += tokens;
      if (step % tc.eval_interval == 0) evaluate();
    }
  }
  if (result.log.empty() || result.log.back().step != step) evaluate();
  return result;
}

double unigram_perplexity(const Corpus& fit, const Corpus& eval, std::size_t vocab) {
  std::vector<double> counts(vocab, 1.0);
  double total = static_cast<double>(vocab);
  for (const auto& s : fit.sentences)
    for (TokenId t : s) {
      counts[static_cast<std::size_t>(t)] += 1.0;
      total += 1.0;
    }
  double nll = 0.0;
  std::size_t n = 0;
  for (const auto& s : eval.sentences)
    for (TokenId t : s) {
      nll -= std::log(counts[static_cast<std::size_t>(t)] / total);
      ++n;
    }
  return std::exp(nll / static_cast<double>(n));
}

}  // namespace rss

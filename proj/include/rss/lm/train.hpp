// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rss/lm/model.hpp"

namespace rss {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 100;
  double clip_norm = 1.0;
  std::size_t eval_interval = 500;  // minibatches between dev evaluations
  bool halve_lr_on_increase = true;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // workers per minibatch; reduction order is fixed

  void validate() const;
};

struct TrainLogRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double dev_ppl = 0.0;
  double train_nll = 0.0;  // mean per-token NLL since the previous record

  bool operator==(const TrainLogRecord&) const = default;
};

std::string to_json_line(const TrainLogRecord& r);

struct TrainResult {
  LmParameters params;
  std::vector<TrainLogRecord> log;
};

/// Global L2 norm over every array.
double global_norm(const LmParameters& g);

/// Rescales g so its global norm is at most max_norm. Returns the pre-clip norm.
double clip_global_norm(LmParameters& g, double max_norm);

/// Adam with bias correction. State arrays have the parameter layout.
class AdamState {
 public:
  explicit AdamState(const LmConfig& config);
  void step(LmParameters& params, const LmParameters& grads, const TrainConfig& tc, double lr);

 private:
  LmParameters m_, v_;
  std::size_t t_ = 0;
};

/// Minibatch teacher-forced NLL training with dropout, clipping, Adam and
/// learning-rate halving whenever dev perplexity rises. Throws
/// std::runtime_error if the loss becomes non-finite.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const LmConfig& config, const TrainConfig& tc,
                  const std::function<void(const TrainLogRecord&)>& on_eval = {});

/// Maximum-likelihood unigram perplexity of `eval` under counts from `fit`
/// (add-one smoothed), the baseline a trained model must beat.
double unigram_perplexity(const Corpus& fit, const Corpus& eval, std::size_t vocab);

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include "rss/estimate/backward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace rss {

void BeamConfig::validate() const {
  if (width == 0) throw std::invalid_argument("BeamConfig: width must be at least 1");
  if (max_len == 0) throw std::invalid_argument("BeamConfig: max_len must be at least 1");
}

namespace {

void log_softmax_inplace(DenseVector& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  const double lse = mx + std::log(s);
  for (double& x : v) x -= lse;
}

// Strict ranking: higher score first, then the smaller token sequence.
bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

struct Candidate {
  double score;
  std::size_t parent;
  TokenId token;
};

}  // namespace

Hypothesis beam_decode(const ConditionedModel& model, const BeamConfig& config) {
  config.validate();
  const std::size_t vocab = model.params().config.vocab;
  std::vector<Hypothesis> live{Hypothesis{{}, 0.0, false, model.init_state()}};
  std::vector<Hypothesis> pool;
  std::vector<Candidate> cands;
  std::vector<HiddenState> next_states;

  for (std::size_t len = 1; len <= config.max_len && !live.empty(); ++len) {
    cands.clear();
    next_states.clear();
    for (std::size_t i = 0; i < live.size(); ++i) {
      const TokenId prev = live[i].tokens.empty() ? Vocabulary::kBos : live[i].tokens.back();
      StepResult r = model.step(live[i].state, prev);
      log_softmax_inplace(r.logits);
      for (std::size_t v = 0; v < vocab; ++v) {
        if (v == static_cast<std::size_t>(Vocabulary::kBos)) continue;
        cands.push_back({live[i].log_prob + r.logits[v], i, static_cast<TokenId>(v)});
      }
      next_states.push_back(std::move(r.state));
    }
    auto before = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& ta = live[a.parent].tokens;
      const auto& tb = live[b.parent].tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    };
    // Top `width` candidates decide which <eos> hypotheses retire; live slots
    // are refilled from further unfinished candidates.
    const std::size_t keep = std::min(cands.size(), 2 * config.width + 1);
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), before);

    std::vector<Hypothesis> next;
    for (std::size_t rank = 0; rank < cands.size() && next.size() < config.width; ++rank) {
      if (rank == keep) {
        std::partial_sort(cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), cands.end(), before);
      }
      const Candidate& c = cands[rank];
      Hypothesis h{live[c.parent].tokens, c.score, c.token == Vocabulary::kEos, next_states[c.parent]};
      h.tokens.push_back(c.token);
      if (h.finished) {
        if (rank < config.width) pool.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);

    if (!pool.empty() && !live.empty()) {
      const auto best_pool = std::min_element(pool.begin(), pool.end(), ranks_before);
      if (best_pool->log_prob >= live.front().log_prob) break;
    }
  }
  if (!pool.empty()) return *std::min_element(pool.begin(), pool.end(), ranks_before);
  return *std::min_element(live.begin(), live.end(), ranks_before);
}

Hypothesis beam_decode(const LmParameters& params, const ProjectionSpec& spec, const DenseVector& z,
                       const BeamConfig& config) {
  return beam_decode(ConditionedModel(params, spec, z), config);
}

Hypothesis exhaustive_decode(const ConditionedModel& model, std::size_t max_len) {
  const std::size_t vocab = model.params().config.vocab;
  if (max_len == 0) throw std::invalid_argument("exhaustive_decode: max_len must be at least 1");
  double space = 1.0;
  for (std::size_t i = 0; i < max_len; ++i) space *= static_cast<double>(vocab);
  if (space > 1e6) throw std::length_error("exhaustive_decode: search space exceeds 1e6");

  Hypothesis best;
  best.log_prob = -std::numeric_limits<double>::infinity();
  bool found = false;
  // Depth-first over prefixes; each prefix state is computed once.
  auto visit = [&](auto&& self, Hypothesis& prefix) -> void {
    const TokenId prev = prefix.tokens.empty() ? Vocabulary::kBos : prefix.tokens.back();
    StepResult r = model.step(prefix.state, prev);
    log_softmax_inplace(r.logits);
    for (std::size_t v = 0; v < vocab; ++v) {
      if (v == static_cast<std::size_t>(Vocabulary::kBos)) continue;
      Hypothesis h{prefix.tokens, prefix.log_prob + r.logits[v], v == static_cast<std::size_t>(Vocabulary::kEos),
                   r.state};
      h.tokens.push_back(static_cast<TokenId>(v));
      if (h.finished) {
        if (!found || ranks_before(h, best)) {
          best = h;
          found = true;
        }
      } else if (h.tokens.size() < max_len) {
        self(self, h);
      }
    }
  };
  Hypothesis root{{}, 0.0, false, model.init_state()};
  visit(visit, root);
  return best;
}

double conditioned_prefix_score(const ConditionedModel& model, const TokenSeq& tokens) {
  HiddenState s = model.init_state();
  TokenId prev = Vocabulary::kBos;
  double total = 0.0;
  for (TokenId t : tokens) {
    StepResult r = model.step(s, prev);
    log_softmax_inplace(r.logits);
    total += r.logits[static_cast<std::size_t>(t)];
    s = std::move(r.state);
    prev = t;
  }
  return total;
}

std::string to_json_line(const Hypothesis& h, std::size_t sentence_id, std::size_t restart, std::size_t width) {
  nlohmann::ordered_json j;
  j["sentence"] = sentence_id;
  j["restart"] = restart;
  j["width"] = width;
  j["tokens"] = h.tokens;
  j["log_prob"] = h.log_prob;
  j["finished"] = h.finished;
  return j.dump();
}

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "rss/reparam/conditioned.hpp"

namespace rss {

struct BeamConfig {
  std::size_t width = 5;
  std::size_t max_len = 100;  // generated tokens, <eos> included

  void validate() const;
};

struct Hypothesis {
  TokenSeq tokens;
  double log_prob = 0.0;
  bool finished = false;  // ends in <eos>
  HiddenState state;
};

/// Beam search with a pool of retired <eos> hypotheses and no length
/// normalization. Candidates never include <bos>. Among equal scores the
/// lexicographically smaller token sequence ranks first. The best pooled
/// hypothesis is returned; if the pool is empty at max_len, the best live one.
Hypothesis beam_decode(const ConditionedModel& model, const BeamConfig& config = {});
Hypothesis beam_decode(const LmParameters& params, const ProjectionSpec& spec, const DenseVector& z,
                       const BeamConfig& config = {});

/// Highest-scoring <eos>-terminated sequence of length <= max_len, found by
/// enumeration. Throws std::length_error when V^max_len exceeds 1e6.
Hypothesis exhaustive_decode(const ConditionedModel& model, std::size_t max_len);

/// sum_t log p(x_t | x_<t, z) over any token prefix (no <eos> required).
double conditioned_prefix_score(const ConditionedModel& model, const TokenSeq& tokens);

std::string to_json_line(const Hypothesis& h, std::size_t sentence_id, std::size_t restart, std::size_t width);

}  // namespace rss

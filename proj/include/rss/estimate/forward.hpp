// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rss/estimate/nlcg.hpp"
#include "rss/reparam/conditioned.hpp"

namespace rss {

enum class Optimizer { ConjugateGradient, Adam };
std::string_view to_string(Optimizer o);

struct EstimateConfig {
  CgConfig cg;
  double z0_std = 0.1;
  // Adam comparison mode; it shares cg.max_iter as its iteration budget.
  double adam_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EstimationResult {
  DenseVector z;
  double final_nll = 0.0;
  double initial_nll = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string status;
  Optimizer optimizer = Optimizer::ConjugateGradient;
  std::size_t code_dim = 0;
  std::size_t restart = 0;
  std::uint64_t restart_seed = 0;
  std::uint64_t projection_seed = 0;
  std::uint64_t z0_seed = 0;

  bool operator==(const EstimationResult&) const = default;
};

/// Seeds for one restart; the projection and z0 streams are split from it.
std::uint64_t restart_seed(std::uint64_t base_seed, std::size_t sentence_index, std::size_t restart);
std::uint64_t projection_seed(std::uint64_t restart_seed);
std::uint64_t z0_seed(std::uint64_t restart_seed);

/// z0 ~ N(0, std^2) i.i.d.
DenseVector draw_z0(std::size_t code_dim, double std_dev, std::uint64_t seed);

/// The projection a result was estimated under.
ProjectionSpec projection_of(const EstimationResult& r, const LmParameters& params);

/// Minimizes the sentence NLL over z with the parameters held fixed. Optimizer
/// trouble is reported through `converged`/`status`, never by throwing.
EstimationResult estimate(const TokenSeq& sentence, const LmParameters& params, std::size_t code_dim,
                          std::uint64_t restart_seed, const EstimateConfig& config = {});

/// n_restarts independent estimates with seeds derived from
/// (base_seed, sentence_index, restart). Every result is kept.
std::vector<EstimationResult> estimate_multi(const TokenSeq& sentence, const LmParameters& params,
                                             std::size_t code_dim, std::size_t n_restarts, std::uint64_t base_seed,
                                             std::size_t sentence_index = 0, const EstimateConfig& config = {});

/// Same objective minimized with Adam; the best iterate is returned.
EstimationResult estimate_adam(const TokenSeq& sentence, const LmParameters& params, std::size_t code_dim,
                               std::uint64_t restart_seed, const EstimateConfig& config = {});

std::string to_json_line(const EstimationResult& r, std::size_t sentence_id);
EstimationResult estimation_from_json(const std::string& line, std::size_t* sentence_id = nullptr);

}  // namespace rss

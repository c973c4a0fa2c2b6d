// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rss/numkernel/dense.hpp"
#include "rss/numkernel/lstm_cell.hpp"
#include "rss/textprep/textprep.hpp"

namespace rss {

struct LmConfig {
  std::size_t layers = 2;
  std::size_t units = 32;  // d, also the (tied) embedding width
  std::size_t vocab = 0;   // V including reserved tokens
  double dropout = 0.1;
  std::size_t max_len = 100;

  /// d* = 2 d l: every layer contributes an h and a c vector.
  std::size_t model_dim() const noexcept { return 2 * units * layers; }
  void validate() const;
  bool operator==(const LmConfig&) const = default;
};

/// Layer 0 reads the d-dimensional embedding, every other layer reads the
/// layer below, so all cells are d -> d.
std::size_t parameter_count(const LmConfig& config);

/// Multi-layer LSTM language model with the readout tied to the embedding:
///   logits = embedding * h_top + out_bias
/// There is no separate output matrix, so the tie cannot drift.
struct LmParameters {
  LmConfig config;
  DenseMatrix embedding;  // V x d
  std::vector<LstmWeights> layers;
  DenseVector out_bias;  // V

  /// Zero-filled parameters (also the gradient accumulator layout).
  static LmParameters zeros(const LmConfig& config);

  std::size_t parameter_count() const;
  /// Named views of every array in a fixed order (used by the checkpoint,
  /// the optimizer and the checksum).
  std::vector<std::pair<std::string, std::span<double>>> arrays();
  std::vector<std::pair<std::string, std::span<const double>>> arrays() const;
  std::uint64_t checksum() const;
  void set_zero();

  bool operator==(const LmParameters&) const = default;
};

/// Uniform(-0.1, 0.1) weights, forget-gate biases 1.0, zero output bias.
LmParameters init_params(const LmConfig& config, std::uint64_t seed);

struct LayerState {
  DenseVector h, c;
  bool operator==(const LayerState&) const = default;
};

/// Recurrent state. The flat layout used for codes and attention queries is
/// (h_1, c_1, h_2, c_2, ...), length d*.
struct HiddenState {
  std::vector<LayerState> layers;

  static HiddenState zeros(const LmConfig& config);
  std::size_t dim() const noexcept;
  DenseVector flatten() const;
  void flatten_into(std::span<double> out) const;
  static HiddenState unflatten(std::span<const double> flat, std::size_t layers, std::size_t units);
  /// Adds a flat d*-vector to every (h, c) slot.
  void add_flat(std::span<const double> flat);

  bool operator==(const HiddenState&) const = default;
};

/// Pre-sampled inverted-dropout masks for one time step (entries are 0 or
/// 1/(1-p)). `between[k]` scales the output of layer k before layer k+1 reads
/// it; `readout` scales the top output before the linear readout.
struct DropoutMasks {
  std::vector<DenseVector> between;
  DenseVector readout;
};

/// Everything a backward pass needs from one step.
struct StepCache {
  TokenId token = 0;
  std::vector<LstmCellCache> cells;
  std::vector<DenseVector> layer_inputs;  // input actually fed to each layer
  DenseVector top;                        // readout input (after dropout)
  DenseVector logits;
  const DropoutMasks* masks = nullptr;
};

/// Runs one step from `input_state` (already including any conditioning bias).
void step_forward(const LmParameters& p, const HiddenState& input_state, TokenId token, const DropoutMasks* masks,
                  StepCache& cache);

/// Extracts the post-step state from a cache.
void state_from_cache(const StepCache& cache, HiddenState& out);

/// Backward through one step.
///   dlogits:    gradient w.r.t. this step's logits
///   d_out:      gradient w.r.t. the state this step produced (modified in place)
///   d_in:       receives the gradient w.r.t. `input_state`
///   grads:      when non-null, parameter gradients are accumulated
struct StepScratch {
  DenseVector dtop, dx, gates;
};
void step_backward(const LmParameters& p, const StepCache& cache, std::span<const double> dlogits, HiddenState& d_out,
                   HiddenState& d_in, LmParameters* grads, StepScratch& scratch);

struct StepResult {
  HiddenState state;
  DenseVector logits;
};

/// One unconditional step: embed, run the stack, read out through the tied
/// embedding. Dropout only when masks are given.
StepResult forward_step(const LmParameters& p, const HiddenState& state, TokenId token,
                        const DropoutMasks* masks = nullptr);

/// log p(tokens) from h0 = 0 with <bos> as the first input. `tokens` must be
/// non-empty and end with <eos>.
double score_sentence(const LmParameters& p, const TokenSeq& tokens);

/// exp(total NLL / total tokens), <eos> counted.
double perplexity(const LmParameters& p, const Corpus& corpus);

/// Ancestral sampling until <eos> or max_len tokens.
TokenSeq sample(const LmParameters& p, std::size_t max_len, std::uint64_t seed);

/// Total NLL of one sentence and, when `grads` is non-null, its exact
/// parameter gradient (accumulated). `masks` holds one entry per step or is
/// empty for inference.
double sentence_nll_grad(const LmParameters& p, const TokenSeq& tokens, const std::vector<DropoutMasks>& masks,
                         LmParameters* grads);

void validate_sentence(const TokenSeq& tokens, std::size_t vocab);
void validate_token(TokenId token, std::size_t vocab);

}  // namespace rss

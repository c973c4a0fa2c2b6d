// SPDX-License-Identifier: Apache-2.0
#include "rss/lm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rss/numkernel/kernels.hpp"
#include "rss/util/seed.hpp"

namespace rss {

void LmConfig::validate() const {
  if (layers < 1 || units < 1) throw std::invalid_argument("LmConfig: layers and units must be >= 1");
  if (vocab <= Vocabulary::kNumReserved) throw std::invalid_argument("LmConfig: vocabulary too small");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("LmConfig: dropout must be in [0, 1)");
  if (max_len < 1) throw std::invalid_argument("LmConfig: max_len must be >= 1");
}

std::size_t parameter_count(const LmConfig& c) {
  const std::size_t d = c.units;
  const std::size_t per_layer = 4 * d * d + 4 * d * d + 4 * d;
  return c.vocab * d + c.layers * per_layer + c.vocab;
}

LmParameters LmParameters::zeros(const LmConfig& config) {
  config.validate();
  LmParameters p;
  p.config = config;
  p.embedding = DenseMatrix(config.vocab, config.units);
  p.layers.assign(config.layers, LstmWeights(config.units, config.units));
  p.out_bias = DenseVector(config.vocab);
  return p;
}

std::size_t LmParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, a] : arrays()) n += a.size();
  return n;
}

std::vector<std::pair<std::string, std::span<double>>> LmParameters::arrays() {
  std::vector<std::pair<std::string, std::span<double>>> out;
  out.emplace_back("embedding", embedding.span());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    out.emplace_back(prefix + "wx", layers[l].wx.span());
    out.emplace_back(prefix + "wh", layers[l].wh.span());
    out.emplace_back(prefix + "bias", layers[l].bias.span());
  }
  out.emplace_back("out_bias", out_bias.span());
  return out;
}

std::vector<std::pair<std::string, std::span<const double>>> LmParameters::arrays() const {
  auto mut = const_cast<LmParameters*>(this)->arrays();
  return {mut.begin(), mut.end()};
}

std::uint64_t LmParameters::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, a] : arrays()) h = fnv1a64(a, h);
  return h;
}

void LmParameters::set_zero() {
  for (auto& [name, a] : arrays()) std::fill(a.begin(), a.end(), 0.0);
}

LmParameters init_params(const LmConfig& config, std::uint64_t seed) {
  LmParameters p = LmParameters::zeros(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& [name, a] : p.arrays()) {
    if (name == "out_bias") continue;
    for (double& v : a) v = u(rng);
  }
  const std::size_t d = config.units;
  for (auto& layer : p.layers) {
    for (std::size_t j = 0; j < d; ++j) layer.bias[kForgetGate * d + j] = 1.0;
  }
  return p;
}

HiddenState HiddenState::zeros(const LmConfig& config) {
  HiddenState s;
  s.layers.assign(config.layers, LayerState{DenseVector(config.units), DenseVector(config.units)});
  return s;
}

std::size_t HiddenState::dim() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.h.size() + l.c.size();
  return n;
}

void HiddenState::flatten_into(std::span<double> out) const {
  if (out.size() != dim()) throw std::invalid_argument("HiddenState::flatten_into: size mismatch");
  auto it = out.begin();
  for (const auto& l : layers) {
    it = std::copy(l.h.begin(), l.h.end(), it);
    it = std::copy(l.c.begin(), l.c.end(), it);
  }
}

DenseVector HiddenState::flatten() const {
  DenseVector v(dim());
  flatten_into(v.span());
  return v;
}

HiddenState HiddenState::unflatten(std::span<const double> flat, std::size_t layers, std::size_t units) {
  if (flat.size() != 2 * layers * units) throw std::invalid_argument("HiddenState::unflatten: size mismatch");
  HiddenState s;
  auto it = flat.begin();
  for (std::size_t l = 0; l < layers; ++l) {
    LayerState ls{DenseVector(std::vector<double>(it, it + static_cast<std::ptrdiff_t>(units))),
                  DenseVector(std::vector<double>(it + static_cast<std::ptrdiff_t>(units),
                                                  it + static_cast<std::ptrdiff_t>(2 * units)))};
    s.layers.push_back(std::move(ls));
    it += static_cast<std::ptrdiff_t>(2 * units);
  }
  return s;
}

void HiddenState::add_flat(std::span<const double> flat) {
  if (flat.size() != dim()) throw std::invalid_argument("HiddenState::add_flat: size mismatch");
  std::size_t k = 0;
  for (auto& l : layers) {
    for (double& v : l.h) v += flat[k++];
    for (double& v : l.c) v += flat[k++];
  }
}

void validate_token(TokenId token, std::size_t vocab) {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab) {
    throw std::out_of_range("token id " + std::to_string(token) + " outside vocabulary of " + std::to_string(vocab));
  }
}

void validate_sentence(const TokenSeq& tokens, std::size_t vocab) {
  if (tokens.empty()) throw std::invalid_argument("empty token sequence");
  if (tokens.back() != Vocabulary::kEos) throw std::invalid_argument("token sequence must end with <eos>");
  for (TokenId t : tokens) validate_token(t, vocab);
}

namespace {

void copy_into(DenseVector& dst, std::span<const double> src) {
  if (dst.size() != src.size()) dst.resize(src.size());
  std::copy(src.begin(), src.end(), dst.begin());
}

void mul_inplace(DenseVector& v, const DenseVector& mask) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
}

}  // namespace

void step_forward(const LmParameters& p, const HiddenState& input_state, TokenId token, const DropoutMasks* masks,
                  StepCache& cache) {
  const LmConfig& cfg = p.config;
  validate_token(token, cfg.vocab);
  if (input_state.layers.size() != cfg.layers) throw std::invalid_argument("step_forward: state has wrong layer count");
  const auto& k = kernels::active();

  cache.token = token;
  cache.masks = masks;
  cache.cells.resize(cfg.layers);
  cache.layer_inputs.resize(cfg.layers);
  copy_into(cache.layer_inputs[0], p.embedding.row(static_cast<std::size_t>(token)));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& in = input_state.layers[l];
    lstm_cell_forward(p.layers[l], cache.layer_inputs[l], in.h, in.c, cache.cells[l]);
    if (l + 1 < cfg.layers) {
      copy_into(cache.layer_inputs[l + 1], cache.cells[l].h);
      if (masks != nullptr) mul_inplace(cache.layer_inputs[l + 1], masks->between[l]);
    }
  }
  copy_into(cache.top, cache.cells.back().h);
  if (masks != nullptr) mul_inplace(cache.top, masks->readout);
  copy_into(cache.logits, p.out_bias.span());
  k.gemv_acc(p.embedding.data(), cfg.vocab, cfg.units, cache.top.data(), cache.logits.data());
}

void state_from_cache(const StepCache& cache, HiddenState& out) {
  out.layers.resize(cache.cells.size());
  for (std::size_t l = 0; l < cache.cells.size(); ++l) {
    copy_into(out.layers[l].h, cache.cells[l].h);
    copy_into(out.layers[l].c, cache.cells[l].c);
  }
}

void step_backward(const LmParameters& p, const StepCache& cache, std::span<const double> dlogits, HiddenState& d_out,
                   HiddenState& d_in, LmParameters* grads, StepScratch& scratch) {
  const LmConfig& cfg = p.config;
  const std::size_t d = cfg.units;
  const auto& k = kernels::active();

  scratch.dtop.resize(d);
  scratch.dtop.fill(0.0);
  scratch.dx.resize(d);
  scratch.gates.resize(4 * d);
  k.gemv_t_acc(p.embedding.data(), cfg.vocab, d, dlogits.data(), scratch.dtop.data());
  if (grads != nullptr) {
    k.ger(1.0, dlogits.data(), cfg.vocab, cache.top.data(), d, grads->embedding.data());
    k.axpy(1.0, dlogits.data(), grads->out_bias.data(), cfg.vocab);
  }
  if (cache.masks != nullptr) mul_inplace(scratch.dtop, cache.masks->readout);
  k.axpy(1.0, scratch.dtop.data(), d_out.layers.back().h.data(), d);

  d_in.layers.resize(cfg.layers);
  for (std::size_t li = cfg.layers; li-- > 0;) {
    auto& din = d_in.layers[li];
    din.h.resize(d);
    din.c.resize(d);
    lstm_cell_backward_into(cache.cells[li], d_out.layers[li].h, d_out.layers[li].c, p.layers[li],
                            grads != nullptr ? &grads->layers[li] : nullptr, scratch.dx.span(), din.h.span(),
                            din.c.span(), scratch.gates.span());
    if (li > 0) {
      if (cache.masks != nullptr) mul_inplace(scratch.dx, cache.masks->between[li - 1]);
      k.axpy(1.0, scratch.dx.data(), d_out.layers[li - 1].h.data(), d);
    } else if (grads != nullptr) {
      k.axpy(1.0, scratch.dx.data(), grads->embedding.row(static_cast<std::size_t>(cache.token)).data(), d);
    }
  }
}

StepResult forward_step(const LmParameters& p, const HiddenState& state, TokenId token, const DropoutMasks* masks) {
  StepCache cache;
  step_forward(p, state, token, masks, cache);
  StepResult r;
  state_from_cache(cache, r.state);
  r.logits = std::move(cache.logits);
  return r;
}

double sentence_nll_grad(const LmParameters& p, const TokenSeq& tokens, const std::vector<DropoutMasks>& masks,
                         LmParameters* grads) {
  validate_sentence(tokens, p.config.vocab);
  const std::size_t T = tokens.size();
  if (!masks.empty() && masks.size() != T) throw std::invalid_argument("sentence_nll_grad: one mask set per step");

  std::vector<StepCache> caches(T);
  std::vector<DenseVector> dlogits(T);
  HiddenState state = HiddenState::zeros(p.config);
  double nll = 0.0;
  TokenId input = Vocabulary::kBos;
  for (std::size_t t = 0; t < T; ++t) {
    step_forward(p, state, input, masks.empty() ? nullptr : &masks[t], caches[t]);
    state_from_cache(caches[t], state);
    NllResult r = log_softmax_nll(caches[t].logits, static_cast<std::size_t>(tokens[t]));
    nll += r.loss;
    dlogits[t] = std::move(r.grad);
    input = tokens[t];
  }
  if (grads == nullptr) return nll;

  HiddenState d_out = HiddenState::zeros(p.config);
  HiddenState d_in;
  StepScratch scratch;
  for (std::size_t t = T; t-- > 0;) {
    step_backward(p, caches[t], dlogits[t], d_out, d_in, grads, scratch);
    std::swap(d_out, d_in);
  }
  return nll;
}

double score_sentence(const LmParameters& p, const TokenSeq& tokens) {
  return -sentence_nll_grad(p, tokens, {}, nullptr);
}

double perplexity(const LmParameters& p, const Corpus& corpus) {
  if (corpus.sentences.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double nll = 0.0;
  std::size_t n = 0;
  for (const auto& s : corpus.sentences) {
    nll += sentence_nll_grad(p, s, {}, nullptr);
    n += s.size();
  }
  return std::exp(nll / static_cast<double>(n));
}

TokenSeq sample(const LmParameters& p, std::size_t max_len, std::uint64_t seed) {
  if (max_len < 1) throw std::invalid_argument("sample: max_len must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HiddenState state = HiddenState::zeros(p.config);
  StepCache cache;
  TokenSeq out;
  TokenId input = Vocabulary::kBos;
  while (out.size() < max_len) {
    step_forward(p, state, input, nullptr, cache);
    state_from_cache(cache, state);
    softmax_inplace(cache.logits.span());
    const double r = u(rng);
    double acc = 0.0;
    std::size_t pick = cache.logits.size() - 1;
    for (std::size_t i = 0; i < cache.logits.size(); ++i) {
      acc += cache.logits[i];
      if (r < acc) {
        pick = i;
        break;
      }
    }
    input = static_cast<TokenId>(pick);
    out.push_back(input);
    if (input == Vocabulary::kEos) break;
  }
  return out;
}

}  // namespace rss

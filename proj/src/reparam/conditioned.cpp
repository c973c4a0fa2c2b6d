// SPDX-License-Identifier: Apache-2.0
#include "rss/reparam/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "rss/numkernel/kernels.hpp"

namespace rss {

std::string_view to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::Identity: return "identity";
    case ProjectionMode::RandomProjection: return "random";
    case ProjectionMode::Attention: return "attention";
  }
  return "unknown";
}

ProjectionSpec make_projection(std::size_t code_dim, std::size_t model_dim, std::uint64_t seed) {
  if (code_dim == 0 || model_dim == 0) throw std::invalid_argument("make_projection: dimensions must be >= 1");
  ProjectionSpec spec;
  spec.code_dim = code_dim;
  spec.model_dim = model_dim;
  spec.seed = seed;
  if (code_dim == model_dim) {
    spec.mode = ProjectionMode::Identity;
  } else if (code_dim < model_dim) {
    spec.mode = ProjectionMode::RandomProjection;
    spec.wz = DenseMatrix(model_dim, code_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    // Column-major draw so each column is one independent N(0, I) vector.
    for (std::size_t c = 0; c < code_dim; ++c) {
      double norm = 0.0;
      do {
        norm = 0.0;
        for (std::size_t r = 0; r < model_dim; ++r) {
          spec.wz(r, c) = nd(rng);
          norm += spec.wz(r, c) * spec.wz(r, c);
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < model_dim; ++r) spec.wz(r, c) /= norm;
    }
  } else {
    if (code_dim % model_dim != 0) {
      throw std::invalid_argument("make_projection: code dimension " + std::to_string(code_dim) +
                                  " is not a multiple of model dimension " + std::to_string(model_dim));
    }
    spec.mode = ProjectionMode::Attention;
  }
  return spec;
}

void project_into(const ProjectionSpec& spec, std::span<const double> z, std::span<const double> query,
                  std::span<double> out, ProjectionCache* cache) {
  const std::size_t n = spec.model_dim;
  if (z.size() != spec.code_dim || query.size() != n || out.size() != n) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  const auto& k = kernels::active();
  switch (spec.mode) {
    case ProjectionMode::Identity:
      std::copy(z.begin(), z.end(), out.begin());
      break;
    case ProjectionMode::RandomProjection:
      std::fill(out.begin(), out.end(), 0.0);
      k.gemv_acc(spec.wz.data(), n, spec.code_dim, z.data(), out.data());
      break;
    case ProjectionMode::Attention: {
      // z holds the k slices contiguously, so Z^T is a k x n row-major matrix.
      const std::size_t slices = spec.slices();
      DenseVector local;
      DenseVector& w = cache != nullptr ? cache->weights : local;
      w.resize(slices);
      w.fill(0.0);
      k.gemv_acc(z.data(), slices, n, query.data(), w.data());
      softmax_inplace(w.span());
      std::fill(out.begin(), out.end(), 0.0);
      k.gemv_t_acc(z.data(), slices, n, w.data(), out.data());
      if (cache != nullptr) {
        cache->query.resize(n);
        std::copy(query.begin(), query.end(), cache->query.begin());
      }
      break;
    }
  }
}

DenseVector project(const ProjectionSpec& spec, std::span<const double> z, std::span<const double> query) {
  DenseVector out(spec.model_dim);
  project_into(spec, z, query, out.span(), nullptr);
  return out;
}

void project_backward(const ProjectionSpec& spec, std::span<const double> z, const ProjectionCache& cache,
                      std::span<const double> g, std::span<double> dz, std::span<double> dquery) {
  const std::size_t n = spec.model_dim;
  const auto& k = kernels::active();
  switch (spec.mode) {
    case ProjectionMode::Identity:
      k.axpy(1.0, g.data(), dz.data(), n);
      break;
    case ProjectionMode::RandomProjection:
      k.gemv_t_acc(spec.wz.data(), n, spec.code_dim, g.data(), dz.data());
      break;
    case ProjectionMode::Attention: {
      const std::size_t slices = spec.slices();
      const DenseVector& a = cache.weights;
      // da_j = Z_j . g ; ds = a * (da - a.da)
      DenseVector da(slices);
      k.gemv_acc(z.data(), slices, n, g.data(), da.data());
      double mean = 0.0;
      for (std::size_t j = 0; j < slices; ++j) mean += a[j] * da[j];
      for (std::size_t j = 0; j < slices; ++j) {
        const double ds = a[j] * (da[j] - mean);
        double* dzj = dz.data() + j * n;
        k.axpy(a[j], g.data(), dzj, n);
        k.axpy(ds, cache.query.data(), dzj, n);
        if (!dquery.empty()) k.axpy(ds, z.data() + j * n, dquery.data(), n);
      }
      break;
    }
  }
}

ConditionedModel::ConditionedModel(const LmParameters& params, ProjectionSpec spec, DenseVector z)
    : params_(&params), spec_(std::move(spec)), z_(std::move(z)) {
  if (spec_.model_dim != params.config.model_dim()) {
    throw std::invalid_argument("ConditionedModel: projection targets " + std::to_string(spec_.model_dim) +
                                " but the model dimension is " + std::to_string(params.config.model_dim()));
  }
  if (z_.size() != spec_.code_dim) throw std::invalid_argument("ConditionedModel: code has wrong dimension");
  if (!all_finite(z_)) throw std::invalid_argument("ConditionedModel: code must be finite");
}

void ConditionedModel::set_z(std::span<const double> z) {
  if (z.size() != spec_.code_dim) throw std::invalid_argument("ConditionedModel::set_z: wrong dimension");
  std::copy(z.begin(), z.end(), z_.begin());
}

HiddenState ConditionedModel::init_state() const {
  const DenseVector zero(spec_.model_dim);
  const DenseVector zp = project(spec_, z_, zero);
  return HiddenState::unflatten(zp, params_->config.layers, params_->config.units);
}

void ConditionedModel::step_into(const HiddenState& state, TokenId token, StepCache& cache, HiddenState& next,
                                 ConditionedWorkspace& ws) const {
  const std::size_t n = spec_.model_dim;
  ws.flat.resize(n);
  ws.zp.resize(n);
  state.flatten_into(ws.flat.span());
  project_into(spec_, z_, ws.flat, ws.zp.span(), nullptr);
  ws.biased = state;
  ws.biased.add_flat(ws.zp);
  step_forward(*params_, ws.biased, token, nullptr, cache);
  state_from_cache(cache, next);
}

StepResult ConditionedModel::step(const HiddenState& state, TokenId token) const {
  ConditionedWorkspace ws;
  StepCache cache;
  StepResult r;
  step_into(state, token, cache, r.state, ws);
  r.logits = std::move(cache.logits);
  return r;
}

double ConditionedModel::nll_and_grad(const TokenSeq& tokens, std::span<double> dz, ConditionedWorkspace& ws) const {
  const LmParameters& p = *params_;
  validate_sentence(tokens, p.config.vocab);
  const bool want_grad = !dz.empty();
  if (want_grad && dz.size() != spec_.code_dim) throw std::invalid_argument("nll_and_grad: dz has wrong size");
  const std::size_t T = tokens.size();
  const std::size_t n = spec_.model_dim;

  ws.steps.resize(T);
  ws.proj.resize(T + 1);
  ws.dlogits.resize(T);
  ws.states.resize(T + 1);
  ws.flat.resize(n);
  ws.zp.resize(n);

  // s_0 = z' with a zero query.
  ws.flat.fill(0.0);
  project_into(spec_, z_, ws.flat, ws.zp.span(), &ws.proj[0]);
  ws.states[0] = HiddenState::unflatten(ws.zp, p.config.layers, p.config.units);

  double nll = 0.0;
  TokenId input = Vocabulary::kBos;
  for (std::size_t t = 0; t < T; ++t) {
    ws.states[t].flatten_into(ws.flat.span());
    project_into(spec_, z_, ws.flat, ws.zp.span(), &ws.proj[t + 1]);
    ws.biased = ws.states[t];
    ws.biased.add_flat(ws.zp);
    step_forward(p, ws.biased, input, nullptr, ws.steps[t]);
    state_from_cache(ws.steps[t], ws.states[t + 1]);
    NllResult r = log_softmax_nll(ws.steps[t].logits, static_cast<std::size_t>(tokens[t]));
    nll += r.loss;
    ws.dlogits[t] = std::move(r.grad);
    input = tokens[t];
  }
  if (!want_grad) return nll;

  std::fill(dz.begin(), dz.end(), 0.0);
  ws.d_out = HiddenState::zeros(p.config);
  ws.g.resize(n);
  ws.dq.resize(n);
  for (std::size_t t = T; t-- > 0;) {
    step_backward(p, ws.steps[t], ws.dlogits[t], ws.d_out, ws.d_in, nullptr, ws.scratch);
    // The biased input is s_t + z'_t(s_t): its gradient reaches both.
    ws.d_in.flatten_into(ws.g.span());
    ws.dq.fill(0.0);
    project_backward(spec_, z_, ws.proj[t + 1], ws.g, dz, ws.dq.span());
    for (std::size_t i = 0; i < n; ++i) ws.g[i] += ws.dq[i];
    ws.d_out = HiddenState::unflatten(ws.g, p.config.layers, p.config.units);
  }
  ws.d_out.flatten_into(ws.g.span());
  project_backward(spec_, z_, ws.proj[0], ws.g, dz, {});
  return nll;
}

double ConditionedModel::score(const TokenSeq& tokens) const {
  ConditionedWorkspace ws;
  return -nll_and_grad(tokens, {}, ws);
}

CodeGradient ConditionedModel::grad_z(const TokenSeq& tokens) const {
  ConditionedWorkspace ws;
  CodeGradient g{0.0, DenseVector(spec_.code_dim)};
  g.nll = nll_and_grad(tokens, g.dz.span(), ws);
  return g;
}

}  // namespace rss

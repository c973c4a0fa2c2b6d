// SPDX-License-Identifier: Apache-2.0
#pragma once

// A frozen language model conditioned on a sentence code z. At every step
// the projected code z' (length d*) is added to every layer's h and c before
// the cell runs; the initial state is z' itself.

#include <cstdint>
#include <string_view>
#include <vector>

#include "rss/lm/model.hpp"

namespace rss {

enum class ProjectionMode { Identity, RandomProjection, Attention };

std::string_view to_string(ProjectionMode m);

/// How a d'-dimensional code reaches the d*-dimensional state.
///   Identity          d' == d*   z' = z
///   RandomProjection  d' <  d*   z' = W z, W is d* x d' with unit-norm columns
///   Attention         d' = k d*  z' = Z softmax(Z^T q), Z = z as k columns of d*
struct ProjectionSpec {
  ProjectionMode mode = ProjectionMode::Identity;
  std::size_t code_dim = 0;
  std::size_t model_dim = 0;
  std::uint64_t seed = 0;
  DenseMatrix wz;  // RandomProjection only

  std::size_t slices() const noexcept { return mode == ProjectionMode::Attention ? code_dim / model_dim : 1; }
};

/// Throws std::invalid_argument when code_dim is 0, or exceeds model_dim
/// without being a multiple of it.
ProjectionSpec make_projection(std::size_t code_dim, std::size_t model_dim, std::uint64_t seed);

/// Attention weights from the last projection (empty outside Attention mode).
struct ProjectionCache {
  DenseVector weights;
  DenseVector query;
};

void project_into(const ProjectionSpec& spec, std::span<const double> z, std::span<const double> query,
                  std::span<double> out, ProjectionCache* cache);

/// z' for the given query state (flattened, length d*).
DenseVector project(const ProjectionSpec& spec, std::span<const double> z, std::span<const double> query);

/// Accumulates d z'/d z and (Attention mode) d z'/d query contributions of g.
void project_backward(const ProjectionSpec& spec, std::span<const double> z, const ProjectionCache& cache,
                      std::span<const double> g, std::span<double> dz, std::span<double> dquery);

struct SentenceCode {
  DenseVector z;
  std::size_t dim() const noexcept { return z.size(); }
};

struct CodeGradient {
  double nll = 0.0;
  DenseVector dz;
};

/// Reusable buffers for repeated gradient evaluations of one model.
struct ConditionedWorkspace {
  std::vector<StepCache> steps;
  std::vector<ProjectionCache> proj;
  std::vector<DenseVector> dlogits;
  std::vector<HiddenState> states;
  HiddenState biased, d_out, d_in;
  StepScratch scratch;
  DenseVector flat, zp, g, dq;
};

/// Holds a non-owning reference to frozen parameters; nothing here writes to them.
class ConditionedModel {
 public:
  ConditionedModel(const LmParameters& params, ProjectionSpec spec, DenseVector z);

  const LmParameters& params() const noexcept { return *params_; }
  const ProjectionSpec& spec() const noexcept { return spec_; }
  const DenseVector& z() const noexcept { return z_; }
  void set_z(std::span<const double> z);

  /// h0 = z' computed with a zero query.
  HiddenState init_state() const;

  /// One conditioned step in inference mode.
  StepResult step(const HiddenState& state, TokenId token) const;
  void step_into(const HiddenState& state, TokenId token, StepCache& cache, HiddenState& next,
                 ConditionedWorkspace& ws) const;

  /// sum_t log p(x_t | x_<t, z). Tokens must end with <eos>.
  double score(const TokenSeq& tokens) const;

  /// Negative score and its exact gradient w.r.t. z (backprop through time,
  /// through every step's bias, the attention weights and h0).
  CodeGradient grad_z(const TokenSeq& tokens) const;
  double nll_and_grad(const TokenSeq& tokens, std::span<double> dz, ConditionedWorkspace& ws) const;

 private:
  const LmParameters* params_;
  ProjectionSpec spec_;
  DenseVector z_;
};

inline HiddenState init_state(const ConditionedModel& m) { return m.init_state(); }
inline StepResult conditioned_step(const ConditionedModel& m, const HiddenState& s, TokenId t) { return m.step(s, t); }
inline double conditioned_score(const ConditionedModel& m, const TokenSeq& tokens) { return m.score(tokens); }
inline CodeGradient conditioned_grad_z(const ConditionedModel& m, const TokenSeq& tokens) { return m.grad_z(tokens); }

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace rss {

/// Writes the gradient at x into grad and returns f(x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct CgConfig {
  std::size_t max_iter = 10000;
  double gtol = 1e-5;  // on the Euclidean gradient norm
  double c1 = 1e-4;
  double c2 = 0.4;
  double powell_nu = 0.2;  // restart when |g_k . g_{k-1}| >= nu |g_k|^2
  std::size_t max_ls_evals = 30;
  // Re-evaluate at the secant minimizer of phi' after each Wolfe step and keep
  // it if it is lower. Makes the search exact on quadratics.
  bool refine = true;
  // Stop as soon as f <= f_target.
  double f_target = -std::numeric_limits<double>::infinity();

  void validate() const;
};

enum class CgStatus { GradientTolerance, TargetReached, MaxIterations, LineSearchFailed, NonFinite };
std::string_view to_string(CgStatus s);

struct CgResult {
  std::vector<double> x;
  double f = 0.0;
  double f0 = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;  // steepest-descent resets after the first iteration
  CgStatus status = CgStatus::MaxIterations;
  bool converged() const noexcept { return status == CgStatus::GradientTolerance || status == CgStatus::TargetReached; }
};

/// Called after every accepted iterate with (iteration, f, |g|).
using CgObserver = std::function<void(std::size_t, double, double)>;

/// Polak-Ribiere+ nonlinear conjugate gradient with a strong Wolfe line search.
/// Never throws on optimizer trouble; the best point seen is returned.
CgResult nlcg_minimize(const Objective& fg, std::span<const double> x0, const CgConfig& config,
                       const CgObserver& observer = {});

}  // namespace rss

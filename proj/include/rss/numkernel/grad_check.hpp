// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>

#include "rss/numkernel/dense.hpp"

namespace rss {

using ScalarFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<DenseVector(std::span<const double>)>;

/// Worst per-coordinate error between grad_f(x0) and a central difference of
/// f with step eps, relative to the larger infinity norm of the two:
///   max_i |g_i - fd_i| / max(|g|_inf, |fd|_inf)
/// Scale invariant, and well defined for individual components near zero.
/// Throws std::domain_error if f is non-finite at any probe point.
double grad_check(const ScalarFn& f, const GradFn& grad_f, std::span<const double> x0, double eps = 1e-6);

/// Central-difference gradient, exposed for tests.
DenseVector numeric_gradient(const ScalarFn& f, std::span<const double> x0, double eps);

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include "rss/numkernel/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rss {

DenseVector numeric_gradient(const ScalarFn& f, std::span<const double> x0, double eps) {
  std::vector<double> x(x0.begin(), x0.end());
  DenseVector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f(x);
    x[i] = orig - eps;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("grad_check: non-finite objective at probe point");
    }
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

double grad_check(const ScalarFn& f, const GradFn& grad_f, std::span<const double> x0, double eps) {
  const DenseVector analytic = grad_f(x0);
  const DenseVector numeric = numeric_gradient(f, x0, eps);
  if (analytic.size() != numeric.size()) throw std::invalid_argument("grad_check: gradient length mismatch");
  double scale = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
  }
  if (worst == 0.0) return 0.0;
  return worst / scale;
}

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include "rss/estimate/nlcg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rss {

void CgConfig::validate() const {
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw std::invalid_argument("CgConfig: need 0 < c1 < c2 < 1");
  if (!(gtol >= 0.0)) throw std::invalid_argument("CgConfig: gtol must be non-negative");
  if (max_ls_evals < 2) throw std::invalid_argument("CgConfig: max_ls_evals must be at least 2");
  if (!(powell_nu > 0.0)) throw std::invalid_argument("CgConfig: powell_nu must be positive");
}

std::string_view to_string(CgStatus s) {
  switch (s) {
    case CgStatus::GradientTolerance: return "gtol";
    case CgStatus::TargetReached: return "target";
    case CgStatus::MaxIterations: return "max_iter";
    case CgStatus::LineSearchFailed: return "line_search";
    case CgStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// phi(alpha) = f(x + alpha d) sample.
struct Sample {
  double a = 0.0, f = 0.0, d = 0.0;
};

// Minimizer of the cubic through two samples, NaN when it does not exist.
double cubic_min(const Sample& p, const Sample& q) {
  const double d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.a - q.a);
  const double disc = d1 * d1 - p.d * q.d;
  if (!(disc >= 0.0)) return std::nan("");
  const double d2 = std::copysign(std::sqrt(disc), q.a - p.a);
  const double den = q.d - p.d + 2.0 * d2;
  if (den == 0.0) return std::nan("");
  return q.a - (q.a - p.a) * (q.d + d2 - d1) / den;
}

class LineSearch {
 public:
  LineSearch(const Objective& fg, const CgConfig& c, std::size_t n)
      : fg_(fg), c_(c), xt_(n), gt_(n), bx_(n), bg_(n) {}

  struct Outcome {
    bool wolfe = false;     // strong Wolfe point found
    bool decrease = false;  // some Armijo point found (stored as best)
    Sample best;
  };

  // Searches along d from x. On success the accepted point is in best_x()/best_g().
  Outcome run(std::span<const double> x, double f0, std::span<const double> d, double dphi0, double alpha0,
              std::size_t& evals) {
    x_ = x;
    d_ = d;
    f0_ = f0;
    dphi0_ = dphi0;
    evals_ = &evals;
    used_ = 0;
    best_ = Sample{0.0, f0, dphi0};
    Outcome out;

    Sample prev = best_;
    double alpha = alpha0;
    for (std::size_t i = 0; used_ < c_.max_ls_evals; ++i) {
      const Sample cur = eval(alpha);
      if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return finish(zoom(prev, cur));
      if (std::abs(cur.d) <= -c_.c2 * dphi0_) return finish(true);
      if (cur.d >= 0.0) return finish(zoom(cur, prev));
      prev = cur;
      alpha *= 2.0;
    }
    return finish(false);
  }

  // Secant step on phi' through 0 and the accepted point; kept if lower.
  void refine(std::size_t& evals) {
    const Sample a = best_;
    if (a.d == 0.0 || dphi0_ >= a.d) return;
    const double alpha = a.a * dphi0_ / (dphi0_ - a.d);
    if (!(alpha > 0.0) || !std::isfinite(alpha) || alpha == a.a) return;
    evals_ = &evals;
    eval(alpha);
  }

  std::span<const double> best_x() const { return bx_; }
  std::span<const double> best_g() const { return bg_; }
  const Sample& best() const { return best_; }

 private:
  bool armijo(const Sample& s) const { return std::isfinite(s.f) && s.f <= f0_ + c_.c1 * s.a * dphi0_; }

  Sample eval(double alpha) {
    for (std::size_t i = 0; i < xt_.size(); ++i) xt_[i] = x_[i] + alpha * d_[i];
    Sample s{alpha, fg_(xt_, gt_), 0.0};
    ++*evals_;
    ++used_;
    s.d = dot(gt_, d_);
    if (!std::isfinite(s.d)) s.f = std::numeric_limits<double>::infinity();
    if (armijo(s) && s.f < best_.f) {
      best_ = s;
      std::copy(xt_.begin(), xt_.end(), bx_.begin());
      std::copy(gt_.begin(), gt_.end(), bg_.begin());
    }
    return s;
  }

  bool zoom(Sample lo, Sample hi) {
    while (used_ < c_.max_ls_evals) {
      const double lo_a = std::min(lo.a, hi.a), hi_a = std::max(lo.a, hi.a), w = hi_a - lo_a;
      if (!(w > 1e-16 * std::max(1.0, hi_a))) return false;
      double a = std::isfinite(hi.f) ? cubic_min(lo, hi) : std::nan("");
      if (!(a >= lo_a + 0.1 * w && a <= hi_a - 0.1 * w)) a = 0.5 * (lo.a + hi.a);
      const Sample cur = eval(a);
      if (!armijo(cur) || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.d) <= -c_.c2 * dphi0_) return true;
        if (cur.d * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    return false;
  }

  Outcome finish(bool wolfe) const {
    Outcome o;
    o.wolfe = wolfe;
    o.decrease = best_.a > 0.0;
    o.best = best_;
    return o;
  }

  const Objective& fg_;
  const CgConfig& c_;
  std::vector<double> xt_, gt_, bx_, bg_;
  std::span<const double> x_, d_;
  double f0_ = 0.0, dphi0_ = 0.0;
  std::size_t* evals_ = nullptr;
  std::size_t used_ = 0;
  Sample best_;
};

}  // namespace

CgResult nlcg_minimize(const Objective& fg, std::span<const double> x0, const CgConfig& config,
                       const CgObserver& observer) {
  config.validate();
  const std::size_t n = x0.size();
  CgResult r;
  r.x.assign(x0.begin(), x0.end());
  std::vector<double> g(n), g_prev(n), d(n);
  r.f = r.f0 = fg(r.x, g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !std::isfinite(dot(g, g))) {
    r.status = CgStatus::NonFinite;
    return r;
  }
  double gg = dot(g, g);
  r.grad_norm = std::sqrt(gg);
  auto done = [&] {
    if (r.grad_norm <= config.gtol) {
      r.status = CgStatus::GradientTolerance;
      return true;
    }
    if (r.f <= config.f_target) {
      r.status = CgStatus::TargetReached;
      return true;
    }
    return false;
  };
  if (done()) return r;

  LineSearch ls(fg, config, n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
  bool steepest = true;
  double prev_alpha = 0.0, prev_dphi = 0.0;

  r.status = CgStatus::MaxIterations;
  while (r.iterations < config.max_iter) {
    double dphi0 = dot(g, d);
    if (!(dphi0 < 0.0)) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      dphi0 = -gg;
      steepest = true;
      ++r.restarts;
    }
    double alpha0 = prev_alpha > 0.0 ? prev_alpha * prev_dphi / dphi0 : 0.0;
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) alpha0 = 1.0 / std::sqrt(dot(d, d));

    const auto out = ls.run(r.x, r.f, d, dphi0, alpha0, r.evaluations);
    if (!out.wolfe && !out.decrease) {
      if (steepest) {
        r.status = CgStatus::LineSearchFailed;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      steepest = true;
      ++r.restarts;
      prev_alpha = 0.0;
      continue;
    }
    if (out.wolfe && config.refine) ls.refine(r.evaluations);

    g_prev.swap(g);
    const auto bx = ls.best_x(), bg = ls.best_g();
    std::copy(bx.begin(), bx.end(), r.x.begin());
    std::copy(bg.begin(), bg.end(), g.begin());
    r.f = ls.best().f;
    prev_alpha = ls.best().a;
    prev_dphi = dphi0;
    ++r.iterations;

    const double gg_prev = gg;
    gg = dot(g, g);
    r.grad_norm = std::sqrt(gg);
    if (observer) observer(r.iterations, r.f, r.grad_norm);
    if (done()) break;

    double beta = 0.0;
    const double cross = dot(g, g_prev);
    if (out.wolfe && std::abs(cross) < config.powell_nu * gg) beta = std::max(0.0, (gg - cross) / gg_prev);
    if (beta == 0.0) ++r.restarts;
    steepest = beta == 0.0;
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] + beta * d[i];
  }
  return r;
}

}  // namespace rss

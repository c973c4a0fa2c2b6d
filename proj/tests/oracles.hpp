// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rss/lm/model.hpp"
#include "rss/numkernel/lstm_cell.hpp"
#include "rss/reparam/conditioned.hpp"
#include "test_support.hpp"

namespace rss::test {

/// Every parameter drawn from N(0, scale^2).
inline LmParameters random_lm(std::size_t d, std::size_t vocab, std::uint64_t seed, double scale = 1.0,
                              std::size_t layers = 2) {
  LmConfig c;
  c.units = d;
  c.vocab = vocab;
  c.layers = layers;
  LmParameters p = LmParameters::zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& [name, a] : p.arrays())
    for (double& v : a) v = nd(rng);
  return p;
}

// Scalar probe L = <dh, h> + <dc, c> whose gradients are exactly what
// lstm_cell_backward returns when fed (dh, dc).
inline double lstm_probe(const LstmWeights& w, std::span<const double> x, std::span<const double> h, std::span<const double> c,
                         const DenseVector& dh, const DenseVector& dc) {
  const LstmCellCache out = lstm_cell_forward(w, x, h, c);
  double s = 0.0;
  for (std::size_t j = 0; j < dh.size(); ++j) s += dh[j] * out.h[j] + dc[j] * out.c[j];
  return s;
}

inline std::vector<double> pack_lstm(const LstmWeights& w) {
  std::vector<double> v(w.wx.span().begin(), w.wx.span().end());
  v.insert(v.end(), w.wh.span().begin(), w.wh.span().end());
  v.insert(v.end(), w.bias.begin(), w.bias.end());
  return v;
}

inline LstmWeights unpack_lstm(std::span<const double> v, std::size_t in, std::size_t d) {
  LstmWeights w(in, d);
  auto it = v.begin();
  std::copy_n(it, w.wx.size(), w.wx.data());
  it += static_cast<std::ptrdiff_t>(w.wx.size());
  std::copy_n(it, w.wh.size(), w.wh.data());
  it += static_cast<std::ptrdiff_t>(w.wh.size());
  std::copy_n(it, w.bias.size(), w.bias.data());
  return w;
}

// Counts by scanning positions; the first occurrence of each hyp n-gram
// contributes min(count in hyp, count in ref).
struct OracleCounts {
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
};

inline std::size_t occurrences(const TokenSeq& s, const TokenSeq& src, std::size_t at, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < n && eq; ++k) eq = s[i + k] == src[at + k];
    c += eq;
  }
  return c;
}

inline OracleCounts oracle_counts(const TokenSeq& ref, const TokenSeq& hyp, std::size_t max_n) {
  OracleCounts o;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
      ++o.totals[n - 1];
      const TokenSeq prefix(hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(i + n - 1));
      if (occurrences(prefix, hyp, i, n) > 0) continue;  // seen earlier
      o.matches[n - 1] += std::min(occurrences(hyp, hyp, i, n), occurrences(ref, hyp, i, n));
    }
  }
  return o;
}

inline double oracle_bleu(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t max_n = std::min<std::size_t>(4, ref.size());
  if (hyp.empty()) return 0.0;
  const OracleCounts o = oracle_counts(ref, hyp, max_n);
  double prod = 1.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (o.matches[n] == 0) return 0.0;
    prod *= std::pow(static_cast<double>(o.matches[n]) / static_cast<double>(o.totals[n]), 1.0 / max_n);
  }
  const double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  return 100.0 * (c > r ? 1.0 : std::exp(1.0 - r / c)) * prod;
}

struct Quadratic {
  DenseMatrix a;
  DenseVector b;

  // A = Q diag(lambda) Q^T with Q from Gram-Schmidt on a Gaussian matrix.
  static Quadratic random(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    DenseMatrix q = test::random_matrix(rng, n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < j; ++k) {
        double p = 0;
        for (std::size_t i = 0; i < n; ++i) p += q(i, j) * q(i, k);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= p * q(i, k);
      }
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += q(i, j) * q(i, j);
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= std::sqrt(s);
    }
    Quadratic out{DenseMatrix(n, n), test::random_vector(rng, n)};
    for (std::size_t k = 0; k < n; ++k) {
      const double lambda = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.a(i, j) += lambda * q(i, k) * q(j, k);
    }
    return out;
  }

  double operator()(std::span<const double> x, std::span<double> g) const {
    double f = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = -b[i];
      for (std::size_t j = 0; j < x.size(); ++j) g[i] += a(i, j) * x[j];
      f += 0.5 * x[i] * (g[i] - b[i]);
    }
    return f;
  }

  // Gaussian elimination with partial pivoting.
  std::vector<double> solve() const {
    const std::size_t n = b.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i][j] = a(i, j);
      m[i][n] = b[i];
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t p = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
      std::swap(m[c], m[p]);
      for (std::size_t r = c + 1; r < n; ++r) {
        const double f = m[r][c] / m[c][c];
        for (std::size_t j = c; j <= n; ++j) m[r][j] -= f * m[c][j];
      }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
      double s = m[i][n];
      for (std::size_t j = i + 1; j < n; ++j) s -= m[i][j] * x[j];
      x[i] = s / m[i][i];
    }
    return x;
  }
};

inline double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2 * a - 400 * x[0] * b;
  g[1] = 200 * b;
  return a * a + 100 * b * b;
}

// Brute force: every <eos>-terminated sequence (no <bos>, no inner <eos>)
// scored independently.
inline TokenSeq brute_force_best(const ConditionedModel& m, std::size_t vocab, std::size_t max_len, double& best_score,
                          std::size_t& count) {
  TokenSeq best;
  best_score = -INFINITY;
  count = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i + 1 < len; ++i) combos *= vocab - 2;
    for (std::size_t code = 0; code < combos; ++code) {
      TokenSeq s;
      std::size_t c = code;
      for (std::size_t i = 0; i + 1 < len; ++i) {
        s.insert(s.begin(), static_cast<TokenId>(2 + c % (vocab - 2)));
        c /= vocab - 2;
      }
      s.push_back(Vocabulary::kEos);
      ++count;
      const double sc = m.score(s);
      if (sc > best_score || (sc == best_score && s < best)) {
        best_score = sc;
        best = s;
      }
    }
  }
  return best;
}

}  // namespace rss::test

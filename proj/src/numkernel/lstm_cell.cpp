// SPDX-License-Identifier: Apache-2.0
#include "rss/numkernel/lstm_cell.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rss/numkernel/kernels.hpp"

namespace rss {

LstmWeights::LstmWeights(std::size_t input_size, std::size_t units)
    : wx(4 * units, input_size), wh(4 * units, units), bias(4 * units) {}

void LstmWeights::set_zero() {
  wx.fill(0.0);
  wh.fill(0.0);
  bias.fill(0.0);
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_dims(const LstmWeights& w, std::size_t nx, std::size_t nh, std::size_t nc) {
  const std::size_t d = w.units();
  if (w.wx.rows() != 4 * d || w.wh.rows() != 4 * d || w.bias.size() != 4 * d) {
    throw std::invalid_argument("lstm: inconsistent packed weight shapes");
  }
  if (nx != w.input_size() || nh != d || nc != d) {
    throw std::invalid_argument("lstm: expected x=" + std::to_string(w.input_size()) + " h=c=" + std::to_string(d) +
                                ", got x=" + std::to_string(nx) + " h=" + std::to_string(nh) +
                                " c=" + std::to_string(nc));
  }
}

void assign(DenseVector& dst, std::span<const double> src) {
  if (dst.size() != src.size()) dst.resize(src.size());
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace

void lstm_cell_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, LstmCellCache& cache) {
  check_dims(w, x.size(), h_prev.size(), c_prev.size());
  const std::size_t d = w.units();
  const auto& k = kernels::active();

  assign(cache.x, x);
  assign(cache.h_prev, h_prev);
  assign(cache.c_prev, c_prev);
  assign(cache.preact, w.bias.span());
  k.gemv_acc(w.wx.data(), 4 * d, w.input_size(), x.data(), cache.preact.data());
  k.gemv_acc(w.wh.data(), 4 * d, d, h_prev.data(), cache.preact.data());

  cache.act.resize(4 * d);
  cache.tanh_c.resize(d);
  cache.h.resize(d);
  cache.c.resize(d);
  const double* pre = cache.preact.data();
  double* act = cache.act.data();
  for (std::size_t j = 0; j < d; ++j) {
    act[j] = sigmoid(pre[j]);
    act[d + j] = sigmoid(pre[d + j]);
    act[2 * d + j] = std::tanh(pre[2 * d + j]);
    act[3 * d + j] = sigmoid(pre[3 * d + j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double c = act[d + j] * c_prev[j] + act[j] * act[2 * d + j];
    cache.c[j] = c;
    cache.tanh_c[j] = std::tanh(c);
    cache.h[j] = act[3 * d + j] * cache.tanh_c[j];
  }
}

LstmCellCache lstm_cell_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                                std::span<const double> c_prev) {
  LstmCellCache cache;
  lstm_cell_forward(w, x, h_prev, c_prev, cache);
  return cache;
}

void lstm_cell_backward_into(const LstmCellCache& cache, std::span<const double> dh, std::span<const double> dc,
                             const LstmWeights& w, LstmWeights* dweights, std::span<double> dx,
                             std::span<double> dh_prev, std::span<double> dc_prev, std::span<double> scratch) {
  const std::size_t d = w.units();
  if (dh.size() != d || dc.size() != d || cache.h.size() != d || dx.size() != w.input_size() ||
      dh_prev.size() != d || dc_prev.size() != d || scratch.size() < 4 * d) {
    throw std::invalid_argument("lstm_cell_backward: dimension mismatch");
  }
  const double* act = cache.act.data();
  double* da = scratch.data();
  for (std::size_t j = 0; j < d; ++j) {
    const double i = act[j], f = act[d + j], g = act[2 * d + j], o = act[3 * d + j];
    const double tc = cache.tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    da[j] = dct * g * i * (1.0 - i);
    da[d + j] = dct * cache.c_prev[j] * f * (1.0 - f);
    da[2 * d + j] = dct * i * (1.0 - g * g);
    da[3 * d + j] = dh[j] * tc * o * (1.0 - o);
    dc_prev[j] = dct * f;
  }
  const auto& k = kernels::active();
  std::fill(dx.begin(), dx.end(), 0.0);
  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
  k.gemv_t_acc(w.wx.data(), 4 * d, w.input_size(), da, dx.data());
  k.gemv_t_acc(w.wh.data(), 4 * d, d, da, dh_prev.data());
  if (dweights != nullptr) {
    k.ger(1.0, da, 4 * d, cache.x.data(), w.input_size(), dweights->wx.data());
    k.ger(1.0, da, 4 * d, cache.h_prev.data(), d, dweights->wh.data());
    k.axpy(1.0, da, dweights->bias.data(), 4 * d);
  }
}

LstmCellGrads lstm_cell_backward(const LstmCellCache& cache, std::span<const double> dh, std::span<const double> dc,
                                 const LstmWeights& w, LstmWeights* dweights) {
  const std::size_t d = w.units();
  LstmCellGrads g{DenseVector(w.input_size()), DenseVector(d), DenseVector(d)};
  DenseVector scratch(4 * d);
  lstm_cell_backward_into(cache, dh, dc, w, dweights, g.dx.span(), g.dh_prev.span(), g.dc_prev.span(),
                          scratch.span());
  return g;
}

}  // namespace rss

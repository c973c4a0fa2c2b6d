// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "rss/numkernel/dense.hpp"

namespace rss {

/// Packed LSTM weights. Gate rows are stacked in the order
/// (input, forget, candidate, output), each block `units` rows tall:
///   preact = wx * x + wh * h_prev + bias
struct LstmWeights {
  DenseMatrix wx;  // 4d x input
  DenseMatrix wh;  // 4d x d
  DenseVector bias;  // 4d

  LstmWeights() = default;
  LstmWeights(std::size_t input_size, std::size_t units);

  std::size_t units() const noexcept { return wh.cols(); }
  std::size_t input_size() const noexcept { return wx.cols(); }

  void set_zero();
  bool operator==(const LstmWeights&) const = default;
};

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCandidate = 2, kOutputGate = 3 };

struct LstmCellCache {
  DenseVector x, h_prev, c_prev;
  DenseVector preact;  // 4d, gate pre-activations
  DenseVector act;     // 4d, sigmoid/tanh activations
  DenseVector tanh_c;  // tanh(c)
  DenseVector h, c;

  std::span<const double> gate(Gate g) const { return act.span().subspan(g * h.size(), h.size()); }
};

/// Runs one step, reusing the buffers already held by `cache`.
void lstm_cell_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, LstmCellCache& cache);

LstmCellCache lstm_cell_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                                std::span<const double> c_prev);

struct LstmCellGrads {
  DenseVector dx, dh_prev, dc_prev;
};

/// Exact gradients of one cell step. When `dweights` is non-null the weight
/// gradients are accumulated into it.
LstmCellGrads lstm_cell_backward(const LstmCellCache& cache, std::span<const double> dh, std::span<const double> dc,
                                 const LstmWeights& w, LstmWeights* dweights = nullptr);

/// Same as above, writing into caller-owned buffers. `scratch` must hold 4d doubles.
void lstm_cell_backward_into(const LstmCellCache& cache, std::span<const double> dh, std::span<const double> dc,
                             const LstmWeights& w, LstmWeights* dweights, std::span<double> dx,
                             std::span<double> dh_prev, std::span<double> dc_prev, std::span<double> scratch);

double sigmoid(double x) noexcept;

}  // namespace rss

// SPDX-License-Identifier: Apache-2.0
#include "rss/numkernel/dense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rss/numkernel/kernels.hpp"

namespace rss {

void DenseVector::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) + " != " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

DenseVector affine(const DenseMatrix& w, std::span<const double> x, std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw std::invalid_argument("affine: W is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                                ", x has " + std::to_string(x.size()) + ", b has " + std::to_string(b.size()));
  }
  DenseVector out(std::vector<double>(b.begin(), b.end()));
  kernels::active().gemv_acc(w.data(), w.rows(), w.cols(), x.data(), out.data());
  return out;
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  const double inv = 1.0 / sum;
  for (double& x : v) x *= inv;
}

DenseVector softmax(std::span<const double> v) {
  DenseVector out(std::vector<double>(v.begin(), v.end()));
  softmax_inplace(out.span());
  return out;
}

NllResult log_softmax_nll(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::out_of_range("log_softmax_nll: target " + std::to_string(target) + " >= " +
                            std::to_string(logits.size()));
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - mx);
  const double log_z = mx + std::log(sum);
  NllResult r;
  r.loss = log_z - logits[target];
  r.grad = DenseVector(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - log_z);
  r.grad[target] -= 1.0;
  return r;
}

double norm2(std::span<const double> v) {
  return std::sqrt(kernels::active().dot(v.data(), v.data(), v.size()));
}

}  // namespace rss

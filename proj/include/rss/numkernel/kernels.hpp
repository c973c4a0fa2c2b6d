// SPDX-License-Identifier: Apache-2.0
#pragma once

// Runtime-dispatched BLAS-1/2 kernels used by the LSTM, readout and
// projection code. Every backend must agree with the scalar reference to
// rounding (see tests/numkernel/kernels_equivalence_test.cpp).

#include <cstddef>
#include <string_view>

namespace rss::kernels {

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // y[r] += sum_c w[r*cols + c] * x[c]
  void (*gemv_acc)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);

  // y[c] += sum_r w[r*cols + c] * x[r]
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);

  // a[r*cols + c] += alpha * x[r] * y[c]
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols, double* a);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the binary was built without AVX2 support or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

/// Backend chosen once per process: AVX2 when available, unless the
/// RSS_KERNELS environment variable is set to "scalar".
const KernelTable& active() noexcept;

}  // namespace rss::kernels

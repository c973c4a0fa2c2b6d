// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rss/numkernel/kernels.hpp"

using rss::kernels::KernelTable;

namespace {

std::vector<double> randv(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Per-element tolerance scaled by the magnitude of the summed terms.
void check_close(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& mag) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-13 * (1.0 + mag[i]));
}

void run_equivalence(const KernelTable& ref, const KernelTable& alt) {
  std::mt19937_64 rng(42);
  // Sizes cover empty, sub-vector-width tails and multi-block lengths.
  for (std::size_t rows : {0u, 1u, 3u, 4u, 5u, 8u, 13u, 64u}) {
    for (std::size_t cols : {0u, 1u, 2u, 4u, 7u, 8u, 9u, 33u, 128u}) {
      const auto w = randv(rng, rows * cols);
      const auto x = randv(rng, cols);
      const auto xr = randv(rng, rows);

      CHECK(std::abs(ref.dot(w.data(), w.data(), cols < w.size() ? cols : w.size()) -
                     alt.dot(w.data(), w.data(), cols < w.size() ? cols : w.size())) <= 1e-12 * (1.0 + cols));

      std::vector<double> mag(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) mag[r] += std::abs(w[r * cols + c] * x[c]);
      auto y1 = randv(rng, rows);
      auto y2 = y1;
      ref.gemv_acc(w.data(), rows, cols, x.data(), y1.data());
      alt.gemv_acc(w.data(), rows, cols, x.data(), y2.data());
      check_close(y1, y2, mag);

      std::vector<double> magt(cols);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) magt[c] += std::abs(w[r * cols + c] * xr[r]);
      auto t1 = randv(rng, cols);
      auto t2 = t1;
      ref.gemv_t_acc(w.data(), rows, cols, xr.data(), t1.data());
      alt.gemv_t_acc(w.data(), rows, cols, xr.data(), t2.data());
      check_close(t1, t2, magt);

      auto a1 = w;
      auto a2 = w;
      ref.ger(0.75, xr.data(), rows, x.data(), cols, a1.data());
      alt.ger(0.75, xr.data(), rows, x.data(), cols, a2.data());
      check_close(a1, a2, std::vector<double>(a1.size(), 4.0));

      auto p1 = x;
      auto p2 = x;
      ref.axpy(-1.5, x.data(), p1.data(), cols);
      alt.axpy(-1.5, x.data(), p2.data(), cols);
      check_close(p1, p2, std::vector<double>(cols, 2.0));
    }
  }
}

}  // namespace

TEST_CASE("scalar kernels agree with naive loops") {
  const KernelTable& k = rss::kernels::scalar_table();
  const std::vector<double> w{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> x{1, -1, 2};
  std::vector<double> y{10, 20};
  k.gemv_acc(w.data(), 2, 3, x.data(), y.data());
  CHECK(y == std::vector<double>{10 + 1 - 2 + 6, 20 + 4 - 5 + 12});
  std::vector<double> t{0, 0, 0};
  const std::vector<double> xr{1, 2};
  k.gemv_t_acc(w.data(), 2, 3, xr.data(), t.data());
  CHECK(t == std::vector<double>{9, 12, 15});
}

TEST_CASE("avx2 backend matches scalar reference") {
  const KernelTable* avx = rss::kernels::avx2_table();
  if (avx == nullptr) {
    MESSAGE("AVX2 backend unavailable on this build/CPU; skipping");
    return;
  }
  run_equivalence(rss::kernels::scalar_table(), *avx);
}

TEST_CASE("active backend is one of the known tables") {
  const auto& a = rss::kernels::active();
  CHECK((a.name == "scalar" || a.name == "avx2"));
  MESSAGE("active kernels: " << a.name);
}

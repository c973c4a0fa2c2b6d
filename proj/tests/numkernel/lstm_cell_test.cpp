// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <vector>

#include "doctest.h"
#include "rss/numkernel/grad_check.hpp"
#include "rss/numkernel/lstm_cell.hpp"
#include "oracles.hpp"

using namespace rss;
using namespace rss::test;

TEST_CASE("zero weights and inputs give zero state") {
  LstmWeights w(3, 4);
  const auto out = lstm_cell_forward(w, DenseVector(3), DenseVector(4), DenseVector(4));
  for (double v : out.h) CHECK(v == 0.0);
  for (double v : out.c) CHECK(v == 0.0);
  for (double g : out.gate(kInputGate)) CHECK(g == 0.5);
}

TEST_CASE("saturated forget gate carries the cell") {
  LstmWeights w(2, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    w.bias[kInputGate * 3 + j] = -60.0;
    w.bias[kForgetGate * 3 + j] = 60.0;
  }
  const DenseVector c_prev{1e6, 2e6, -3e6};
  const auto out = lstm_cell_forward(w, DenseVector{0.3, -0.2}, DenseVector(3), c_prev);
  for (std::size_t j = 0; j < 3; ++j) CHECK(out.c[j] == doctest::Approx(c_prev[j]).epsilon(1e-12));
}

TEST_CASE("forward matches scalar oracle and respects activation ranges") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + trial % 5, d = 1 + trial % 6;
    const LstmWeights w = test::random_lstm(rng, in, d, 0.8);
    const DenseVector x = test::random_vector(rng, in);
    const DenseVector h = test::random_vector(rng, d);
    const DenseVector c = test::random_vector(rng, d);
    const auto out = lstm_cell_forward(w, x, h, c);
    const auto ref = test::scalar_lstm_step(w, x.values(), h.values(), c.values());
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(std::abs(out.h[j] - ref.h[j]) <= 1e-12);
      CHECK(std::abs(out.c[j] - ref.c[j]) <= 1e-12);
      CHECK(std::abs(out.tanh_c[j]) < 1.0);
    }
    for (Gate g : {kInputGate, kForgetGate, kOutputGate})
      for (double a : out.gate(g)) CHECK((a > 0.0 && a < 1.0));
    for (double a : out.gate(kCandidate)) CHECK((a > -1.0 && a < 1.0));
  }
}

TEST_CASE("forward rejects mismatched dimensions") {
  LstmWeights w(3, 2);
  CHECK_THROWS_AS(lstm_cell_forward(w, DenseVector(2), DenseVector(2), DenseVector(2)), std::invalid_argument);
  CHECK_THROWS_AS(lstm_cell_forward(w, DenseVector(3), DenseVector(3), DenseVector(2)), std::invalid_argument);
}

TEST_CASE("backward of zero upstream gradient is zero") {
  std::mt19937_64 rng(8);
  const LstmWeights w = test::random_lstm(rng, 3, 4);
  const auto cache = lstm_cell_forward(w, test::random_vector(rng, 3), test::random_vector(rng, 4),
                                       test::random_vector(rng, 4));
  LstmWeights dw(3, 4);
  const auto g = lstm_cell_backward(cache, DenseVector(4), DenseVector(4), w, &dw);
  for (double v : g.dx) CHECK(v == 0.0);
  for (double v : g.dh_prev) CHECK(v == 0.0);
  for (double v : g.dc_prev) CHECK(v == 0.0);
  for (double v : pack_lstm(dw)) CHECK(v == 0.0);
}

TEST_CASE("backward matches central differences on 100 random cells") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + trial % 4, d = 1 + (trial / 4) % 5;
    const LstmWeights w = test::random_lstm(rng, in, d, 0.7);
    const DenseVector x = test::random_vector(rng, in);
    const DenseVector h = test::random_vector(rng, d);
    const DenseVector c = test::random_vector(rng, d);
    const DenseVector dh = test::random_vector(rng, d);
    const DenseVector dc = test::random_vector(rng, d);

    const auto cache = lstm_cell_forward(w, x, h, c);
    LstmWeights dw(in, d);
    const auto g = lstm_cell_backward(cache, dh, dc, w, &dw);

    worst = std::max(worst, grad_check([&](std::span<const double> v) { return lstm_probe(w, v, h, c, dh, dc); },
                                       [&](std::span<const double>) { return g.dx; }, x));
    worst = std::max(worst, grad_check([&](std::span<const double> v) { return lstm_probe(w, x, v, c, dh, dc); },
                                       [&](std::span<const double>) { return g.dh_prev; }, h));
    worst = std::max(worst, grad_check([&](std::span<const double> v) { return lstm_probe(w, x, h, v, dh, dc); },
                                       [&](std::span<const double>) { return g.dc_prev; }, c));
    const auto packed = pack_lstm(w);
    worst = std::max(worst, grad_check(
                                [&](std::span<const double> v) { return lstm_probe(unpack_lstm(v, in, d), x, h, c, dh, dc); },
                                [&](std::span<const double>) { return DenseVector(pack_lstm(dw)); }, packed));
  }
  MESSAGE("worst relative error: " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("dc_prev direction reproduced by perturbing c_prev alone") {
  std::mt19937_64 rng(99);
  const LstmWeights w = test::random_lstm(rng, 2, 3);
  const DenseVector x = test::random_vector(rng, 2), h = test::random_vector(rng, 3);
  const DenseVector c = test::random_vector(rng, 3);
  const DenseVector dh = test::random_vector(rng, 3), dc = test::random_vector(rng, 3);
  const auto g = lstm_cell_backward(lstm_cell_forward(w, x, h, c), dh, dc, w);
  const DenseVector fd = numeric_gradient([&](std::span<const double> v) { return lstm_probe(w, x, h, v, dh, dc); }, c, 1e-6);
  // Same direction: cosine similarity ~1.
  double dot = 0, na = 0, nb = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    dot += fd[j] * g.dc_prev[j];
    na += fd[j] * fd[j];
    nb += g.dc_prev[j] * g.dc_prev[j];
  }
  CHECK(dot / std::sqrt(na * nb) == doctest::Approx(1.0).epsilon(1e-9));
}

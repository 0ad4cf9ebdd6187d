/*
 * Copyright 2026 The Regen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.h"
#include "regen/dsp.h"
#include "regen/error.h"
#include "regen/grad_suite.h"
#include "regen/tensor.h"

namespace regen::ad {
namespace {

Tensor randn(Shape shape, unsigned seed, bool requires_grad = true) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(gen);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

TEST(Autodiff, ProductRuleAndSharedInputs) {
  // f(x) = sum(x * x + 3 x) -> df/dx = 2x + 3, with x used three times.
  Tensor x = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  Tensor f = sum(add(mul(x, x), scale(x, 3.0)));
  f.backward();
  EXPECT_DOUBLE_EQ(f.item(), 1 + 3 + 4 - 6 + 0.25 + 1.5);
  EXPECT_EQ(x.grad(), (std::vector<double>{5.0, -1.0, 4.0}));
}

TEST(Autodiff, GradientsAccumulateAcrossBackwardCalls) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  sum(x).backward();
  sum(scale(x, 2.0)).backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{3.0, 3.0}));
  x.zero_grad();
  EXPECT_FALSE(x.has_grad() && x.grad()[0] != 0.0);
}

TEST(Autodiff, NoGradGuardAndDetachStopRecording) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(square(x).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  Tensor y = add(square(x.detach()), x);
  sum(y).backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{1.0, 1.0}));
}

TEST(Autodiff, BackwardNeedsScalar) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  EXPECT_THROW(square(x).backward(), ShapeError);
  EXPECT_THROW(add(x, Tensor::from({3}, {1, 2, 3})), ShapeError);
}

TEST(Ops, MatmulMatchesDirectSum) {
  const Tensor a = randn({3, 4}, 1), b = randn({4, 2}, 2);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.values()[i * 4 + k] * b.values()[k * 2 + j];
      EXPECT_NEAR(c.values()[i * 2 + j], s, 1e-12);
    }
  }
}

TEST(Ops, ConvolutionMatchesDirectSum) {
  const Tensor x = randn({2, 3, 17}, 3), w = randn({4, 3, 3}, 4), b = randn({4}, 5);
  for (const auto& opt : {Conv1dOptions::Same(3, 2), Conv1dOptions::Causal(3, 4),
                          Conv1dOptions{2, 1, 0, 0}}) {
    const Tensor y = conv1d(x, w, b, opt);
    const std::size_t t_out = conv1d_output_length(17, 3, opt);
    ASSERT_EQ(y.shape(), (Shape{2, 4, t_out}));
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t o = 0; o < 4; ++o) {
        for (std::size_t t = 0; t < t_out; ++t) {
          double s = b.values()[o];
          for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < 3; ++k) {
              const auto pos = static_cast<std::int64_t>(t * opt.stride + k * opt.dilation) -
                               static_cast<std::int64_t>(opt.pad_left);
              if (pos < 0 || pos >= 17) continue;
              s += w.values()[(o * 3 + c) * 3 + k] * x.values()[(n * 3 + c) * 17 + pos];
            }
          }
          EXPECT_NEAR(y.values()[(n * 4 + o) * t_out + t], s, 1e-12);
        }
      }
    }
  }
}

TEST(Ops, CausalConvolutionIgnoresFuture) {
  Tensor x = randn({1, 2, 20}, 6, false);
  const Tensor w = randn({2, 2, 3}, 7, false);
  const Tensor before = conv1d(x, w, Tensor(), Conv1dOptions::Causal(3, 4));
  x.mutable_values()[15] += 10.0;  // channel 0, t = 15
  const Tensor after = conv1d(x, w, Tensor(), Conv1dOptions::Causal(3, 4));
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t t = 0; t < 15; ++t) {
      EXPECT_EQ(before.values()[o * 20 + t], after.values()[o * 20 + t]);
    }
  }
}

TEST(Ops, StftMatchesDirectDft) {
  const Waveform w = oracle::noise(300, 8, 0.3);
  const Tensor s = stft_magnitude(Tensor::from({300}, w.samples), 64, 16);
  const auto ref = dsp::stft_magnitude(w, 64, 16);
  ASSERT_EQ(s.shape(), (Shape{ref.frames(), 33}));
  for (std::size_t i = 0; i < s.numel(); ++i) EXPECT_NEAR(s.values()[i], ref.values.data[i], 1e-10);
  // Frame 5 from first principles (fully interior: centre 80, span 48..111).
  const auto hann = dsp::hann_window(64);
  std::vector<double> frame(64);
  for (std::size_t n = 0; n < 64; ++n) frame[n] = w.samples[48 + n] * hann[n];
  const auto dft = oracle::naive_dft(frame);
  for (std::size_t k = 0; k < 33; ++k) EXPECT_NEAR(s.values()[5 * 33 + k], std::abs(dft[k]), 1e-10);
}

TEST(Ops, UpsampleAndSlices) {
  const Tensor x = Tensor::from({1, 1, 3}, {1, 2, 3});
  EXPECT_EQ(upsample_nearest1d(x, 2).values(), (std::vector<double>{1, 1, 2, 2, 3, 3}));
  EXPECT_EQ(slice_time(x, 1, 2).values(), (std::vector<double>{2, 3}));
  EXPECT_EQ(concat_time(x, x).values(), (std::vector<double>{1, 2, 3, 1, 2, 3}));
  EXPECT_THROW(slice_time(x, 2, 2), ShapeError);
}

TEST(BatchNorm, TrainingNormalizesPerChannel) {
  const Tensor x = randn({2, 3, 50}, 9, false);
  BatchNormStats stats(3);
  const Tensor ones = Tensor::full({2, 3, 50}, 1.0), zeros = Tensor::zeros({2, 3, 50});
  const Tensor y = batch_norm_conditional(x, ones, zeros, stats, true);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t t = 0; t < 50; ++t) m += y.values()[(b * 3 + c) * 50 + t];
    }
    m /= 100;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t t = 0; t < 50; ++t) {
        v += std::pow(y.values()[(b * 3 + c) * 50 + t] - m, 2);
      }
    }
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 100, 1.0, 1e-3);
    EXPECT_NE(stats.running_mean[c], 0.0);
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // The second function's value depends on t through a detached path, so
  // its analytic gradient is wrong by one everywhere.
  const Tensor x = randn({6}, 10);
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(tanh(t)); }, x), 1e-6);
  auto broken = [](const Tensor& t) {
    Tensor v = sum(square(t));
    return add(v, scale(sum(t.detach()), 1.0));  // value depends on t, gradient does not
  };
  EXPECT_GT(grad_check(broken, x), 0.1);
}

TEST(GradSuite, EveryCaseBelowTolerance) {
  const GradSuiteResult r = run_gradient_suite(11, 2);
  ASSERT_GT(r.cases.size(), 40u);
  for (const auto& c : r.cases) {
    EXPECT_LT(c.max_rel_error, 1e-4) << c.name;
    EXPECT_GT(c.checked, 0u) << c.name;
  }
  // Unresolvable coordinates are rare.
  EXPECT_LT(r.skipped() * 50, r.checked());
}

}  // namespace
}  // namespace regen::ad

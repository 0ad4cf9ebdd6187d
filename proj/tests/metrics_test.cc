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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.h"
#include "regen/error.h"
#include "regen/metrics.h"
#include "regen/random.h"

namespace regen {
namespace {

GaussianSummary gauss(std::vector<double> mean, Matrix cov) {
  GaussianSummary g;
  g.mean = std::move(mean);
  g.covariance = std::move(cov);
  g.count = 100;
  return g;
}

GaussianSummary gauss1(double mu, double var) {
  return gauss({mu}, Matrix(1, 1, var));
}

Matrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// A^T A + eps I, symmetric positive definite.
Matrix random_spd(std::size_t d, std::uint64_t seed) {
  const Matrix a = random_rows(d, d, seed);
  Matrix s(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = i == j ? 0.1 : 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += a.at(k, i) * a.at(k, j);
      s.at(i, j) = acc;
    }
  }
  return s;
}

// Orthogonal matrix by Gram-Schmidt on random columns.
Matrix random_rotation(std::size_t d, std::uint64_t seed) {
  Matrix q = random_rows(d, d, seed);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += q.at(i, j) * q.at(i, k);
      for (std::size_t i = 0; i < d; ++i) q.at(i, j) -= dot * q.at(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q.at(i, j) * q.at(i, j);
    for (std::size_t i = 0; i < d; ++i) q.at(i, j) /= std::sqrt(norm);
  }
  return q;
}

GaussianSummary rotate(const GaussianSummary& g, const Matrix& q) {
  const std::size_t d = g.dim();
  GaussianSummary r = g;
  for (std::size_t i = 0; i < d; ++i) {
    r.mean[i] = 0.0;
    for (std::size_t k = 0; k < d; ++k) r.mean[i] += q.at(i, k) * g.mean[k];
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t l = 0; l < d; ++l) {
          acc += q.at(i, k) * g.covariance.at(k, l) * q.at(j, l);
        }
      }
      r.covariance.at(i, j) = acc;
    }
  }
  return r;
}

// 2x2 closed form: for M = Sa Sb with nonnegative eigenvalues,
// tr sqrt(M) = sqrt(tr M + 2 sqrt(det M)).
double frechet_2x2(const GaussianSummary& a, const GaussianSummary& b) {
  const Matrix& x = a.covariance;
  const Matrix& y = b.covariance;
  double tr_m = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 2; ++k) tr_m += x.at(i, k) * y.at(k, i);
  }
  const double det = (x.at(0, 0) * x.at(1, 1) - x.at(0, 1) * x.at(1, 0)) *
                     (y.at(0, 0) * y.at(1, 1) - y.at(0, 1) * y.at(1, 0));
  const double dm0 = a.mean[0] - b.mean[0], dm1 = a.mean[1] - b.mean[1];
  return dm0 * dm0 + dm1 * dm1 + x.at(0, 0) + x.at(1, 1) + y.at(0, 0) + y.at(1, 1) -
         2.0 * std::sqrt(tr_m + 2.0 * std::sqrt(det));
}

TEST(Frechet, OneDimensionalClosedForms) {
  EXPECT_NEAR(frechet_distance(gauss1(0, 1), gauss1(1, 1)), 1.0, 1e-8);
  EXPECT_NEAR(frechet_distance(gauss1(0, 1), gauss1(0, 4)), 1.0, 1e-8);
  EXPECT_NEAR(frechet_distance(gauss1(3, 2), gauss1(3, 2)), 0.0, 1e-8);
}

TEST(Frechet, MatchesTwoByTwoClosedForm) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GaussianSummary a = gauss({0.3, -1.0}, random_spd(2, 2 * s));
    const GaussianSummary b = gauss({-0.5, 0.2}, random_spd(2, 2 * s + 1));
    EXPECT_NEAR(frechet_distance(a, b), frechet_2x2(a, b), 1e-8) << s;
  }
}

TEST(Frechet, DiagonalCovariancesSumPerCoordinate) {
  Matrix sa(3, 3), sb(3, 3);
  const double va[] = {1.0, 4.0, 0.25}, vb[] = {9.0, 1.0, 0.25};
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    sa.at(i, i) = va[i];
    sb.at(i, i) = vb[i];
    expected += std::pow(std::sqrt(va[i]) - std::sqrt(vb[i]), 2);
  }
  EXPECT_NEAR(frechet_distance(gauss({0, 0, 0}, sa), gauss({0, 0, 0}, sb)), expected, 1e-9);
}

TEST(Frechet, SymmetricNonnegativeAndZeroOnEqual) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t d = 2 + s % 5;
    Rng rng(100 + s);
    const GaussianSummary a = gauss(rng.normal_vector(d), random_spd(d, 7 * s));
    const GaussianSummary b = gauss(rng.normal_vector(d), random_spd(d, 7 * s + 3));
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    EXPECT_NEAR(ab, ba, 1e-8 * std::max(1.0, ab));
    EXPECT_GE(ab, 0.0);
    EXPECT_GT(ab, 1e-3);
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-8 * d);
  }
}

TEST(Frechet, SingularCovarianceIsClampedNotNegative) {
  // Rank-one covariances give round-off eigenvalues just below zero.
  Matrix s(3, 3);
  const double v[] = {1.0, 2.0, -1.0};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) s.at(i, j) = v[i] * v[j];
  }
  const double d = frechet_distance(gauss({0, 0, 0}, s), gauss({0, 0, 0}, s));
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_NEAR(d, 0.0, 1e-6);
}

TEST(Frechet, InvariantUnderRotation) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t d = 4;
    Rng rng(s);
    const GaussianSummary a = gauss(rng.normal_vector(d), random_spd(d, 11 + s));
    const GaussianSummary b = gauss(rng.normal_vector(d), random_spd(d, 21 + s));
    const Matrix q = random_rotation(d, 31 + s);
    EXPECT_NEAR(frechet_distance(rotate(a, q), rotate(b, q)), frechet_distance(a, b), 1e-6);
  }
}

TEST(Frechet, DimensionMismatchThrows) {
  EXPECT_THROW(frechet_distance(gauss1(0, 1), gauss({0, 0}, Matrix(2, 2))), ArgumentError);
}

TEST(Summary, HandArithmetic) {
  Matrix two(2, 1);
  two.at(1, 0) = 2.0;
  const GaussianSummary g = summarize_activations(two);
  EXPECT_DOUBLE_EQ(g.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(g.covariance.at(0, 0), 2.0);
  EXPECT_EQ(g.count, 2u);

  Matrix constant(5, 3, 0.7);
  const GaussianSummary c = summarize_activations(constant);
  for (double v : c.covariance.data) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Summary, LargeStandardNormalSample) {
  const GaussianSummary g = summarize_activations(random_rows(100000, 4, 2026));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(g.mean[i], 0.0, 0.02);
    EXPECT_NEAR(g.covariance.at(i, i), 1.0, 0.05);
  }
  EXPECT_NO_THROW(g.validate());
}

TEST(Summary, TooFewRowsThrows) {
  EXPECT_THROW(summarize_activations(Matrix(1, 3)), ArgumentError);
}

TEST(Summary, MergeEqualsWholeSet) {
  const Matrix all = random_rows(50, 3, 4);
  Matrix head(20, 3), tail(30, 3);
  std::copy(all.data.begin(), all.data.begin() + 60, head.data.begin());
  std::copy(all.data.begin() + 60, all.data.end(), tail.data.begin());
  const GaussianSummary whole = summarize_activations(all);
  const GaussianSummary merged =
      merge_summaries(summarize_activations(head), summarize_activations(tail));
  EXPECT_EQ(merged.count, 50u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(merged.mean[i], whole.mean[i], 1e-12);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(merged.covariance.data[i], whole.covariance.data[i], 1e-12);
  }
}

TEST(Summary, ValidateRejectsAsymmetry) {
  Matrix s(2, 2);
  s.at(0, 0) = s.at(1, 1) = 1.0;
  s.at(0, 1) = 0.5;
  EXPECT_THROW(gauss({0, 0}, s).validate(), NumericError);
  s.at(0, 0) = -1.0;
  s.at(0, 1) = 0.0;
  EXPECT_THROW(gauss({0, 0}, s).validate(), NumericError);
}

TEST(ConditionalFdsd, IdenticalPairsGiveZero) {
  const Matrix g = random_rows(40, 5, 8);
  EXPECT_NEAR(conditional_fdsd(g, g), 0.0, 1e-8);
}

TEST(ConditionalFdsd, ConstantOffsetGivesDTimesCSquared) {
  const Matrix ref = random_rows(40, 5, 9);
  Matrix gen = ref;
  for (double& v : gen.data) v += 0.3;
  EXPECT_NEAR(conditional_fdsd(gen, ref), 5 * 0.09, 1e-8);
}

TEST(ConditionalFdsd, ShuffledPairingGivesSameValue) {
  const Matrix ref = random_rows(30, 4, 10);
  const Matrix gen = random_rows(30, 4, 11);
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[3], order[17]);
  Matrix shuffled(30, 4);
  for (std::size_t r = 0; r < 30; ++r) {
    std::copy(gen.row(order[r]).begin(), gen.row(order[r]).end(), shuffled.row(r).begin());
  }
  EXPECT_NEAR(conditional_fdsd(shuffled, ref), conditional_fdsd(gen, ref), 1e-10);
}

TEST(ConditionalFdsd, UnmatchedCountsThrow) {
  EXPECT_THROW(conditional_fdsd(random_rows(5, 2, 1), random_rows(6, 2, 2)), ArgumentError);
  EXPECT_THROW(conditional_fdsd(random_rows(1, 2, 1), random_rows(1, 2, 2)), ArgumentError);
}

TEST(FdsdBetween, SameSetsAreCloseAndJsonHasFields) {
  std::vector<Waveform> a, b;
  for (unsigned i = 0; i < 4; ++i) {
    a.push_back(oracle::sine(200.0 + 50 * i, 0.25));
    b.push_back(oracle::sine(200.0 + 50 * i, 0.25));
  }
  const FdsdResult same = fdsd_between(a, b, true);
  EXPECT_NEAR(same.fdsd, 0.0, 1e-6);
  EXPECT_NEAR(same.cfdsd, 0.0, 1e-6);
  EXPECT_EQ(same.n, 4u);
  EXPECT_EQ(same.d, 40u);
  const auto j = same.to_json();
  for (const char* k : {"fdsd", "cfdsd", "n", "d"}) EXPECT_TRUE(j.contains(k)) << k;

  std::vector<Waveform> noisy;
  for (unsigned i = 0; i < 4; ++i) noisy.push_back(oracle::noise(4000, i, 0.3));
  EXPECT_GT(fdsd_between(noisy, b, false).fdsd, 1.0);
}

TEST(FdsdBetween, EmbeddingResamples24k) {
  const Waveform x16 = oracle::sine(300.0, 0.5);
  const Waveform x24 = oracle::sine(300.0, 0.5, kOutputRateHz);
  const auto e16 = logmel_embedding(x16), e24 = logmel_embedding(x24);
  ASSERT_EQ(e16.size(), e24.size());
  // Off-peak bands sit at the log floor, where resampler leakage dominates.
  const auto peak = std::max_element(e16.begin(), e16.end()) - e16.begin();
  EXPECT_EQ(std::max_element(e24.begin(), e24.end()) - e24.begin(), peak);
  EXPECT_NEAR(e24[peak], e16[peak], 0.05);
}

}  // namespace
}  // namespace regen

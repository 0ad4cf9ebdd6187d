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


#include "regen/metrics.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "regen/error.h"
#include "regen/features.h"

namespace regen {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_eigen(const Matrix& m) {
  MatrixXd out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = m.at(r, c);
  }
  return out;
}

Matrix from_eigen(const MatrixXd& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.at(r, c) = m(r, c);
  }
  return out;
}

// Square root of a symmetric PSD matrix with negative eigenvalues clamped.
MatrixXd psd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void GaussianSummary::validate() const {
  const std::size_t d = dim();
  if (covariance.rows != d || covariance.cols != d) {
    throw ShapeError("covariance is not " + std::to_string(d) + "x" + std::to_string(d));
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      if (std::abs(covariance.at(i, j) - covariance.at(j, i)) > 1e-9) {
        throw NumericError("covariance is not symmetric");
      }
    }
  }
  if (d == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(to_eigen(covariance),
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw NumericError("covariance has a negative eigenvalue");
  }
}

GaussianSummary summarize_activations(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows;
  if (n < 2) {
    throw ArgumentError("need at least 2 embeddings, got " + std::to_string(n));
  }
  const MatrixXd x = to_eigen(embeddings);
  const VectorXd mu = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - mu.transpose();
  MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());
  GaussianSummary s;
  s.mean.assign(mu.data(), mu.data() + mu.size());
  s.covariance = from_eigen(cov);
  s.count = n;
  return s;
}

GaussianSummary merge_summaries(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) throw ArgumentError("summaries differ in dimension");
  if (a.count < 1 || b.count < 1) throw ArgumentError("summaries must be non-empty");
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = na + nb;
  const VectorXd ma = Eigen::Map<const VectorXd>(a.mean.data(), a.dim());
  const VectorXd mb = Eigen::Map<const VectorXd>(b.mean.data(), b.dim());
  const VectorXd delta = mb - ma;
  const MatrixXd scatter = (na - 1.0) * to_eigen(a.covariance) +
                           (nb - 1.0) * to_eigen(b.covariance) +
                           (na * nb / n) * delta * delta.transpose();
  const VectorXd mu = (na * ma + nb * mb) / n;
  GaussianSummary s;
  s.mean.assign(mu.data(), mu.data() + mu.size());
  s.covariance = from_eigen(scatter / (n - 1.0));
  s.count = a.count + b.count;
  return s;
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) {
    throw ArgumentError("summaries differ in dimension (" + std::to_string(a.dim()) +
                        " vs " + std::to_string(b.dim()) + ")");
  }
  const std::size_t d = a.dim();
  if (a.covariance.rows != d || b.covariance.rows != d) {
    throw ShapeError("covariance does not match the mean dimension");
  }
  const VectorXd diff = Eigen::Map<const VectorXd>(a.mean.data(), d) -
                        Eigen::Map<const VectorXd>(b.mean.data(), d);
  const MatrixXd sa = to_eigen(a.covariance);
  const MatrixXd sb = to_eigen(b.covariance);
  const MatrixXd ra = psd_sqrt(sa);
  const MatrixXd inner = ra * sb * ra;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (inner + inner.transpose()),
                                             Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = diff.squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

double conditional_fdsd(const Matrix& generated, const Matrix& reference) {
  if (generated.rows != reference.rows) {
    throw ArgumentError("unmatched pairs: " + std::to_string(generated.rows) +
                        " generated vs " + std::to_string(reference.rows) +
                        " reference embeddings");
  }
  if (generated.rows < 2) throw ArgumentError("need at least 2 matched pairs");
  return frechet_distance(summarize_activations(generated),
                          summarize_activations(reference));
}

std::vector<double> logmel_embedding(const Waveform& input) {
  const Waveform x =
      input.sample_rate_hz == kInputRateHz ? input : resample(input, kInputRateHz);
  if (x.empty()) throw ArgumentError("cannot embed an empty signal");
  const std::size_t frames = (x.size() + kInputHop - 1) / kInputHop;
  std::vector<double> mean(kMelBands, 0.0);
  std::vector<double> window(512);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t * kInputHop) - 128;
    for (std::size_t i = 0; i < window.size(); ++i) {
      const std::int64_t k = start + static_cast<std::int64_t>(i);
      window[i] = k >= 0 && k < static_cast<std::int64_t>(x.size()) ? x.samples[k] : 0.0;
    }
    const std::vector<double> mel = content_log_mel(window);
    for (std::size_t b = 0; b < mean.size(); ++b) mean[b] += mel[b];
  }
  for (double& v : mean) v /= static_cast<double>(frames);
  return mean;
}

nlohmann::json FdsdResult::to_json() const {
  nlohmann::json j = {{"fdsd", fdsd}, {"n", n}, {"d", d}};
  if (paired) j["cfdsd"] = cfdsd;
  return j;
}

FdsdResult fdsd_between(const std::vector<Waveform>& generated,
                        const std::vector<Waveform>& reference, bool paired) {
  if (paired && generated.size() != reference.size()) {
    throw ArgumentError("paired evaluation needs equal set sizes");
  }
  auto embed = [](const std::vector<Waveform>& set) {
    Matrix m(set.size(), kMelBands);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto e = logmel_embedding(set[i]);
      std::copy(e.begin(), e.end(), m.row(i).begin());
    }
    return m;
  };
  const Matrix g = embed(generated);
  const Matrix r = embed(reference);
  FdsdResult out;
  out.fdsd = frechet_distance(summarize_activations(g), summarize_activations(r));
  out.paired = paired;
  if (paired) out.cfdsd = conditional_fdsd(g, r);
  out.n = generated.size();
  out.d = kMelBands;
  return out;
}

}  // namespace regen

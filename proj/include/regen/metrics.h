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


// Frechet distance between Gaussian summaries of embedding sets:
//
//   d = |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))
//
// The trace of the matrix square root is computed from the symmetric form
// S_a^(1/2) S_b S_a^(1/2), whose eigenvalues equal those of S_a S_b; negative
// eigenvalues from round-off are clamped to zero.

#ifndef REGEN_METRICS_H_
#define REGEN_METRICS_H_

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/matrix.h"

namespace regen {

struct GaussianSummary {
  std::vector<double> mean;
  Matrix covariance;  // d x d
  std::size_t count = 0;

  std::size_t dim() const { return mean.size(); }
  // Throws NumericError unless the covariance is symmetric within 1e-9 with
  // eigenvalues >= -1e-9.
  void validate() const;
};

// Sample mean and unbiased covariance of the rows of `embeddings` [n x d].
// Throws ArgumentError for n < 2.
GaussianSummary summarize_activations(const Matrix& embeddings);

// Pooled summary of two disjoint sets (parallel reduction).
GaussianSummary merge_summaries(const GaussianSummary& a, const GaussianSummary& b);

// Throws ArgumentError on a dimension mismatch.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

// Frechet distance between the generated set and its matched references.
// Throws ArgumentError unless both hold the same number (>= 2) of rows.
double conditional_fdsd(const Matrix& generated, const Matrix& reference);

// Desk-scale embedding: the frame average of the 40-band log-mel of a 16 kHz
// signal (other rates are resampled). Not comparable with ASR-activation
// distances.
std::vector<double> logmel_embedding(const Waveform& x);

struct FdsdResult {
  double fdsd = 0.0;
  double cfdsd = 0.0;  // only when paired
  bool paired = false;
  std::size_t n = 0;
  std::size_t d = 0;
  nlohmann::json to_json() const;
};

// Embeds both sets and computes the distances. With `paired`, rows must be
// matched in order.
FdsdResult fdsd_between(const std::vector<Waveform>& generated,
                        const std::vector<Waveform>& reference, bool paired);

}  // namespace regen

#endif  // REGEN_METRICS_H_

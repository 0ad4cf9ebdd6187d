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
#include <filesystem>
#include <numbers>

#include "oracles.h"
#include "regen/audio_io.h"
#include "regen/dsp.h"
#include "regen/error.h"
#include "regen/features.h"

namespace regen {
namespace {

TEST(Fft, MatchesDirectDft) {
  const Waveform w = oracle::noise(256, 3, 0.3);
  const auto expected = oracle::naive_dft(w.samples);
  std::vector<std::complex<double>> x(w.samples.begin(), w.samples.end());
  dsp::FftPlan(256).forward(x);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_NEAR(x[k].real(), expected[k].real(), 1e-9);
    EXPECT_NEAR(x[k].imag(), expected[k].imag(), 1e-9);
  }
}

TEST(Fft, InverseRoundTrip) {
  const Waveform w = oracle::noise(512, 4);
  std::vector<std::complex<double>> x(w.samples.begin(), w.samples.end());
  const auto plan = dsp::FftPlan::Get(512);
  plan->forward(x);
  plan->inverse_unscaled(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(x[i].real() / 512.0, w.samples[i], 1e-12);
  }
  EXPECT_THROW(dsp::FftPlan(48), ArgumentError);
}

TEST(Stft, FrameCountAndSinePeak) {
  const Waveform w = oracle::sine(1000.0, 0.25);
  const auto spec = dsp::stft_magnitude(w, 512, 128);
  EXPECT_EQ(spec.frames(), (w.size() + 127) / 128);
  EXPECT_EQ(spec.bins(), 257u);
  // 1 kHz at 16 kHz with N = 512 lands on bin 32.
  const auto row = spec.values.row(spec.frames() / 2);
  const auto peak = std::max_element(row.begin(), row.end()) - row.begin();
  EXPECT_EQ(peak, 32);
  // Hann sum is N/2, so a centred sine of amplitude a peaks at a N / 4.
  EXPECT_NEAR(row[32], 0.5 * 512 / 4.0, 1e-6);
}

TEST(Stft, RejectsBadArguments) {
  const Waveform w = oracle::sine(440.0, 0.1);
  EXPECT_THROW(dsp::stft_magnitude(w, 100, 25), ArgumentError);
  EXPECT_THROW(dsp::stft_magnitude(w, 4096, 1024), ArgumentError);
  EXPECT_THROW(dsp::stft_magnitude(w, 512, 0), ArgumentError);
}

TEST(AWeighting, MatchesIecFormula) {
  for (double f : {31.5, 100.0, 500.0, 1000.0, 4000.0, 10000.0}) {
    EXPECT_NEAR(dsp::a_weight_gain_db(f), oracle::iec_a_weight_db(f), 0.01) << f;
  }
  // Tabulated class-1 values.
  EXPECT_NEAR(dsp::a_weight_gain_db(100.0), -19.1, 0.2);
  EXPECT_NEAR(dsp::a_weight_gain_db(1000.0), 0.0, 1e-9);
  EXPECT_NEAR(dsp::a_weight_gain_db(10000.0), -2.5, 0.2);
}

TEST(Loudness, AWeightedGapBetweenTones) {
  const auto low = extract_loudness(oracle::sine(100.0, 1.0, kInputRateHz, 0.1));
  const auto mid = extract_loudness(oracle::sine(1000.0, 1.0, kInputRateHz, 0.1));
  ASSERT_EQ(low.size(), mid.size());
  std::vector<double> gaps;
  for (std::size_t t = 20; t + 20 < low.size(); ++t) gaps.push_back(mid.dba[t] - low.dba[t]);
  EXPECT_NEAR(oracle::median(gaps), -oracle::iec_a_weight_db(100.0), 1.0);
}

double median_abs_error(const PitchTrack& track, double f0) {
  std::vector<double> errors;
  for (std::size_t t = 10; t + 10 < track.size(); ++t) {
    errors.push_back(track.voicing[t] ? std::abs(track.f0_hz[t] - f0) : f0);
  }
  return oracle::median(errors);
}

TEST(Pitch, StationarySines) {
  for (double f0 : {220.0, 440.0}) {
    const Waveform w = oracle::sine(f0, 1.0);
    EXPECT_LT(median_abs_error(extract_pitch(w, FeatureMode::kOffline), f0), 2.0) << f0;
    EXPECT_LT(median_abs_error(extract_pitch(w, FeatureMode::kCausal), f0), 2.0) << f0;
  }
}

TEST(Pitch, SweepTracksAutocorrelationOracle) {
  const Waveform w = oracle::sweep(100.0, 400.0, 2.0);
  const PitchTrack track = extract_pitch(w);
  std::vector<double> rel;
  for (std::size_t t = 10; t + 10 < track.size(); ++t) {
    const double ref = oracle::autocorr_pitch(w.samples, 64 * t + 32);
    rel.push_back(track.voicing[t] ? std::abs(track.f0_hz[t] - ref) / ref : 1.0);
  }
  EXPECT_LT(oracle::median(rel), 0.05);
}

TEST(Pitch, SilenceIsUnvoiced) {
  const PitchTrack track = extract_pitch(Waveform(std::vector<double>(16000, 0.0), 16000));
  for (std::size_t t = 0; t < track.size(); ++t) {
    EXPECT_EQ(track.voicing[t], 0);
    EXPECT_EQ(track.f0_hz[t], 0.0);
  }
}

TEST(Pitch, RejectsShortOrWrongRate) {
  EXPECT_THROW(extract_pitch(oracle::sine(220.0, 0.01)), ArgumentError);
  EXPECT_THROW(extract_pitch(oracle::sine(220.0, 1.0, 24000)), ArgumentError);
}

TEST(Mel, WeightsCoverEveryFilter) {
  const Matrix w = dsp::mel_weights(512, 16000, 40, 0.0, 8000.0);
  ASSERT_EQ(w.rows, 40u);
  for (std::size_t m = 0; m < w.rows; ++m) {
    double s = 0.0;
    for (double v : w.row(m)) s += v;
    EXPECT_GT(s, 0.0) << m;
  }
  EXPECT_NEAR(dsp::mel_to_hz(dsp::hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Resample, PreservesToneFrequency) {
  const Waveform in = oracle::sine(440.0, 0.5, 16000);
  const Waveform out = resample(in, 24000);
  ASSERT_EQ(out.size(), 12000u);
  const Waveform ref = oracle::sine(440.0, 0.5, 24000);
  double err = 0.0;
  for (std::size_t i = 200; i + 200 < out.size(); ++i) {
    err = std::max(err, std::abs(out.samples[i] - ref.samples[i]));
  }
  EXPECT_LT(err, 5e-3);
  EXPECT_EQ(resample(in, 16000), in);
}

TEST(Wav, RoundTripBothEncodings) {
  const Waveform w = oracle::noise(1000, 9, 0.2);
  const Waveform f = decode_wav(encode_wav(w, WavEncoding::kFloat32));
  ASSERT_EQ(f.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(f.samples[i], static_cast<float>(w.samples[i]));
  }
  const Waveform p = decode_wav(encode_wav(w, WavEncoding::kPcm16));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(p.samples[i], w.samples[i], 1.0 / 32768);
}

TEST(Wav, MalformedInputsFailCleanly) {
  auto bytes = encode_wav(oracle::sine(440.0, 0.05), WavEncoding::kPcm16);
  EXPECT_THROW(decode_wav(std::span(bytes.data(), 20)), ParseError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_wav(bytes), ParseError);
  EXPECT_THROW(read_wav("/nonexistent/file.wav"), IoError);
}

TEST(Frames, GridArithmetic) {
  const FrameGrid g = FrameGrid::ForRate(16000, 250, 512);
  EXPECT_EQ(g.hop_samples, 64);
  EXPECT_EQ(g.num_frames(16000), 250u);
  EXPECT_EQ(g.num_frames(16001), 251u);
  EXPECT_THROW(FrameGrid::ForRate(16000, 300, 512), ArgumentError);
  const auto frames = segment_frames(std::vector<double>(130, 1.0), 100, 64);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[2][1], 1.0);
  EXPECT_EQ(frames[2][2], 0.0);
}

}  // namespace
}  // namespace regen

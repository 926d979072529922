/*
 * Copyright 2026 The sedlab Authors
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

// Log-mel front end: 10 s clips at 44.1 kHz become 128 x 1024 grids of
// natural-log mel band energies (2048-sample Hann windows, hop 431,
// centered frames with reflection padding).

#ifndef SEDLAB_FEATURES_H_
#define SEDLAB_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace sedlab {

inline constexpr int kSampleRate = 44100;
inline constexpr std::size_t kClipSamples = 441000;  // 10 s
inline constexpr std::size_t kFftSize = 2048;
inline constexpr std::size_t kHopLength = 431;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kNumFrames = kClipSamples / kHopLength + 1;
inline constexpr std::size_t kNumMels = 128;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kFrameHopSeconds =
    static_cast<double>(kHopLength) / kSampleRate;

static_assert(kNumFrames == 1024);

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  // Throws std::invalid_argument unless the rate is 44100 Hz and every
  // sample is finite.
  void validate() const;
};

// Dense bins x frames grid, row-major (one row per bin or band).
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

// Symmetric Hann window, w[k] = 0.5 (1 - cos(2 pi k / (n - 1))). n >= 2.
std::vector<double> hann_window(std::size_t n);

// In-place radix-2 complex DFT; size must be a power of two.
void fft_inplace(std::span<double> re, std::span<double> im);

// Zero-pads or truncates to exactly kClipSamples. Empty input is rejected.
std::vector<float> pad_truncate(std::span<const float> samples);

// |DFT| of each centered, Hann-windowed frame. The clip must already hold
// kClipSamples samples. Result: kNumBins x kNumFrames.
Grid stft_magnitude(const AudioClip& clip);

// Triangular filters with peaks equally spaced on 2595 log10(1 + f / 700).
// Result: n_mels x (n_fft / 2 + 1). Throws std::invalid_argument if a filter
// would cover no FFT bin or the band edges are invalid.
Grid mel_filterbank(std::size_t n_mels = kNumMels, std::size_t n_fft = kFftSize,
                    double sample_rate = kSampleRate, double fmin = 0.0,
                    double fmax = kSampleRate / 2.0);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Mel band energies before the log: pad/truncate, STFT power, filterbank.
// Result: kNumMels x kNumFrames.
Grid mel_energies(const AudioClip& clip);

// ln(energy + kLogFloor), in place.
void log_compress(Grid& energies);

// Undoes log_compress (clamped at zero).
void log_expand(Grid& log_mel);

// The full front end. Result: kNumMels x kNumFrames.
Grid log_mel(const AudioClip& clip);

// Adds i.i.d. N(0, (sigma * mean energy)^2) to every cell and clamps at zero.
// sigma = 0 leaves the grid untouched. Throws on negative sigma.
void augment_noise(Grid& energies, double sigma, std::mt19937_64& rng);

// "HPFEAT1" feature file: magic, u32 rows, u32 cols, row-major f32 values,
// all little-endian.
void write_features(const Grid& grid, const std::filesystem::path& path);
Grid read_features(const std::filesystem::path& path);

}  // namespace sedlab

#endif  // SEDLAB_FEATURES_H_

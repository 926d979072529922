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

#include "sedlab/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "binary_io.h"

namespace sedlab {

namespace {

constexpr char kFeatureMagic[] = "HPFEAT1";

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

struct SparseFilter {
  std::size_t first_bin = 0;
  std::vector<double> weights;
};

std::vector<SparseFilter> sparse_rows(const Grid& bank) {
  std::vector<SparseFilter> rows(bank.rows);
  for (std::size_t m = 0; m < bank.rows; ++m) {
    std::size_t lo = bank.cols, hi = 0;
    for (std::size_t b = 0; b < bank.cols; ++b) {
      if (bank.at(m, b) > 0.0f) {
        lo = std::min(lo, b);
        hi = b;
      }
    }
    rows[m].first_bin = lo;
    for (std::size_t b = lo; b <= hi && lo < bank.cols; ++b)
      rows[m].weights.push_back(bank.at(m, b));
  }
  return rows;
}

// Real-input DFT of an even-length frame through a half-length complex
// transform. Writes |X[k]|^2 or |X[k]| for k = 0..n/2.
void real_spectrum(std::vector<double>& frame, std::vector<double>& re,
                   std::vector<double>& im, bool power, double* out) {
  const std::size_t n = frame.size();
  const std::size_t h = n / 2;
  for (std::size_t i = 0; i < h; ++i) {
    re[i] = frame[2 * i];
    im[i] = frame[2 * i + 1];
  }
  fft_inplace(re, im);
  for (std::size_t k = 0; k <= h; ++k) {
    const std::size_t a = k % h;
    const std::size_t b = (h - k) % h;
    const std::complex<double> zk(re[a], im[a]);
    const std::complex<double> zc(re[b], -im[b]);
    const std::complex<double> even = 0.5 * (zk + zc);
    const std::complex<double> odd = std::complex<double>(0.0, -0.5) * (zk - zc);
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    const std::complex<double> x =
        even + std::polar(1.0, angle) * odd;
    out[k] = power ? std::norm(x) : std::abs(x);
  }
}

template <typename Sink>
void for_each_frame(const AudioClip& clip, bool power, Sink&& sink) {
  if (clip.samples.size() != kClipSamples) {
    throw std::invalid_argument(
        "stft: clip must hold " + std::to_string(kClipSamples) +
        " samples, got " + std::to_string(clip.samples.size()));
  }
  const auto window = hann_window(kFftSize);
  const std::ptrdiff_t pad = kFftSize / 2;
  const auto len = static_cast<std::ptrdiff_t>(clip.samples.size());
  std::vector<double> frame(kFftSize), re(kFftSize / 2), im(kFftSize / 2);
  std::vector<double> spectrum(kNumBins);
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * kHopLength) - pad;
    for (std::size_t i = 0; i < kFftSize; ++i) {
      std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
      if (idx < 0) idx = -idx;
      if (idx >= len) idx = 2 * (len - 1) - idx;
      frame[i] = clip.samples[static_cast<std::size_t>(idx)] * window[i];
    }
    real_spectrum(frame, re, im, power, spectrum.data());
    sink(t, spectrum);
  }
}

}  // namespace

void AudioClip::validate() const {
  if (sample_rate != kSampleRate) {
    throw std::invalid_argument("expected a 44100 Hz clip, got " +
                                std::to_string(sample_rate) + " Hz");
  }
  for (float s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("clip has non-finite samples");
  }
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw std::invalid_argument("hann_window: n must be >= 2");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(n - 1)));
  }
  return w;
}

void fft_inplace(std::span<double> re, std::span<double> im) {
  const std::size_t n = re.size();
  if (im.size() != n || !is_power_of_two(n)) {
    throw std::invalid_argument("fft: size must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(angle), wi = std::sin(angle);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::size_t a = i + j, b = a + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double next = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = next;
      }
    }
  }
}

std::vector<float> pad_truncate(std::span<const float> samples) {
  if (samples.empty()) throw std::invalid_argument("pad_truncate: empty input");
  std::vector<float> out(kClipSamples, 0.0f);
  std::copy_n(samples.begin(), std::min(samples.size(), kClipSamples), out.begin());
  return out;
}

Grid stft_magnitude(const AudioClip& clip) {
  Grid g{kNumBins, kNumFrames, std::vector<float>(kNumBins * kNumFrames)};
  for_each_frame(clip, false, [&](std::size_t t, const std::vector<double>& s) {
    for (std::size_t b = 0; b < kNumBins; ++b)
      g.values[b * kNumFrames + t] = static_cast<float>(s[b]);
  });
  return g;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Grid mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate,
                    double fmin, double fmax) {
  if (n_mels == 0 || n_fft < 2 || !(fmin >= 0.0) || !(fmin < fmax) ||
      fmax > sample_rate / 2.0) {
    throw std::invalid_argument("mel_filterbank: invalid band edges");
  }
  const std::size_t bins = n_fft / 2 + 1;
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(n_mels + 1));
  }
  Grid bank{n_mels, bins, std::vector<float>(n_mels * bins, 0.0f)};
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool any = false;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(n_fft);
      const double w = std::max(0.0, std::min((f - left) / (center - left),
                                              (right - f) / (right - center)));
      if (w > 0.0) {
        bank.at(m, b) = static_cast<float>(w);
        any = true;
      }
    }
    if (!any) {
      throw std::invalid_argument("mel_filterbank: filter " + std::to_string(m) +
                                  " covers no FFT bin; too many mel bands for n_fft=" +
                                  std::to_string(n_fft));
    }
  }
  return bank;
}

Grid mel_energies(const AudioClip& clip) {
  clip.validate();
  AudioClip fixed{pad_truncate(clip.samples), clip.sample_rate};
  static const std::vector<SparseFilter> filters = sparse_rows(mel_filterbank());
  Grid out{kNumMels, kNumFrames, std::vector<float>(kNumMels * kNumFrames)};
  for_each_frame(fixed, true, [&](std::size_t t, const std::vector<double>& p) {
    for (std::size_t m = 0; m < kNumMels; ++m) {
      const auto& f = filters[m];
      double e = 0.0;
      for (std::size_t i = 0; i < f.weights.size(); ++i)
        e += f.weights[i] * p[f.first_bin + i];
      out.values[m * kNumFrames + t] = static_cast<float>(e);
    }
  });
  return out;
}

void log_compress(Grid& energies) {
  for (auto& v : energies.values)
    v = static_cast<float>(std::log(static_cast<double>(v) + kLogFloor));
}

void log_expand(Grid& log_mel) {
  for (auto& v : log_mel.values)
    v = static_cast<float>(std::max(0.0, std::exp(static_cast<double>(v)) - kLogFloor));
}

Grid log_mel(const AudioClip& clip) {
  Grid g = mel_energies(clip);
  log_compress(g);
  return g;
}

void augment_noise(Grid& energies, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("augment_noise: sigma must be >= 0");
  if (sigma == 0.0 || energies.values.empty()) return;
  double total = 0.0;
  for (float v : energies.values) total += v;
  const double stddev = sigma * total / static_cast<double>(energies.values.size());
  if (stddev <= 0.0) return;
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& v : energies.values)
    v = static_cast<float>(std::max(0.0, static_cast<double>(v) + noise(rng)));
}

void write_features(const Grid& grid, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write features " + path.string());
  os.write(kFeatureMagic, sizeof(kFeatureMagic) - 1);
  binary::write_u32(os, static_cast<std::uint32_t>(grid.rows));
  binary::write_u32(os, static_cast<std::uint32_t>(grid.cols));
  binary::write_f32_array(os, grid.values.data(), grid.values.size());
  if (!os) throw std::runtime_error("failed writing features " + path.string());
}

Grid read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open features " + path.string());
  if (!binary::read_magic(is, kFeatureMagic)) {
    throw std::runtime_error(path.string() + " is not an HPFEAT1 file");
  }
  std::uint32_t rows = 0, cols = 0;
  if (!binary::read_u32(is, rows) || !binary::read_u32(is, cols) ||
      std::uint64_t(rows) * cols > (1ull << 28)) {
    throw std::runtime_error("corrupt feature header in " + path.string());
  }
  Grid g{rows, cols, std::vector<float>(std::size_t(rows) * cols)};
  if (!binary::read_f32_array(is, g.values.data(), g.values.size())) {
    throw std::runtime_error("truncated feature file " + path.string());
  }
  return g;
}

}  // namespace sedlab

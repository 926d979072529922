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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "sedlab/features.h"
#include "sedlab/wav.h"

using namespace sedlab;

namespace {

// Direct O(n^2) DFT magnitude of one windowed frame taken around `centre`
// of the reflection-padded signal.
std::vector<double> dft_frame(const std::vector<float>& x, std::size_t frame) {
  const auto w = hann_window(kFftSize);
  const auto len = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> seg(kFftSize);
  for (std::size_t i = 0; i < kFftSize; ++i) {
    std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(frame * kHopLength + i) - kFftSize / 2;
    if (idx < 0) idx = -idx;
    if (idx >= len) idx = 2 * (len - 1) - idx;
    seg[i] = x[static_cast<std::size_t>(idx)] * w[i];
  }
  std::vector<double> mag(kNumBins);
  for (std::size_t k = 0; k < kNumBins; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < kFftSize; ++n)
      acc += seg[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / kFftSize);
    mag[k] = std::abs(acc);
  }
  return mag;
}

AudioClip sine_clip(double freq, double amp = 0.5) {
  AudioClip c;
  c.samples.resize(kClipSamples);
  for (std::size_t i = 0; i < kClipSamples; ++i)
    c.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * i / kSampleRate));
  return c;
}

}  // namespace

TEST_CASE("hann window closed form") {
  const auto w4 = hann_window(4);
  REQUIRE(w4.size() == 4);
  CHECK(w4[0] == doctest::Approx(0.0));
  CHECK(w4[1] == doctest::Approx(0.75));
  CHECK(w4[2] == doctest::Approx(0.75));
  CHECK(w4[3] == doctest::Approx(0.0));

  const auto w = hann_window(2048);
  CHECK(w[0] == 0.0);
  CHECK(w[1023] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(w[1024] == doctest::Approx(1.0).epsilon(1e-5));
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    sum += w[k];
    CHECK(w[k] == doctest::Approx(w[w.size() - 1 - k]).epsilon(1e-6));
  }
  CHECK(std::abs(sum - 1023.5) <= 0.5);
  CHECK_THROWS_AS(hann_window(1), std::invalid_argument);
}

TEST_CASE("fft matches direct DFT") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> re(64), im(64);
  for (auto& v : re) v = n(rng);
  for (auto& v : im) v = n(rng);
  const auto re0 = re, im0 = im;
  fft_inplace(re, im);
  for (std::size_t k = 0; k < 64; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < 64; ++t)
      acc += std::complex<double>(re0[t], im0[t]) *
             std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / 64.0);
    CHECK(re[k] == doctest::Approx(acc.real()).epsilon(1e-9));
    CHECK(im[k] == doctest::Approx(acc.imag()).epsilon(1e-9));
  }
  std::vector<double> bad(12), bad_im(12);
  CHECK_THROWS_AS(fft_inplace(bad, bad_im), std::invalid_argument);
}

TEST_CASE("stft magnitudes") {
  SUBCASE("zero clip") {
    AudioClip c;
    c.samples.assign(kClipSamples, 0.0f);
    const Grid g = stft_magnitude(c);
    CHECK(g.rows == kNumBins);
    CHECK(g.cols == kNumFrames);
    for (float v : g.values) REQUIRE(v == 0.0f);
  }
  SUBCASE("constant clip puts the window sum in bin 0") {
    AudioClip c;
    c.samples.assign(kClipSamples, 1.0f);
    const Grid g = stft_magnitude(c);
    CHECK(g.at(0, 500) == doctest::Approx(1023.5).epsilon(1e-6));
    const auto oracle = dft_frame(c.samples, 500);
    CHECK(g.at(0, 500) == doctest::Approx(oracle[0]).epsilon(1e-6));
  }
  SUBCASE("bin-centred sine concentrates energy") {
    const std::size_t k = 93;
    const AudioClip c = sine_clip(k * double(kSampleRate) / kFftSize);
    const Grid g = stft_magnitude(c);
    double total = 0.0;
    for (std::size_t b = 0; b < kNumBins; ++b) total += double(g.at(b, 400)) * g.at(b, 400);
    CHECK(double(g.at(k, 400)) * g.at(k, 400) / total > 0.5);
    // A symmetric Hann window spreads a centred tone over bins k-1..k+1.
    double near = 0.0;
    for (std::size_t b = k - 1; b <= k + 1; ++b) near += double(g.at(b, 400)) * g.at(b, 400);
    CHECK(near / total > 0.9);
    // Every bin of an edge frame (reflection region) against the direct DFT.
    const auto oracle = dft_frame(c.samples, 0);
    for (std::size_t b = 0; b < kNumBins; b += 7)
      CHECK(g.at(b, 0) == doctest::Approx(oracle[b]).epsilon(1e-4).scale(1.0));
  }
  SUBCASE("magnitudes scale linearly") {
    const AudioClip a = sine_clip(1000.0, 0.2), b = sine_clip(1000.0, 0.6);
    const Grid ga = stft_magnitude(a), gb = stft_magnitude(b);
    float peak = 0.0f;
    for (float v : ga.values) peak = std::max(peak, v);
    for (std::size_t i = 0; i < ga.values.size(); i += 97) {
      if (ga.values[i] < 1e-3f * peak) continue;
      CHECK(gb.values[i] == doctest::Approx(3.0 * ga.values[i]).epsilon(1e-4));
    }
  }
  SUBCASE("wrong length") {
    AudioClip c;
    c.samples.assign(1000, 0.0f);
    CHECK_THROWS_AS(stft_magnitude(c), std::invalid_argument);
  }
}

TEST_CASE("mel scale and filterbank") {
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(mel_to_hz(hz_to_mel(3210.0)) == doctest::Approx(3210.0));

  const Grid bank = mel_filterbank();
  CHECK(bank.rows == 128);
  CHECK(bank.cols == 1025);
  double last_peak = -1.0;
  for (std::size_t m = 0; m < bank.rows; ++m) {
    std::size_t first = bank.cols, last = 0, peak = 0;
    for (std::size_t b = 0; b < bank.cols; ++b) {
      REQUIRE(bank.at(m, b) >= 0.0f);
      if (bank.at(m, b) > 0.0f) {
        first = std::min(first, b);
        last = b;
      }
      if (bank.at(m, b) > bank.at(m, peak)) peak = b;
    }
    REQUIRE(first < bank.cols);
    for (std::size_t b = first; b <= last; ++b) REQUIRE(bank.at(m, b) > 0.0f);
    // Peaks are strictly increasing by the centre frequency; ties between
    // neighbouring narrow filters are broken by the weight-weighted centroid.
    double centroid = 0.0, mass = 0.0;
    for (std::size_t b = first; b <= last; ++b) {
      centroid += b * double(bank.at(m, b));
      mass += bank.at(m, b);
    }
    CHECK(centroid / mass > last_peak);
    last_peak = centroid / mass;
  }
  CHECK_THROWS(mel_filterbank(512, 2048));
  CHECK_THROWS_AS(mel_filterbank(128, 2048, 44100.0, 100.0, 50.0), std::invalid_argument);
  CHECK_THROWS_AS(mel_filterbank(128, 2048, 44100.0, 0.0, 30000.0), std::invalid_argument);
}

TEST_CASE("pad_truncate") {
  std::vector<float> exact(kClipSamples, 0.25f);
  CHECK(pad_truncate(exact) == exact);
  std::vector<float> half(220500, 0.5f);
  const auto padded = pad_truncate(half);
  REQUIRE(padded.size() == kClipSamples);
  CHECK(padded[220499] == 0.5f);
  for (std::size_t i = 220500; i < kClipSamples; ++i) REQUIRE(padded[i] == 0.0f);
  std::vector<float> longer(529200);
  for (std::size_t i = 0; i < longer.size(); ++i) longer[i] = float(i % 100);
  const auto cut = pad_truncate(longer);
  REQUIRE(cut.size() == kClipSamples);
  CHECK(std::equal(cut.begin(), cut.end(), longer.begin()));
  CHECK_THROWS_AS(pad_truncate(std::vector<float>{}), std::invalid_argument);
}

TEST_CASE("log_mel") {
  SUBCASE("zero clip hits the floor everywhere") {
    AudioClip c;
    c.samples.assign(1000, 0.0f);
    const Grid g = log_mel(c);
    CHECK(g.rows == 128);
    CHECK(g.cols == 1024);
    for (float v : g.values) REQUIRE(v == static_cast<float>(std::log(kLogFloor)));
  }
  SUBCASE("doubling the amplitude adds log 4") {
    const Grid a = log_mel(sine_clip(2000.0, 0.2));
    const Grid b = log_mel(sine_clip(2000.0, 0.4));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      // Cells well above the floor; the floor term bounds the deviation.
      if (a.values[i] < -5.0f) continue;
      ++checked;
      REQUIRE(b.values[i] - a.values[i] == doctest::Approx(std::log(4.0)).epsilon(1e-3));
    }
    CHECK(checked > 1000);
  }
  SUBCASE("all values finite and above the floor") {
    const Grid g = log_mel(sine_clip(440.0));
    for (float v : g.values) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= static_cast<float>(std::log(kLogFloor)));
    }
  }
  SUBCASE("rejects other sample rates and non-finite samples") {
    AudioClip c = sine_clip(440.0);
    c.sample_rate = 16000;
    CHECK_THROWS_AS(log_mel(c), std::invalid_argument);
    AudioClip d = sine_clip(440.0);
    d.samples[5] = std::nanf("");
    CHECK_THROWS_AS(log_mel(d), std::invalid_argument);
  }
}

TEST_CASE("augment_noise") {
  Grid base{100, 100, std::vector<float>(10000, 2.0f)};
  SUBCASE("sigma 0 is the identity") {
    Grid g = base;
    std::mt19937_64 rng(1);
    augment_noise(g, 0.0, rng);
    CHECK(g.values == base.values);
  }
  SUBCASE("same seed, same output") {
    Grid a = base, b = base;
    std::mt19937_64 r1(9), r2(9);
    augment_noise(a, 0.1, r1);
    augment_noise(b, 0.1, r2);
    CHECK(a.values == b.values);
  }
  SUBCASE("noise std is sigma times the mean energy") {
    Grid g = base;
    std::mt19937_64 rng(5);
    augment_noise(g, 0.1, rng);
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < g.values.size(); ++i) m += g.values[i] - base.values[i];
    m /= g.values.size();
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double d = g.values[i] - base.values[i] - m;
      s += d * d;
    }
    const double stddev = std::sqrt(s / (g.values.size() - 1));
    CHECK(std::abs(stddev - 0.2) <= 0.02);
  }
  SUBCASE("clamped at zero") {
    Grid g{1, 1000, std::vector<float>(1000, 0.0f)};
    g.values[0] = 1000.0f;
    std::mt19937_64 rng(2);
    augment_noise(g, 1.0, rng);
    for (float v : g.values) REQUIRE(v >= 0.0f);
  }
  SUBCASE("negative sigma") {
    Grid g = base;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(augment_noise(g, -0.1, rng), std::invalid_argument);
  }
}

TEST_CASE("feature and wav files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "sedlab_features_test";
  std::filesystem::create_directories(dir);
  Grid g{3, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, -12.5f}};
  write_features(g, dir / "a.feat");
  const Grid r = read_features(dir / "a.feat");
  CHECK(r.rows == 3);
  CHECK(r.cols == 4);
  CHECK(r.values == g.values);
  {
    std::ofstream os(dir / "bad.feat", std::ios::binary);
    os << "NOTFEAT";
  }
  CHECK_THROWS(read_features(dir / "bad.feat"));

  AudioClip c = sine_clip(440.0, 0.9);
  c.samples.resize(5000);
  write_wav(c, dir / "a.wav");
  const AudioClip back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 44100);
  REQUIRE(back.samples.size() == 5000);
  for (std::size_t i = 0; i < 5000; ++i)
    REQUIRE(std::abs(back.samples[i] - c.samples[i]) <= 1.0f / 32767.0f);
  std::filesystem::remove_all(dir);
}

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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "sedlab/synth.h"
#include "sedlab/wav.h"

using namespace sedlab;

namespace {

std::pair<double, double> class_band(const SoundClassSpec& s) {
  switch (s.recipe) {
    case Recipe::kTone: return {s.freq_lo, s.freq_lo};
    case Recipe::kChirp: return {std::min(s.freq_lo, s.freq_hi), std::max(s.freq_lo, s.freq_hi)};
    case Recipe::kNoiseBurst: return {s.freq_lo, s.freq_hi};
    case Recipe::kAmTone: return {s.freq_lo - s.mod_rate, s.freq_lo + s.mod_rate};
    case Recipe::kHarmonic: return {s.freq_lo, s.freq_lo * s.partials};
  }
  return {0, 0};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("class inventory") {
  const auto labels = class_labels();
  REQUIRE(labels.size() == 10);
  CHECK(std::set<std::string>(labels.begin(), labels.end()).size() == 10);
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(class_index(labels[i]) == i);
  CHECK_THROWS_AS(class_index("dog"), std::invalid_argument);

  // Bands are disjoint and ordered.
  double prev_hi = 0.0;
  for (const auto& s : sound_classes()) {
    const auto [lo, hi] = class_band(s);
    CHECK(lo > prev_hi);
    CHECK(hi < kSampleRate / 2.0);
    prev_hi = hi;
  }
}

TEST_CASE("event drawing") {
  std::mt19937_64 rng(3);
  std::map<std::string, int> clips_with;
  const int n = 2000;
  bool short_seen = false, long_seen = false;
  for (int i = 0; i < n; ++i) {
    const auto ev = draw_events(rng);
    CHECK((ev.size() >= 1 && ev.size() <= 4));
    CHECK_NOTHROW(validate_events(ev));
    CHECK(std::is_sorted(ev.begin(), ev.end(),
                         [](const Event& a, const Event& b) { return a.onset < b.onset; }));
    std::set<std::string> present;
    for (const auto& e : ev) {
      CHECK(e.onset >= 0.0);
      CHECK(e.offset <= 10.0);
      const double d = e.offset - e.onset;
      CHECK(d >= 0.25 - 1e-9);
      CHECK(d <= 4.0 + 1e-9);
      CHECK(std::abs(e.onset * 1000 - std::round(e.onset * 1000)) < 1e-6);
      short_seen |= d < 1.0;   // absolute offset collar binds
      long_seen |= d > 1.0;    // ratio collar binds
      present.insert(e.label);
    }
    for (const auto& l : present) ++clips_with[l];
  }
  CHECK(short_seen);
  CHECK(long_seen);
  CHECK(clips_with.size() == 10);
  for (const auto& [label, k] : clips_with) CHECK(k >= n / 20);
}

TEST_CASE("clip synthesis") {
  std::mt19937_64 r1(8), r2(8);
  const EventList ev{{"tone_low", 2.0, 4.0}, {"noise_high", 3.0, 6.5}};
  const auto a = generate_clip(ev, -30.0, r1);
  const auto b = generate_clip(ev, -30.0, r2);
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.events == ev);
  CHECK(a.audio.samples.size() == kClipSamples);
  float peak = 0.0f;
  for (float s : a.audio.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak <= 0.9f + 1e-6f);

  std::mt19937_64 r3(1);
  const auto quiet = generate_clip({}, -30.0, r3);
  CHECK(quiet.events.empty());
  for (float s : quiet.audio.samples) CHECK(std::abs(s) <= 0.9f + 1e-6f);

  std::mt19937_64 r4(1);
  CHECK_THROWS_AS(generate_clip({{"tone_low", 9.0, 10.5}}, -30.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(generate_clip({{"tone_low", -0.5, 1.0}}, -30.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(generate_clip({{"bird", 1.0, 2.0}}, -30.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(generate_clip({{"tone_low", 1.0, 3.0}, {"tone_low", 2.0, 4.0}}, -30.0, r4),
                  std::invalid_argument);
}

TEST_CASE("energy stays in the class band during the event") {
  const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
  const double frame_s = static_cast<double>(kHopLength) / kSampleRate;
  for (const auto& spec : sound_classes()) {
    INFO(spec.label);
    std::mt19937_64 rng(5);
    const auto clip = generate_clip({{spec.label, 2.0, 4.0}}, -35.0, rng);
    const Grid mag = stft_magnitude(clip.audio);
    const auto [lo, hi] = class_band(spec);
    double in_band_event = 0.0, total_event = 0.0, in_band_outside = 0.0;
    std::size_t n_event = 0, n_outside = 0;
    for (std::size_t t = 0; t < mag.cols; ++t) {
      const double centre = t * frame_s;
      const bool inside = centre > 2.1 && centre < 3.9;
      const bool outside = centre < 1.85 || centre > 4.15;
      for (std::size_t k = 0; k < mag.rows; ++k) {
        const double e = std::pow(mag.values[k * mag.cols + t], 2);
        const double f = k * bin_hz;
        const bool band = f >= lo - 100.0 && f <= hi + 100.0;
        if (inside) {
          total_event += e;
          if (band) in_band_event += e;
        }
        if (outside && band) in_band_outside += e;
      }
      n_event += inside;
      n_outside += outside;
    }
    CHECK(in_band_event / total_event > 0.9);
    CHECK((in_band_outside / n_outside) < 1e-2 * (in_band_event / n_event));
  }
}

TEST_CASE("dataset generation") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "sedlab_synth_test";
  fs::remove_all(root);
  const DatasetCounts counts{3, 2, 0, 2};
  generate_dataset(counts, 7, root / "a");
  generate_dataset(counts, 7, root / "b");

  auto count_wavs = [](const fs::path& d) {
    return fs::exists(d) ? std::distance(fs::directory_iterator(d), fs::directory_iterator{}) : 0;
  };
  CHECK(count_wavs(root / "a" / "weak") == 3);
  CHECK(count_wavs(root / "a" / "strong") == 2);
  CHECK(count_wavs(root / "a" / "test") == 2);
  CHECK(!fs::exists(root / "a" / "unlabeled"));
  CHECK(!fs::exists(root / "a" / "unlabeled.tsv"));
  for (const char* f : {"weak.tsv", "strong.tsv", "test.tsv"}) CHECK(fs::exists(root / "a" / f));

  // Byte-identical across runs.
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    CHECK(slurp(entry.path()) == slurp(root / "b" / rel));
  }

  // Weak labels are the class set of the clip's events.
  const WeakTable weak = read_weak_tsv(root / "a" / "weak.tsv");
  REQUIRE(weak.size() == 3);
  std::size_t i = 0;
  for (const auto& [name, labels] : weak) {
    auto rng = clip_rng(7, 0, i++);
    std::set<std::string> present;
    for (const auto& e : draw_events(rng)) present.insert(e.label);
    CHECK(std::vector<std::string>(present.begin(), present.end()) == labels);
  }

  // Strong labels are valid and the audio round-trips through WAV.
  for (const auto& [name, events] : read_event_tsv(root / "a" / "strong.tsv")) {
    CHECK_NOTHROW(validate_events(events));
    const AudioClip clip = read_wav(root / "a" / "strong" / name);
    CHECK(clip.samples.size() == kClipSamples);
    float peak = 0.0f;
    for (float s : clip.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak <= 0.9f + 1e-4f);
  }

  // A clip does not depend on the size of other splits.
  generate_dataset({1, 0, 0, 0}, 7, root / "c");
  CHECK(slurp(root / "c" / "weak" / "weak_0000.wav") == slurp(root / "a" / "weak" / "weak_0000.wav"));
  fs::remove_all(root);
}

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

#include "sedlab/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "sedlab/wav.h"

namespace sedlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRamp = 0.01;  // seconds of raised-cosine fade
constexpr int kNoiseComponents = 32;

double round_ms(double s) { return std::round(s * 1000.0) / 1000.0; }

double envelope(double t, double duration) {
  const double edge = std::min({t, duration - t, kRamp});
  if (edge >= kRamp) return 1.0;
  if (edge <= 0.0) return 0.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * edge / kRamp));
}

// Adds one event into `out`, scaled to unit RMS-equivalent of a sine.
void render(const SoundClassSpec& spec, double gain, std::size_t start,
            std::size_t count, std::mt19937_64& rng, std::vector<float>& out) {
  const double sr = kSampleRate;
  const double duration = static_cast<double>(count) / sr;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double phase0 = kTwoPi * unit(rng);

  std::vector<double> freqs, phases;
  if (spec.recipe == Recipe::kNoiseBurst) {
    for (int i = 0; i < kNoiseComponents; ++i) {
      freqs.push_back(spec.freq_lo + (spec.freq_hi - spec.freq_lo) * unit(rng));
      phases.push_back(kTwoPi * unit(rng));
    }
  }
  double harmonic_norm = 0.0;
  for (int k = 1; k <= spec.partials; ++k) harmonic_norm += 1.0 / k;

  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / sr;
    double v = 0.0;
    switch (spec.recipe) {
      case Recipe::kTone:
        v = std::sin(kTwoPi * spec.freq_lo * t + phase0);
        break;
      case Recipe::kChirp: {
        const double slope = (spec.freq_hi - spec.freq_lo) / duration;
        v = std::sin(kTwoPi * (spec.freq_lo * t + 0.5 * slope * t * t) + phase0);
        break;
      }
      case Recipe::kNoiseBurst:
        for (int c = 0; c < kNoiseComponents; ++c)
          v += std::sin(kTwoPi * freqs[c] * t + phases[c]);
        v /= std::sqrt(static_cast<double>(kNoiseComponents));
        break;
      case Recipe::kAmTone:
        v = (1.0 + 0.9 * std::sin(kTwoPi * spec.mod_rate * t)) / 1.9 *
            std::sin(kTwoPi * spec.freq_lo * t + phase0) * 1.4;
        break;
      case Recipe::kHarmonic:
        for (int k = 1; k <= spec.partials; ++k)
          v += std::sin(kTwoPi * spec.freq_lo * k * t + k * phase0) / k;
        v /= harmonic_norm;
        break;
    }
    out[start + i] += static_cast<float>(gain * envelope(t, duration) * v);
  }
}

}  // namespace

const std::vector<SoundClassSpec>& sound_classes() {
  static const std::vector<SoundClassSpec> classes = {
      {"tone_low", Recipe::kTone, 300.0, 0.0, 0.0, 1},
      {"harmonic", Recipe::kHarmonic, 500.0, 0.0, 0.0, 3},
      {"chirp_up", Recipe::kChirp, 1700.0, 2400.0, 0.0, 1},
      {"am_low", Recipe::kAmTone, 2800.0, 0.0, 8.0, 1},
      {"noise_mid", Recipe::kNoiseBurst, 3300.0, 4200.0, 0.0, 1},
      {"tone_high", Recipe::kTone, 5000.0, 0.0, 0.0, 1},
      {"chirp_down", Recipe::kChirp, 7000.0, 5800.0, 0.0, 1},
      {"am_high", Recipe::kAmTone, 8500.0, 0.0, 4.0, 1},
      {"noise_high", Recipe::kNoiseBurst, 9500.0, 12000.0, 0.0, 1},
      {"chirp_top", Recipe::kChirp, 13500.0, 16500.0, 0.0, 1},
  };
  return classes;
}

std::vector<std::string> class_labels() {
  std::vector<std::string> labels;
  for (const auto& c : sound_classes()) labels.push_back(c.label);
  return labels;
}

std::size_t class_index(const std::string& label) {
  const auto& classes = sound_classes();
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].label == label) return i;
  throw std::invalid_argument("unknown sound class '" + label + "'");
}

EventList draw_events(std::mt19937_64& rng, const SynthConfig& config) {
  std::uniform_int_distribution<int> n_events(config.min_events, config.max_events);
  std::uniform_int_distribution<std::size_t> cls(0, sound_classes().size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double clip_seconds = static_cast<double>(kClipSamples) / kSampleRate;
  const int n = n_events(rng);
  EventList events;
  for (int placed = 0, tries = 0; placed < n && tries < 50; ++tries) {
    const auto& spec = sound_classes()[cls(rng)];
    const double dur = round_ms(config.min_duration +
                                (config.max_duration - config.min_duration) * unit(rng));
    const double onset = round_ms((clip_seconds - dur) * unit(rng));
    const Event e{spec.label, onset, round_ms(onset + dur)};
    const bool clash = std::any_of(events.begin(), events.end(), [&](const Event& o) {
      return o.label == e.label && e.onset < o.offset && o.onset < e.offset;
    });
    if (clash) continue;
    events.push_back(e);
    ++placed;
  }
  sort_events(events);
  return events;
}

SynthesizedClip generate_clip(const EventList& events, double noise_floor_db,
                              std::mt19937_64& rng, const SynthConfig& config) {
  const double clip_seconds = static_cast<double>(kClipSamples) / kSampleRate;
  validate_events(events);
  for (const auto& e : events) {
    class_index(e.label);
    if (e.offset > clip_seconds) {
      throw std::invalid_argument("event '" + e.label + "' ends after " +
                                  format_seconds(clip_seconds) + " s");
    }
  }
  SynthesizedClip out;
  out.events = events;
  sort_events(out.events);
  out.audio.samples.assign(kClipSamples, 0.0f);

  std::normal_distribution<double> noise(0.0, std::pow(10.0, noise_floor_db / 20.0));
  for (auto& s : out.audio.samples) s = static_cast<float>(noise(rng));

  std::uniform_real_distribution<double> gain(config.min_gain, config.max_gain);
  for (const auto& e : out.events) {
    const auto start = static_cast<std::size_t>(std::llround(e.onset * kSampleRate));
    const auto stop = std::min<std::size_t>(
        kClipSamples, static_cast<std::size_t>(std::llround(e.offset * kSampleRate)));
    render(sound_classes()[class_index(e.label)], gain(rng), start, stop - start, rng,
           out.audio.samples);
  }

  float peak = 0.0f;
  for (float s : out.audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0f) {
    const auto scale = static_cast<float>(config.peak / peak);
    for (auto& s : out.audio.samples) s *= scale;
  }
  return out;
}

std::mt19937_64 clip_rng(std::uint64_t seed, std::size_t split, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

void generate_dataset(const DatasetCounts& counts, std::uint64_t seed,
                      const std::filesystem::path& dir, const SynthConfig& config) {
  namespace fs = std::filesystem;
  struct Split {
    const char* name;
    std::size_t count;
  };
  const Split splits[] = {{"weak", counts.weak},
                          {"strong", counts.strong},
                          {"unlabeled", counts.unlabeled},
                          {"test", counts.test}};
  fs::create_directories(dir);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& split = splits[s];
    if (split.count == 0) continue;
    fs::create_directories(dir / split.name);
    EventTable strong;
    WeakTable weak;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < split.count; ++i) {
      auto rng = clip_rng(seed, s, i);
      const EventList events = draw_events(rng, config);
      std::uniform_real_distribution<double> floor_db(config.min_noise_db,
                                                      config.max_noise_db);
      const auto clip = generate_clip(events, floor_db(rng), rng, config);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04zu.wav", split.name, i);
      write_wav(clip.audio, dir / split.name / name);
      names.push_back(name);
      strong[name] = clip.events;
      std::set<std::string> present;
      for (const auto& e : clip.events) present.insert(e.label);
      weak[name].assign(present.begin(), present.end());
    }
    const fs::path manifest = dir / (std::string(split.name) + ".tsv");
    if (s == 0) {
      write_weak_tsv(weak, manifest);
    } else if (s == 2) {
      write_file_list(names, manifest);
    } else {
      write_event_tsv(strong, manifest);
    }
  }
}

}  // namespace sedlab

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

// Synthetic weak / strong / unlabeled / test corpus over ten parametric
// sound classes with separated frequency bands.

#ifndef SEDLAB_SYNTH_H_
#define SEDLAB_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sedlab/events.h"
#include "sedlab/features.h"

namespace sedlab {

enum class Recipe { kTone, kChirp, kNoiseBurst, kAmTone, kHarmonic };

struct SoundClassSpec {
  std::string label;
  Recipe recipe = Recipe::kTone;
  double freq_lo = 0.0;   // Hz; tone / carrier / chirp start / band edge
  double freq_hi = 0.0;   // Hz; chirp end / band edge (unused otherwise)
  double mod_rate = 0.0;  // Hz, amplitude-modulated tones
  int partials = 1;       // harmonic stacks
};

// The ten classes, index = class id.
const std::vector<SoundClassSpec>& sound_classes();
std::vector<std::string> class_labels();
// Throws std::invalid_argument for unknown labels.
std::size_t class_index(const std::string& label);

struct SynthConfig {
  double min_duration = 0.25;  // seconds
  double max_duration = 4.0;
  int min_events = 1;
  int max_events = 4;
  double min_gain = 0.25;
  double max_gain = 1.0;
  double min_noise_db = -35.0;  // noise floor std, dB re full scale
  double max_noise_db = -20.0;
  double peak = 0.9;
};

// Event lists drawn for one clip: 1-4 events, durations uniform, times
// rounded to milliseconds, per-class non-overlapping. Sorted by onset.
EventList draw_events(std::mt19937_64& rng, const SynthConfig& config = {});

struct SynthesizedClip {
  AudioClip audio;
  EventList events;
};

// Renders `events` over a Gaussian noise floor and peak-normalizes. Throws
// std::invalid_argument for events outside [0, 10] s, unknown labels or
// overlapping events of one class.
SynthesizedClip generate_clip(const EventList& events, double noise_floor_db,
                              std::mt19937_64& rng,
                              const SynthConfig& config = {});

struct DatasetCounts {
  std::size_t weak = 200;
  std::size_t strong = 200;
  std::size_t unlabeled = 1000;
  std::size_t test = 100;
};

// Per-clip generator seeded from (seed, split, index); the same clip is
// produced regardless of the other split sizes.
std::mt19937_64 clip_rng(std::uint64_t seed, std::size_t split,
                         std::size_t index);

// Writes <dir>/{weak,strong,unlabeled,test}/*.wav plus weak.tsv,
// strong.tsv, test.tsv (labels) and unlabeled.tsv (file list). Splits with
// zero clips produce neither a directory nor a manifest.
void generate_dataset(const DatasetCounts& counts, std::uint64_t seed,
                      const std::filesystem::path& dir,
                      const SynthConfig& config = {});

}  // namespace sedlab

#endif  // SEDLAB_SYNTH_H_

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

// Posterior grids to event lists: clip-gated thresholding, per-class
// median filtering of the binary activity and run extraction.

#ifndef SEDLAB_DECODE_H_
#define SEDLAB_DECODE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sedlab/events.h"
#include "sedlab/features.h"

namespace sedlab {

// Duration of one output frame after the network's 4x time pooling.
inline constexpr double kOutputFrameSeconds = 4.0 * kHopLength / kSampleRate;

struct PosteriorGrid {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<double> frame_probs;  // frames x classes, row-major
  std::vector<double> clip_probs;   // classes

  double frame(std::size_t t, std::size_t c) const { return frame_probs[t * classes + c]; }
  // Throws std::invalid_argument on inconsistent sizes or values outside [0, 1].
  void validate() const;
  bool operator==(const PosteriorGrid&) const = default;
};

struct DecodeConfig {
  double frame_threshold = 0.5;
  double clip_threshold = 0.5;
  std::size_t median_window = 9;

  void validate() const;
};

struct BinaryGrid {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<std::uint8_t> cells;  // frames x classes

  std::uint8_t at(std::size_t t, std::size_t c) const { return cells[t * classes + c]; }
  bool operator==(const BinaryGrid&) const = default;
};

// Cell is active iff frame prob >= frame_threshold and the class's clip
// prob >= clip_threshold.
BinaryGrid binarize(const PosteriorGrid& grid, const DecodeConfig& config);

// Sliding median of a 0/1 sequence with edge replication. The window must
// be odd; it may exceed the sequence length.
std::vector<std::uint8_t> median_filter(std::span<const std::uint8_t> seq,
                                        std::size_t window);
// Filters every class column independently.
BinaryGrid median_filter(const BinaryGrid& grid, std::size_t window);

// Maximal runs [i, j] of class c become (label c, i*d, (j+1)*d), sorted.
EventList frames_to_events(const BinaryGrid& grid,
                           const std::vector<std::string>& labels,
                           double frame_seconds = kOutputFrameSeconds);

// Inverse rasterization at frame resolution (frame t active iff its start
// lies inside an event).
BinaryGrid events_to_frames(const EventList& events,
                            const std::vector<std::string>& labels,
                            std::size_t frames,
                            double frame_seconds = kOutputFrameSeconds);

EventList decode(const PosteriorGrid& grid, const DecodeConfig& config,
                 const std::vector<std::string>& labels);

}  // namespace sedlab

#endif  // SEDLAB_DECODE_H_

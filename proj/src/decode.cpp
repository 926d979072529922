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

#include "sedlab/decode.h"

#include <cmath>
#include <stdexcept>

namespace sedlab {

void PosteriorGrid::validate() const {
  if (frame_probs.size() != frames * classes || clip_probs.size() != classes) {
    throw std::invalid_argument("posterior grid sizes do not match " +
                                std::to_string(frames) + "x" + std::to_string(classes));
  }
  for (double p : frame_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("frame probability out of [0, 1]");
  for (double p : clip_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("clip probability out of [0, 1]");
}

void DecodeConfig::validate() const {
  if (!(frame_threshold > 0.0 && frame_threshold < 1.0) ||
      !(clip_threshold > 0.0 && clip_threshold < 1.0)) {
    throw std::invalid_argument("decode thresholds must lie in (0, 1)");
  }
  if (median_window == 0 || median_window % 2 == 0) {
    throw std::invalid_argument("median window must be odd and positive, got " +
                                std::to_string(median_window));
  }
}

BinaryGrid binarize(const PosteriorGrid& grid, const DecodeConfig& config) {
  grid.validate();
  BinaryGrid out{grid.frames, grid.classes,
                 std::vector<std::uint8_t>(grid.frames * grid.classes, 0)};
  for (std::size_t c = 0; c < grid.classes; ++c) {
    if (grid.clip_probs[c] < config.clip_threshold) continue;
    for (std::size_t t = 0; t < grid.frames; ++t)
      out.cells[t * grid.classes + c] = grid.frame(t, c) >= config.frame_threshold;
  }
  return out;
}

std::vector<std::uint8_t> median_filter(std::span<const std::uint8_t> seq,
                                        std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw std::invalid_argument("median window must be odd, got " + std::to_string(window));
  }
  const auto n = static_cast<std::ptrdiff_t>(seq.size());
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<std::uint8_t> out(seq.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::ptrdiff_t k = i - half; k <= i + half; ++k)
      ones += seq[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, n - 1))] != 0;
    out[static_cast<std::size_t>(i)] = ones > window / 2;
  }
  return out;
}

BinaryGrid median_filter(const BinaryGrid& grid, std::size_t window) {
  BinaryGrid out = grid;
  std::vector<std::uint8_t> column(grid.frames);
  for (std::size_t c = 0; c < grid.classes; ++c) {
    for (std::size_t t = 0; t < grid.frames; ++t) column[t] = grid.at(t, c);
    const auto filtered = median_filter(column, window);
    for (std::size_t t = 0; t < grid.frames; ++t)
      out.cells[t * grid.classes + c] = filtered[t];
  }
  return out;
}

EventList frames_to_events(const BinaryGrid& grid,
                           const std::vector<std::string>& labels,
                           double frame_seconds) {
  if (labels.size() != grid.classes) {
    throw std::invalid_argument("got " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(grid.classes) + " classes");
  }
  EventList events;
  for (std::size_t c = 0; c < grid.classes; ++c) {
    std::size_t t = 0;
    while (t < grid.frames) {
      if (!grid.at(t, c)) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t < grid.frames && grid.at(t, c)) ++t;
      events.push_back({labels[c], static_cast<double>(start) * frame_seconds,
                        static_cast<double>(t) * frame_seconds});
    }
  }
  sort_events(events);
  return events;
}

BinaryGrid events_to_frames(const EventList& events,
                            const std::vector<std::string>& labels,
                            std::size_t frames, double frame_seconds) {
  BinaryGrid out{frames, labels.size(),
                 std::vector<std::uint8_t>(frames * labels.size(), 0)};
  for (const auto& e : events) {
    std::size_t c = 0;
    while (c < labels.size() && labels[c] != e.label) ++c;
    if (c == labels.size()) throw std::invalid_argument("unknown label '" + e.label + "'");
    for (std::size_t t = 0; t < frames; ++t) {
      const double start = static_cast<double>(t) * frame_seconds;
      if (start >= e.onset - 1e-9 && start < e.offset - 1e-9) out.cells[t * out.classes + c] = 1;
    }
  }
  return out;
}

EventList decode(const PosteriorGrid& grid, const DecodeConfig& config,
                 const std::vector<std::string>& labels) {
  config.validate();
  return frames_to_events(median_filter(binarize(grid, config), config.median_window),
                          labels);
}

}  // namespace sedlab

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

// Event annotations and the tab-separated files that carry them.

#ifndef SEDLAB_EVENTS_H_
#define SEDLAB_EVENTS_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sedlab {

struct Event {
  std::string label;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, > onset

  bool operator==(const Event&) const = default;
};

using EventList = std::vector<Event>;
// Keyed by clip filename; std::map keeps output order deterministic.
using EventTable = std::map<std::string, EventList>;
using WeakTable = std::map<std::string, std::vector<std::string>>;

// Sorts by (onset, offset, label).
void sort_events(EventList& events);

// Throws std::invalid_argument unless every event has 0 <= onset < offset
// and events of one class do not overlap.
void validate_events(const EventList& events);

// "filename<TAB>onset<TAB>offset<TAB>label" with three decimals. A header
// line "filename\tonset\toffset\tevent_label" is written and tolerated on
// read. Clips with no events produce no lines.
void write_event_tsv(const EventTable& table, const std::filesystem::path& path);
EventTable read_event_tsv(const std::filesystem::path& path);

// "filename<TAB>label1,label2,..."
void write_weak_tsv(const WeakTable& table, const std::filesystem::path& path);
WeakTable read_weak_tsv(const std::filesystem::path& path);

// One filename per line.
void write_file_list(const std::vector<std::string>& names,
                     const std::filesystem::path& path);
std::vector<std::string> read_file_list(const std::filesystem::path& path);

std::string format_seconds(double seconds);

}  // namespace sedlab

#endif  // SEDLAB_EVENTS_H_

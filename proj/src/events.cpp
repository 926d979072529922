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

#include "sedlab/events.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sedlab {

namespace {

constexpr char kEventHeader[] = "filename\tonset\toffset\tevent_label";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_seconds(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(where + ": bad time value '" + text + "'");
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void sort_events(EventList& events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.onset, a.offset, a.label) <
           std::tie(b.onset, b.offset, b.label);
  });
}

void validate_events(const EventList& events) {
  std::map<std::string, std::vector<const Event*>> by_class;
  for (const auto& e : events) {
    if (!(e.onset >= 0.0) || !(e.offset > e.onset)) {
      throw std::invalid_argument("event '" + e.label + "' has onset " +
                                  format_seconds(e.onset) + " and offset " +
                                  format_seconds(e.offset));
    }
    by_class[e.label].push_back(&e);
  }
  for (auto& [label, list] : by_class) {
    std::sort(list.begin(), list.end(),
              [](const Event* a, const Event* b) { return a->onset < b->onset; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->onset < list[i - 1]->offset) {
        throw std::invalid_argument("overlapping '" + label + "' events at " +
                                    format_seconds(list[i]->onset));
      }
    }
  }
}

std::string format_seconds(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", seconds);
  return buf;
}

void write_event_tsv(const EventTable& table, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << kEventHeader << '\n';
  for (const auto& [file, events] : table) {
    for (const auto& e : events) {
      os << file << '\t' << format_seconds(e.onset) << '\t'
         << format_seconds(e.offset) << '\t' << e.label << '\n';
    }
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

EventTable read_event_tsv(const std::filesystem::path& path) {
  auto is = open_in(path);
  EventTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty() || line == kEventHeader) continue;
    const auto f = split(line, '\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() == 1) {
      table[f[0]];  // clip listed without events
      continue;
    }
    if (f.size() != 4 || f[0].empty() || f[3].empty()) {
      throw std::runtime_error(where + ": expected 4 tab-separated fields");
    }
    table[f[0]].push_back(
        {f[3], parse_seconds(f[1], where), parse_seconds(f[2], where)});
  }
  for (auto& [file, events] : table) sort_events(events);
  return table;
}

void write_weak_tsv(const WeakTable& table, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "filename\tevent_labels\n";
  for (const auto& [file, labels] : table) {
    os << file << '\t';
    for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << labels[i];
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

WeakTable read_weak_tsv(const std::filesystem::path& path) {
  auto is = open_in(path);
  WeakTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty() || line == "filename\tevent_labels") continue;
    const auto f = split(line, '\t');
    if (f.empty() || f.size() > 2 || f[0].empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected filename<TAB>labels");
    }
    auto& labels = table[f[0]];
    if (f.size() == 2 && !f[1].empty()) labels = split(f[1], ',');
  }
  return table;
}

void write_file_list(const std::vector<std::string>& names,
                     const std::filesystem::path& path) {
  auto os = open_out(path);
  for (const auto& n : names) os << n << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> read_file_list(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(is, line)) {
    strip_cr(line);
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

}  // namespace sedlab

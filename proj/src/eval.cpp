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

#include "sedlab/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sedlab {

void MatchConfig::validate() const {
  if (!(onset_collar > 0.0) || !(offset_collar_abs > 0.0) || !(offset_collar_ratio > 0.0)) {
    throw std::invalid_argument("collars must be positive");
  }
}

bool event_matches(const Event& ref, const Event& pred, const MatchConfig& config) {
  // A small slack absorbs binary rounding of millisecond-resolution times.
  constexpr double kSlack = 1e-9;
  const double offset_collar =
      std::max(config.offset_collar_abs, config.offset_collar_ratio * (ref.offset - ref.onset));
  return std::abs(pred.onset - ref.onset) <= config.onset_collar + kSlack &&
         std::abs(pred.offset - ref.offset) <= offset_collar + kSlack;
}

CountTable match_clip(const EventList& ref, const EventList& pred,
                      const MatchConfig& config) {
  auto by_class = [](const EventList& list, const char* what) {
    std::map<std::string, std::vector<const Event*>> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i && list[i].onset < list[i - 1].onset) {
        throw std::invalid_argument(std::string(what) + " events are not sorted by onset");
      }
      out[list[i].label].push_back(&list[i]);
    }
    return out;
  };
  const auto refs = by_class(ref, "reference");
  const auto preds = by_class(pred, "predicted");

  CountTable counts;
  for (const auto& [label, r] : refs) counts[label].fn = r.size();
  for (const auto& [label, p] : preds) {
    auto& c = counts[label];
    c.fp = p.size();
    const auto it = refs.find(label);
    if (it == refs.end()) continue;
    const auto& r = it->second;
    std::vector<bool> used(r.size(), false);
    for (const Event* e : p) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && event_matches(*r[j], *e, config)) {
          used[j] = true;
          ++c.tp;
          --c.fp;
          --c.fn;
          break;
        }
      }
    }
  }
  return counts;
}

std::optional<double> f_score(const ClassCounts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

EvalReport macro_average(const CountTable& totals) {
  EvalReport report;
  double sum = 0.0;
  for (const auto& [label, counts] : totals) {
    ClassReport row{label, counts, f_score(counts)};
    if (row.f) {
      sum += *row.f;
      ++report.included;
    }
    report.classes.push_back(row);
  }
  if (report.included == 0) {
    throw std::runtime_error("evaluation is empty: no reference or predicted events");
  }
  report.macro_f = sum / static_cast<double>(report.included);
  return report;
}

EvalReport evaluate(const EventTable& ref, const EventTable& pred,
                    const MatchConfig& config, const std::vector<std::string>& labels) {
  config.validate();
  for (const auto& [file, events] : pred) {
    if (!ref.count(file)) {
      throw std::runtime_error("predictions for '" + file + "' have no reference clip");
    }
  }
  CountTable totals;
  for (const auto& label : labels) totals[label];
  static const EventList kNone;
  for (const auto& [file, events] : ref) {
    const auto it = pred.find(file);
    for (const auto& [label, c] : match_clip(events, it == pred.end() ? kNone : it->second, config))
      totals[label] += c;
  }
  return macro_average(totals);
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %6s %6s %6s %8s\n", "class", "TP", "FP", "FN", "F(%)");
  os << line;
  for (const auto& row : report.classes) {
    if (row.f) {
      std::snprintf(line, sizeof(line), "%-16s %6zu %6zu %6zu %8.2f\n", row.label.c_str(),
                    row.counts.tp, row.counts.fp, row.counts.fn, 100.0 * *row.f);
    } else {
      std::snprintf(line, sizeof(line), "%-16s %6zu %6zu %6zu %8s\n", row.label.c_str(),
                    row.counts.tp, row.counts.fp, row.counts.fn, "n/a");
    }
    os << line;
  }
  std::snprintf(line, sizeof(line), "macro F(%%) = %.2f over %zu classes\n",
                100.0 * report.macro_f, report.included);
  os << line;
  return os.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  os << "label,tp,fp,fn,f\n";
  for (const auto& row : report.classes) {
    os << row.label << ',' << row.counts.tp << ',' << row.counts.fp << ',' << row.counts.fn << ',';
    if (row.f) {
      std::snprintf(line, sizeof(line), "%.6f", *row.f);
      os << line;
    }
    os << '\n';
  }
  std::snprintf(line, sizeof(line), "macro,,,,%.6f\n", report.macro_f);
  os << line;
  return os.str();
}

}  // namespace sedlab

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

// Collar-based event F-score. Events of a class are matched one-to-one in
// onset order; a near miss costs one false positive and one false negative.

#ifndef SEDLAB_EVAL_H_
#define SEDLAB_EVAL_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sedlab/events.h"

namespace sedlab {

struct MatchConfig {
  double onset_collar = 0.2;         // seconds
  double offset_collar_abs = 0.2;    // seconds
  double offset_collar_ratio = 0.2;  // of the reference duration

  void validate() const;
};

struct ClassCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ClassCounts&) const = default;
};

using CountTable = std::map<std::string, ClassCounts>;

bool event_matches(const Event& ref, const Event& pred, const MatchConfig& config);

// Per-class counts for one clip. Both lists must be sorted by onset
// (std::invalid_argument otherwise); labels may interleave.
CountTable match_clip(const EventList& ref, const EventList& pred,
                      const MatchConfig& config);

// 2TP / (2TP + FP + FN); nullopt when the denominator is zero.
std::optional<double> f_score(const ClassCounts& counts);

struct ClassReport {
  std::string label;
  ClassCounts counts;
  std::optional<double> f;
};

struct EvalReport {
  std::vector<ClassReport> classes;  // sorted by label
  double macro_f = 0.0;              // mean over classes with a defined F
  std::size_t included = 0;
};

// Throws std::runtime_error when no class has any event.
EvalReport macro_average(const CountTable& totals);

// Accumulates counts over every reference clip. A clip missing from `pred`
// scores as having no predictions; predicted clips absent from `ref` are
// an error. `labels` adds classes that may not occur in either table.
EvalReport evaluate(const EventTable& ref, const EventTable& pred,
                    const MatchConfig& config,
                    const std::vector<std::string>& labels = {});

// Human-readable table and machine-readable CSV.
std::string format_report(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace sedlab

#endif  // SEDLAB_EVAL_H_

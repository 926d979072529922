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

// Shared helpers for the test binaries: a central-difference gradient
// checker and independent reference implementations used as oracles.

#ifndef SEDLAB_TESTS_SUPPORT_H_
#define SEDLAB_TESTS_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sedlab/eval.h"
#include "sedlab/ops.h"
#include "sedlab/tensor.h"

namespace sedlab::testing {

inline Tensord random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = d(rng);
  return Tensord::from(std::move(shape), std::move(v), requires_grad);
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;         // input index of the worst error
  std::size_t checked = 0;   // coordinates compared
  std::size_t kinks = 0;     // coordinates skipped as non-differentiable
};

// Compares backward() against central differences for every element of
// every input. Per input the error is
//   ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2, 1e-6),
// so gradients that are zero up to roundoff compare against the floor.
// A coordinate whose central differences at h and h/2 disagree lies within
// h of a kink (a max-pool selection switching); it is skipped and counted.
inline GradCheckResult grad_check(const std::function<Tensord(std::vector<Tensord>&)>& f,
                                  std::vector<Tensord> inputs, double h = 1e-4) {
  for (auto& t : inputs) t.zero_grad();
  const Tensord loss = f(inputs);
  backward(loss);
  auto eval = [&] {
    NoGradGuard g;
    return f(inputs).item();
  };
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    std::vector<double> analytic(inputs[i].size(), 0.0);
    if (!inputs[i].grad().empty())
      std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), analytic.begin());
    auto values = inputs[i].mutable_values();
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      auto central = [&](double step) {
        values[k] = saved + step;
        const double up = eval();
        values[k] = saved - step;
        const double down = eval();
        values[k] = saved;
        return (up - down) / (2.0 * step);
      };
      const double coarse = central(h);
      const double fine = central(0.5 * h);
      if (std::abs(coarse - fine) > 1e-6 + 1e-4 * std::abs(fine)) {
        ++result.kinks;
        continue;
      }
      ++result.checked;
      diff += (analytic[k] - fine) * (analytic[k] - fine);
      na += analytic[k] * analytic[k];
      nn += fine * fine;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = "input " + std::to_string(i);
    }
  }
  return result;
}

// Reduces any tensor to a scalar with fixed random weights so that every
// output element influences the loss.
inline Tensord project(const Tensord& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensord w = random_tensor(out.shape(), rng, -1.0, 1.0, false);
  return sum(mul(out, w));
}

// Greedy onset-order matcher written independently of the library: for
// every class it scans all (pred, ref) pairs explicitly and records the
// assignment, then derives counts from the assignment.
inline CountTable brute_force_greedy(const EventList& ref, const EventList& pred,
                                     const MatchConfig& c) {
  auto ok = [&](const Event& r, const Event& p) {
    const double onset_diff = std::fabs(p.onset - r.onset);
    const double offset_diff = std::fabs(p.offset - r.offset);
    const double collar = std::max(c.offset_collar_abs, c.offset_collar_ratio * (r.offset - r.onset));
    return onset_diff <= c.onset_collar + 1e-9 && offset_diff <= collar + 1e-9;
  };
  CountTable out;
  std::map<std::string, std::vector<Event>> refs, preds;
  for (const auto& e : ref) refs[e.label].push_back(e);
  for (const auto& e : pred) preds[e.label].push_back(e);
  for (auto& [label, list] : refs) out[label];
  for (auto& [label, list] : preds) out[label];
  for (auto& [label, counts] : out) {
    auto& r = refs[label];
    auto& p = preds[label];
    auto by_onset = [](const Event& a, const Event& b) { return a.onset < b.onset; };
    std::stable_sort(r.begin(), r.end(), by_onset);
    std::stable_sort(p.begin(), p.end(), by_onset);
    std::vector<int> owner(r.size(), -1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (owner[j] < 0 && ok(r[j], p[i])) {
          owner[j] = static_cast<int>(i);
          break;
        }
      }
    }
    const auto matched = static_cast<std::size_t>(std::count_if(
        owner.begin(), owner.end(), [](int o) { return o >= 0; }));
    counts.tp = matched;
    counts.fp = p.size() - matched;
    counts.fn = r.size() - matched;
  }
  return out;
}

// Maximum bipartite matching size per class (augmenting paths), an upper
// bound for any one-to-one matcher.
inline std::map<std::string, std::size_t> optimal_tp(const EventList& ref, const EventList& pred,
                                                     const MatchConfig& c) {
  std::map<std::string, std::vector<Event>> refs, preds;
  for (const auto& e : ref) refs[e.label].push_back(e);
  for (const auto& e : pred) preds[e.label].push_back(e);
  std::map<std::string, std::size_t> out;
  for (auto& [label, r] : refs) {
    auto& p = preds[label];
    std::vector<int> match_of_ref(r.size(), -1);
    std::function<bool(std::size_t, std::vector<bool>&)> augment =
        [&](std::size_t i, std::vector<bool>& seen) {
          for (std::size_t j = 0; j < r.size(); ++j) {
            if (seen[j] || !event_matches(r[j], p[i], c)) continue;
            seen[j] = true;
            if (match_of_ref[j] < 0 ||
                augment(static_cast<std::size_t>(match_of_ref[j]), seen)) {
              match_of_ref[j] = static_cast<int>(i);
              return true;
            }
          }
          return false;
        };
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::vector<bool> seen(r.size(), false);
      if (augment(i, seen)) ++n;
    }
    out[label] = n;
  }
  return out;
}

// Random per-class non-overlapping events with millisecond times; small
// jittered copies of references are added so that matches actually occur.
inline void random_instance(std::mt19937_64& rng, EventList& ref, EventList& pred,
                            std::size_t max_per_class = 6) {
  const std::vector<std::string> labels = {"a", "b", "c"};
  std::uniform_int_distribution<std::size_t> count(0, max_per_class);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto ms = [](double s) { return std::round(s * 1000.0) / 1000.0; };
  auto draw = [&](const std::string& label, std::size_t n, EventList& out) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double onset = ms(t + 0.05 + 0.6 * u(rng));
      const double offset = ms(onset + 0.1 + 1.5 * u(rng));
      out.push_back({label, onset, offset});
      t = offset;
    }
  };
  ref.clear();
  pred.clear();
  for (const auto& label : labels) {
    draw(label, count(rng), ref);
    const std::size_t n_pred = count(rng);
    // Half the predictions are perturbed references, the rest fresh draws.
    EventList fresh;
    draw(label, n_pred, fresh);
    EventList own_refs;
    for (const auto& e : ref)
      if (e.label == label) own_refs.push_back(e);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      if (i < own_refs.size() && u(rng) < 0.6) {
        const double onset = std::max(0.0, ms(own_refs[i].onset + 0.5 * (u(rng) - 0.5)));
        const double offset = ms(std::max(onset + 0.05, own_refs[i].offset + 0.8 * (u(rng) - 0.5)));
        fresh[i] = {label, onset, offset};
      }
    }
    // Predictions of a class may overlap after jittering; decoding never
    // produces that, but the matcher must still be well defined.
    pred.insert(pred.end(), fresh.begin(), fresh.end());
  }
  sort_events(ref);
  sort_events(pred);
}

}  // namespace sedlab::testing

#endif  // SEDLAB_TESTS_SUPPORT_H_

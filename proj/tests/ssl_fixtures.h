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

// Toy training data and trainer settings shared by the training tests and
// the acceptance checks.

#ifndef SEDLAB_TESTS_SSL_FIXTURES_H_
#define SEDLAB_TESTS_SSL_FIXTURES_H_

#include <random>

#include "gradcheck_suite.h"
#include "sedlab/ssl.h"

namespace sedlab::testing {

// Labeled items whose classes raise the energy of a band: class 0 the lower
// half of the mel axis, class 1 the upper half, over the event's frames.
inline TrainingData toy_data(std::size_t n_weak, std::size_t n_strong,
                             std::size_t n_unlabeled, std::uint64_t seed) {
  const ModelConfig kTiny = tiny_model_config();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(-4.0f, 0.5f);
  std::uniform_int_distribution<std::size_t> start(0, kTiny.n_frames / 2);
  const std::size_t mels = kTiny.n_mels, frames = kTiny.n_frames, out = kTiny.output_frames();
  const std::size_t pool = frames / out;
  auto item = [&](std::vector<float>* clip_y, std::vector<float>* frame_y) {
    std::vector<float> x(mels * frames);
    for (auto& v : x) v = noise(rng);
    if (clip_y) clip_y->assign(2, 0.0f);
    if (frame_y) frame_y->assign(out * 2, 0.0f);
    for (std::size_t c = 0; c < 2; ++c) {
      if (rng() % 2) continue;
      const std::size_t t0 = start(rng), t1 = t0 + frames / 4;
      for (std::size_t m = c * mels / 2; m < (c + 1) * mels / 2; ++m)
        for (std::size_t t = t0; t < t1; ++t) x[m * frames + t] += 3.0f;
      if (clip_y) (*clip_y)[c] = 1.0f;
      if (frame_y)
        for (std::size_t t = t0; t < t1; ++t) (*frame_y)[(t / pool) * 2 + c] = 1.0f;
    }
    return x;
  };
  TrainingData d;
  for (std::size_t i = 0; i < n_weak; ++i) {
    std::vector<float> y;
    d.weak_x.push_back(item(&y, nullptr));
    d.weak_y.push_back(y);
  }
  for (std::size_t i = 0; i < n_strong; ++i) {
    std::vector<float> y;
    d.strong_x.push_back(item(nullptr, &y));
    d.strong_y.push_back(y);
  }
  for (std::size_t i = 0; i < n_unlabeled; ++i) d.unlabeled_x.push_back(item(nullptr, nullptr));
  return d;
}

inline TrainerConfig small_config(Method m) {
  TrainerConfig c;
  c.method = m;
  c.n_weak = 2;
  c.n_strong = 2;
  c.n_unlabeled = 4;
  c.ramp_steps = 20;
  c.ema_decay = 0.9;
  c.seed = 17;
  return c;
}

inline TrainingBatch whole_batch(const TrainingData& d) {
  TrainingBatch b;
  for (std::size_t i = 0; i < d.weak_x.size(); ++i) {
    b.weak_x.push_back(&d.weak_x[i]);
    b.weak_y.push_back(&d.weak_y[i]);
  }
  for (std::size_t i = 0; i < d.strong_x.size(); ++i) {
    b.strong_x.push_back(&d.strong_x[i]);
    b.strong_y.push_back(&d.strong_y[i]);
  }
  for (const auto& u : d.unlabeled_x) b.unlabeled_x.push_back(&u);
  return b;
}

}  // namespace sedlab::testing

#endif  // SEDLAB_TESTS_SSL_FIXTURES_H_

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

#include "sedlab/ssl.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sedlab/features.h"

namespace sedlab {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

enum StreamId : std::uint32_t { kBatchStream = 1, kNoiseStream = 2, kMixStream = 3 };

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Concatenates equally sized rows into a tensor of shape {rows} + item.
Tensorf stack(const std::vector<std::vector<float>>& rows, Shape item) {
  const std::size_t cell = shape_size(item);
  std::vector<float> v;
  v.reserve(rows.size() * cell);
  for (const auto& r : rows) {
    if (r.size() != cell) {
      throw ShapeError("row of " + std::to_string(r.size()) + " values, expected " +
                       std::to_string(cell));
    }
    v.insert(v.end(), r.begin(), r.end());
  }
  Shape shape{rows.size()};
  shape.insert(shape.end(), item.begin(), item.end());
  return Tensorf::from(std::move(shape), std::move(v));
}

std::vector<std::vector<float>> copy_rows(const std::vector<const std::vector<float>*>& rows) {
  std::vector<std::vector<float>> out;
  out.reserve(rows.size());
  for (const auto* r : rows) out.push_back(*r);
  return out;
}

// Row i of rows[offset, offset + perm.size()) becomes
// lambda * row_i + (1 - lambda) * row_perm(i).
void mix_partition(std::vector<std::vector<float>>& rows, std::size_t offset,
                   const std::vector<std::size_t>& perm, double lambda) {
  std::vector<std::vector<float>> mixed;
  mixed.reserve(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    mixed.push_back(mixup(rows[offset + i], rows[offset + perm[i]], lambda));
  for (std::size_t i = 0; i < perm.size(); ++i) rows[offset + i] = std::move(mixed[i]);
}

// Splits a (batch, ...) tensor's values into per-item rows.
std::vector<std::vector<float>> unstack(const Tensorf& t) {
  const std::size_t n = t.dim(0);
  const std::size_t cell = t.size() / n;
  std::vector<std::vector<float>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i].assign(t.values().begin() + i * cell, t.values().begin() + (i + 1) * cell);
  return out;
}

template <typename V>
std::vector<V> concat_vec(std::vector<V> a, const std::vector<V>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kMeanTeacher: return "mean_teacher";
    case Method::kIct: return "ict";
    case Method::kMixMatch: return "mixmatch_variant";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "mean_teacher") return Method::kMeanTeacher;
  if (name == "ict") return Method::kIct;
  if (name == "mixmatch_variant") return Method::kMixMatch;
  throw std::invalid_argument("unknown training method '" + name +
                              "' (expected mean_teacher, ict or mixmatch_variant)");
}

void TrainerConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (!(w_max >= 0.0)) fail("w_max must be >= 0");
  if (ramp_steps == 0) fail("ramp_steps must be > 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in (0, 1)");
  if (!(mixup_alpha > 0.0)) fail("mixup_alpha must be > 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(sharpen_temperature > 0.0)) fail("sharpen_temperature must be > 0");
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
    fail("fixed lambda must lie in [0, 1]");
  }
  if (epochs == 0) fail("epochs must be > 0");
  const std::size_t min_items = method == Method::kMeanTeacher ? 1 : 2;
  if (n_weak < min_items || n_strong < min_items || n_unlabeled < min_items) {
    fail("every batch partition needs at least " + std::to_string(min_items) + " item(s) for " +
         method_name(method));
  }
  if (method == Method::kMixMatch && augment_copies < 2) {
    fail("mixmatch_variant needs augment_copies >= 2");
  }
}

std::vector<float> mixup(std::span<const float> a, std::span<const float> b, double lambda) {
  if (a.size() != b.size()) {
    throw ShapeError("mixup: operands of size " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mixup: lambda must lie in [0, 1]");
  }
  // a + (1 - lambda)(b - a): exact for lambda = 1 and for a == b.
  const auto r = static_cast<float>(1.0 - lambda);
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + r * (b[i] - a[i]);
  return out;
}

double sample_lambda(std::mt19937_64& rng, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mixup alpha must be > 0");
  std::gamma_distribution<double> g(alpha, 1.0);
  const double x = g(rng);
  const double y = g(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

double consistency_weight(double t, double ramp_steps, double w_max) {
  if (!(ramp_steps > 0.0)) throw std::invalid_argument("ramp_steps must be > 0");
  const double phase = 1.0 - std::clamp(t, 0.0, ramp_steps) / ramp_steps;
  return w_max * std::exp(-5.0 * phase * phase);
}

void ema_update(ParameterSet<float>& teacher, const ParameterSet<float>& student,
                double alpha) {
  if (teacher.size() != student.size()) {
    throw std::invalid_argument("teacher has " + std::to_string(teacher.size()) +
                                " entries, student " + std::to_string(student.size()));
  }
  const auto a = static_cast<float>(alpha);
  const float b = 1.0f - a;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    auto& t = teacher.entries()[i];
    const auto& s = student.entries()[i];
    if (t.name != s.name || t.tensor.shape() != s.tensor.shape()) {
      throw std::invalid_argument("teacher/student mismatch at parameter " + t.name);
    }
    auto dst = t.tensor.mutable_values();
    const auto src = s.tensor.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = a * dst[k] + b * src[k];
  }
}

double sharpen(double p, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (p <= 0.0 || p >= 1.0 || temperature == 1.0) return p;
  const double num = std::pow(p, 1.0 / temperature);
  return num / (num + std::pow(1.0 - p, 1.0 / temperature));
}

Tensorf bce_loss(const Tensorf& pred, const Tensorf& target) { return bce(pred, target); }

Tensorf mse_consistency(const Tensorf& student, const Tensorf& teacher) {
  return mse(student, teacher.detach());
}

std::vector<float> strong_targets(const EventList& events,
                                  const std::vector<std::string>& labels,
                                  std::size_t n_frames, std::size_t pool) {
  if (pool == 0 || n_frames % pool) {
    throw std::invalid_argument("pool factor must divide the frame count");
  }
  const std::size_t classes = labels.size();
  std::vector<float> out((n_frames / pool) * classes, 0.0f);
  for (const auto& e : events) {
    const auto c = static_cast<std::size_t>(
        std::find(labels.begin(), labels.end(), e.label) - labels.begin());
    if (c == classes) throw std::invalid_argument("unknown event label '" + e.label + "'");
    for (std::size_t t = 0; t < n_frames; ++t) {
      const double centre = static_cast<double>(t * kHopLength) / kSampleRate;
      if (centre >= e.onset && centre < e.offset) out[(t / pool) * classes + c] = 1.0f;
    }
  }
  return out;
}

std::vector<float> weak_targets(const std::vector<std::string>& present,
                                const std::vector<std::string>& labels) {
  std::vector<float> out(labels.size(), 0.0f);
  for (const auto& p : present) {
    const auto it = std::find(labels.begin(), labels.end(), p);
    if (it == labels.end()) throw std::invalid_argument("unknown weak label '" + p + "'");
    out[static_cast<std::size_t>(it - labels.begin())] = 1.0f;
  }
  return out;
}

BatchSampler::BatchSampler(const TrainingData& data, const TrainerConfig& config,
                           std::uint64_t seed)
    : data_(data), config_(config), rng_(stream(seed, kBatchStream)) {
  if (data.weak_x.empty() || data.strong_x.empty() || data.unlabeled_x.empty()) {
    throw std::invalid_argument("training data needs weak, strong and unlabeled clips");
  }
  if (data.weak_x.size() != data.weak_y.size() || data.strong_x.size() != data.strong_y.size()) {
    throw std::invalid_argument("training inputs and labels differ in count");
  }
  weak_.order.resize(data.weak_x.size());
  strong_.order.resize(data.strong_x.size());
  unlabeled_.order.resize(data.unlabeled_x.size());
  for (Cycle* c : {&weak_, &strong_, &unlabeled_}) {
    std::iota(c->order.begin(), c->order.end(), std::size_t{0});
    std::shuffle(c->order.begin(), c->order.end(), rng_);
  }
}

std::size_t BatchSampler::take(Cycle& c) {
  if (c.pos == c.order.size()) {
    std::shuffle(c.order.begin(), c.order.end(), rng_);
    c.pos = 0;
  }
  return c.order[c.pos++];
}

TrainingBatch BatchSampler::next() {
  TrainingBatch b;
  for (std::size_t i = 0; i < config_.n_weak; ++i) {
    const std::size_t k = take(weak_);
    b.weak_x.push_back(&data_.weak_x[k]);
    b.weak_y.push_back(&data_.weak_y[k]);
  }
  for (std::size_t i = 0; i < config_.n_strong; ++i) {
    const std::size_t k = take(strong_);
    b.strong_x.push_back(&data_.strong_x[k]);
    b.strong_y.push_back(&data_.strong_y[k]);
  }
  for (std::size_t i = 0; i < config_.n_unlabeled; ++i)
    b.unlabeled_x.push_back(&data_.unlabeled_x[take(unlabeled_)]);
  return b;
}

std::size_t BatchSampler::steps_per_epoch() const {
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  return std::max(ceil_div(data_.weak_x.size(), config_.n_weak),
                  ceil_div(data_.strong_x.size(), config_.n_strong));
}

SslTrainer::SslTrainer(const ModelConfig& model, const TrainerConfig& config)
    : model_config_(model),
      config_(config),
      student_(model, config.seed, true),
      teacher_(model, config.seed, false),
      adam_(config.adam),
      noise_rng_(stream(config.seed, kNoiseStream)),
      mix_rng_(stream(config.seed, kMixStream)) {
  config_.validate();
  teacher_.params().copy_values_from(student_.params());
}

std::vector<std::vector<float>> SslTrainer::augment(
    const std::vector<const std::vector<float>*>& items) {
  auto rows = copy_rows(items);
  if (config_.noise_sigma == 0.0) return rows;
  for (auto& r : rows) {
    Grid g{model_config_.n_mels, model_config_.n_frames, std::move(r)};
    log_expand(g);
    augment_noise(g, config_.noise_sigma, noise_rng_);
    log_compress(g);
    r = std::move(g.values);
  }
  return rows;
}

LossBundle SslTrainer::step(const TrainingBatch& batch) {
  switch (config_.method) {
    case Method::kMeanTeacher: return step_mean_teacher(batch);
    case Method::kIct: return step_ict(batch);
    case Method::kMixMatch: return step_mixmatch(batch);
  }
  throw std::logic_error("unhandled method");
}

LossBundle SslTrainer::finish(const Tensorf& l_w, const Tensorf& l_s, const Tensorf* l_cw,
                              const Tensorf* l_cs, double weight) {
  Tensorf total = add(l_w, l_s);
  if (l_cw) {
    const auto w = static_cast<float>(weight);
    total = add(total, add(affine(*l_cw, w, 0.0f), affine(*l_cs, w, 0.0f)));
  }
  student_.params().zero_grad();
  backward(total);
  adam_.step(student_.params());
  ++steps_;
  const double alpha =
      std::min(1.0 - 1.0 / static_cast<double>(steps_ + 1), config_.ema_decay);
  ema_update(teacher_.params(), student_.params(), alpha);

  LossBundle out;
  out.weak = l_w.item();
  out.strong = l_s.item();
  out.cons_weak = l_cw ? l_cw->item() : 0.0;
  out.cons_strong = l_cs ? l_cs->item() : 0.0;
  out.weight = weight;
  out.total = total.item();
  return out;
}

namespace {

struct Sizes {
  std::size_t weak, strong, unlabeled;
  std::size_t all() const { return weak + strong + unlabeled; }
};

Sizes check_batch(const TrainingBatch& b, std::size_t min_items) {
  const Sizes s{b.weak_x.size(), b.strong_x.size(), b.unlabeled_x.size()};
  if (s.weak < min_items || s.strong < min_items || s.unlabeled < min_items ||
      b.weak_y.size() != s.weak || b.strong_y.size() != s.strong) {
    throw std::invalid_argument("batch partitions need at least " + std::to_string(min_items) +
                                " item(s) each, with one label per labeled item");
  }
  return s;
}

}  // namespace

LossBundle SslTrainer::step_mean_teacher(const TrainingBatch& b) {
  const Sizes n = check_batch(b, 1);
  const auto& mc = model_config_;
  const std::size_t frames = mc.output_frames(), classes = mc.n_classes;
  const auto items = concat_vec(concat_vec(b.weak_x, b.strong_x), b.unlabeled_x);
  const auto x_student = augment(items);
  const double w = consistency_weight(static_cast<double>(steps_),
                                      static_cast<double>(config_.ramp_steps), config_.w_max);

  ModelOutput<float> target;
  const bool consistency = config_.w_max > 0.0;
  if (consistency) {
    const auto x_teacher = augment(items);
    NoGradGuard guard;
    target = teacher_.forward(stack(x_teacher, {mc.n_mels, mc.n_frames}), NormMode::kTrainFrozen);
  }
  const auto out = student_.forward(stack(x_student, {mc.n_mels, mc.n_frames}), NormMode::kTrain);
  const Tensorf l_w = bce_loss(slice(out.clip_probs, 0, 0, n.weak),
                               stack(copy_rows(b.weak_y), {classes}));
  const Tensorf l_s = bce_loss(slice(out.frame_probs, 0, n.weak, n.strong),
                               stack(copy_rows(b.strong_y), {frames, classes}));
  if (!consistency) return finish(l_w, l_s, nullptr, nullptr, w);
  const Tensorf l_cw = mse_consistency(out.clip_probs, target.clip_probs);
  const Tensorf l_cs = mse_consistency(out.frame_probs, target.frame_probs);
  return finish(l_w, l_s, &l_cw, &l_cs, w);
}

LossBundle SslTrainer::step_ict(const TrainingBatch& b) {
  const Sizes n = check_batch(b, 2);
  const auto& mc = model_config_;
  const std::size_t frames = mc.output_frames(), classes = mc.n_classes;
  const double lambda =
      config_.fixed_lambda ? *config_.fixed_lambda : sample_lambda(mix_rng_, config_.mixup_alpha);
  const auto perm_w = shuffled(n.weak, mix_rng_);
  const auto perm_s = shuffled(n.strong, mix_rng_);
  const auto perm_u = shuffled(n.unlabeled, mix_rng_);
  auto mix_all = [&](std::vector<std::vector<float>>& rows) {
    mix_partition(rows, 0, perm_w, lambda);
    mix_partition(rows, n.weak, perm_s, lambda);
    mix_partition(rows, n.weak + n.strong, perm_u, lambda);
  };

  const auto items = concat_vec(concat_vec(b.weak_x, b.strong_x), b.unlabeled_x);
  auto x_student = augment(items);
  mix_all(x_student);
  auto y_w = copy_rows(b.weak_y);
  mix_partition(y_w, 0, perm_w, lambda);
  auto y_s = copy_rows(b.strong_y);
  mix_partition(y_s, 0, perm_s, lambda);
  const double w = consistency_weight(static_cast<double>(steps_),
                                      static_cast<double>(config_.ramp_steps), config_.w_max);

  const bool consistency = config_.w_max > 0.0;
  Tensorf target_clip, target_frame;
  if (consistency) {
    const auto x_teacher = augment(items);
    NoGradGuard guard;
    const auto t = teacher_.forward(stack(x_teacher, {mc.n_mels, mc.n_frames}),
                                    NormMode::kTrainFrozen);
    auto clip_rows = unstack(t.clip_probs);
    auto frame_rows = unstack(t.frame_probs);
    mix_all(clip_rows);
    mix_all(frame_rows);
    target_clip = stack(clip_rows, {classes});
    target_frame = stack(frame_rows, {frames, classes});
  }
  const auto out = student_.forward(stack(x_student, {mc.n_mels, mc.n_frames}), NormMode::kTrain);
  const Tensorf l_w = bce_loss(slice(out.clip_probs, 0, 0, n.weak), stack(y_w, {classes}));
  const Tensorf l_s =
      bce_loss(slice(out.frame_probs, 0, n.weak, n.strong), stack(y_s, {frames, classes}));
  if (!consistency) return finish(l_w, l_s, nullptr, nullptr, w);
  const Tensorf l_cw = mse_consistency(out.clip_probs, target_clip);
  const Tensorf l_cs = mse_consistency(out.frame_probs, target_frame);
  return finish(l_w, l_s, &l_cw, &l_cs, w);
}

LossBundle SslTrainer::step_mixmatch(const TrainingBatch& b) {
  const Sizes n = check_batch(b, 2);
  const auto& mc = model_config_;
  const std::size_t frames = mc.output_frames(), classes = mc.n_classes;
  const std::size_t copies = config_.augment_copies;
  const std::size_t n_u = copies * n.unlabeled;
  double lambda =
      config_.fixed_lambda ? *config_.fixed_lambda : sample_lambda(mix_rng_, config_.mixup_alpha);
  lambda = std::max(lambda, 1.0 - lambda);  // keeps each mixed item closest to its own target
  const auto perm_w = shuffled(n.weak, mix_rng_);
  const auto perm_s = shuffled(n.strong, mix_rng_);
  const auto perm_u = shuffled(n_u, mix_rng_);

  auto x_student = augment(concat_vec(b.weak_x, b.strong_x));
  std::vector<std::vector<float>> x_unl;
  for (std::size_t k = 0; k < copies; ++k) {
    auto copy = augment(b.unlabeled_x);
    x_unl.insert(x_unl.end(), std::make_move_iterator(copy.begin()),
                 std::make_move_iterator(copy.end()));
  }
  auto y_w = copy_rows(b.weak_y);
  mix_partition(y_w, 0, perm_w, lambda);
  auto y_s = copy_rows(b.strong_y);
  mix_partition(y_s, 0, perm_s, lambda);
  const double w = consistency_weight(static_cast<double>(steps_),
                                      static_cast<double>(config_.ramp_steps), config_.w_max);

  const bool consistency = config_.w_max > 0.0;
  Tensorf target_clip, target_frame;
  if (consistency) {
    ModelOutput<float> t;
    {
      NoGradGuard guard;
      t = teacher_.forward(stack(x_unl, {mc.n_mels, mc.n_frames}), NormMode::kTrainFrozen);
    }
    // Average over the copies, sharpen, then hand every copy its item's target.
    auto pseudo = [&](const Tensorf& probs) {
      const std::size_t cell = probs.size() / n_u;
      std::vector<std::vector<float>> rows(n_u, std::vector<float>(cell));
      for (std::size_t j = 0; j < n.unlabeled; ++j) {
        for (std::size_t e = 0; e < cell; ++e) {
          double mean = 0.0;
          for (std::size_t k = 0; k < copies; ++k)
            mean += probs.values()[(k * n.unlabeled + j) * cell + e];
          const auto q = static_cast<float>(
              sharpen(mean / static_cast<double>(copies), config_.sharpen_temperature));
          for (std::size_t k = 0; k < copies; ++k) rows[k * n.unlabeled + j][e] = q;
        }
      }
      mix_partition(rows, 0, perm_u, lambda);
      return rows;
    };
    target_clip = stack(pseudo(t.clip_probs), {classes});
    target_frame = stack(pseudo(t.frame_probs), {frames, classes});
  }

  mix_partition(x_student, 0, perm_w, lambda);
  mix_partition(x_student, n.weak, perm_s, lambda);
  mix_partition(x_unl, 0, perm_u, lambda);
  x_student.insert(x_student.end(), std::make_move_iterator(x_unl.begin()),
                   std::make_move_iterator(x_unl.end()));
  x_unl.clear();

  const auto out = student_.forward(stack(x_student, {mc.n_mels, mc.n_frames}), NormMode::kTrain);
  const Tensorf l_w = bce_loss(slice(out.clip_probs, 0, 0, n.weak), stack(y_w, {classes}));
  const Tensorf l_s =
      bce_loss(slice(out.frame_probs, 0, n.weak, n.strong), stack(y_s, {frames, classes}));
  if (!consistency) return finish(l_w, l_s, nullptr, nullptr, w);
  const std::size_t labeled = n.weak + n.strong;
  const Tensorf l_cw = mse_consistency(slice(out.clip_probs, 0, labeled, n_u), target_clip);
  const Tensorf l_cs = mse_consistency(slice(out.frame_probs, 0, labeled, n_u), target_frame);
  return finish(l_w, l_s, &l_cw, &l_cs, w);
}

std::string loss_csv_header() { return "step,L_w,L_s,L_cw,L_cs,w_t,total"; }

std::string loss_csv_row(std::size_t step, const LossBundle& l) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g", step, l.weak, l.strong,
                l.cons_weak, l.cons_strong, l.weight, l.total);
  return buf;
}

TrainResult train_model(const ModelConfig& model, const TrainerConfig& config,
                        const TrainingData& data, const std::filesystem::path& out,
                        const std::function<void(std::size_t, SslTrainer&)>& on_epoch) {
  namespace fs = std::filesystem;
  config.validate();
  model.validate();
  SslTrainer trainer(model, config);
  BatchSampler sampler(data, config, config.seed);
  fs::create_directories(out);
  std::ofstream log(out / "train_log.csv", std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + (out / "train_log.csv").string());
  log << loss_csv_header() << '\n';

  TrainResult result;
  const std::size_t steps = sampler.steps_per_epoch();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps; ++s) {
      const LossBundle loss = trainer.step(sampler.next());
      if (!std::isfinite(loss.total)) {
        throw std::runtime_error("training diverged at step " +
                                 std::to_string(trainer.steps_done()));
      }
      log << loss_csv_row(trainer.steps_done(), loss) << '\n';
      result.log.push_back(loss);
    }
    log.flush();
    if (config.checkpoint_every && epoch % config.checkpoint_every == 0) {
      char stem[64];
      std::snprintf(stem, sizeof(stem), "epoch_%03zu", epoch);
      fs::create_directories(out / "checkpoints");
      save_checkpoint(trainer.student().params(),
                      out / "checkpoints" / (std::string(stem) + "_student.hpsed"));
      save_checkpoint(trainer.teacher().params(),
                      out / "checkpoints" / (std::string(stem) + "_teacher.hpsed"));
    }
    if (on_epoch) on_epoch(epoch, trainer);
  }
  result.student_path = out / "student.hpsed";
  result.teacher_path = out / "teacher.hpsed";
  save_checkpoint(trainer.student().params(), result.student_path);
  save_checkpoint(trainer.teacher().params(), result.teacher_path);
  return result;
}

}  // namespace sedlab

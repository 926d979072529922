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

// Semi-supervised training: Mean Teacher, interpolation consistency
// training (ICT) and a MixMatch variant that mixes only within a data type.
// All three share the loss
//   total = L_w + L_s + w(t) * (L_cw + L_cs)
// where L_w / L_s are clip / frame cross-entropies on the labeled items and
// L_cw / L_cs are clip / frame mean-squared consistency terms against an
// exponential-moving-average teacher.

#ifndef SEDLAB_SSL_H_
#define SEDLAB_SSL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sedlab/crnn.h"
#include "sedlab/events.h"
#include "sedlab/params.h"

namespace sedlab {

enum class Method { kMeanTeacher, kIct, kMixMatch };

std::string method_name(Method m);  // mean_teacher | ict | mixmatch_variant
Method parse_method(const std::string& name);

struct TrainerConfig {
  Method method = Method::kMeanTeacher;
  double w_max = 1.0;
  std::size_t ramp_steps = 1000;
  double ema_decay = 0.999;
  double mixup_alpha = 1.0;  // lambda ~ Beta(alpha, alpha)
  std::size_t augment_copies = 2;     // K, MixMatch variant
  double sharpen_temperature = 0.5;   // T_s, MixMatch variant
  double noise_sigma = 0.1;
  std::size_t n_weak = 6;
  std::size_t n_strong = 6;
  std::size_t n_unlabeled = 12;
  std::size_t epochs = 30;
  std::size_t checkpoint_every = 0;  // epochs; 0 saves only the final models
  std::uint64_t seed = 1;
  AdamConfig adam;
  // Forces lambda instead of sampling it (1 turns mixing off).
  std::optional<double> fixed_lambda;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct LossBundle {
  double weak = 0.0;         // L_w
  double strong = 0.0;       // L_s
  double cons_weak = 0.0;    // L_cw
  double cons_strong = 0.0;  // L_cs
  double weight = 0.0;       // w(t)
  double total = 0.0;
};

// lambda * a + (1 - lambda) * b.
std::vector<float> mixup(std::span<const float> a, std::span<const float> b,
                         double lambda);
double sample_lambda(std::mt19937_64& rng, double alpha);
// w_max * exp(-5 (1 - min(t, T) / T)^2)
double consistency_weight(double t, double ramp_steps, double w_max);
// teacher = alpha * teacher + (1 - alpha) * student for every entry,
// buffers included.
void ema_update(ParameterSet<float>& teacher, const ParameterSet<float>& student,
                double alpha);
// p^(1/T) / (p^(1/T) + (1 - p)^(1/T))
double sharpen(double p, double temperature);

Tensorf bce_loss(const Tensorf& pred, const Tensorf& target);
Tensorf mse_consistency(const Tensorf& student, const Tensorf& teacher);

// Frame targets at input resolution (frame t is active when its centre
// t * hop / sr lies in [onset, offset)), max-pooled by `pool` frames.
// Returns (n_frames / pool) x labels.size(), row-major.
std::vector<float> strong_targets(const EventList& events,
                                  const std::vector<std::string>& labels,
                                  std::size_t n_frames, std::size_t pool);
std::vector<float> weak_targets(const std::vector<std::string>& present,
                                const std::vector<std::string>& labels);

// Log-mel items with their annotations. Rows are (n_mels x n_frames).
struct TrainingData {
  std::vector<std::vector<float>> weak_x;
  std::vector<std::vector<float>> weak_y;    // classes
  std::vector<std::vector<float>> strong_x;
  std::vector<std::vector<float>> strong_y;  // output_frames x classes
  std::vector<std::vector<float>> unlabeled_x;
};

// Non-owning view of one step's items.
struct TrainingBatch {
  std::vector<const std::vector<float>*> weak_x, weak_y;
  std::vector<const std::vector<float>*> strong_x, strong_y;
  std::vector<const std::vector<float>*> unlabeled_x;
};

// Draws batches by cycling through independently shuffled orders of each
// partition, reshuffling at every wrap.
class BatchSampler {
 public:
  BatchSampler(const TrainingData& data, const TrainerConfig& config,
               std::uint64_t seed);
  TrainingBatch next();
  // One pass over the larger labeled partition.
  std::size_t steps_per_epoch() const;

 private:
  struct Cycle {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
  };
  std::size_t take(Cycle& c);

  const TrainingData& data_;
  TrainerConfig config_;
  std::mt19937_64 rng_;
  Cycle weak_, strong_, unlabeled_;
};

// Owns the student, the EMA teacher, the optimizer and the random streams
// (noise augmentation and mixing draw from separate generators, so the
// mixing path can be switched off without changing the noise).
class SslTrainer {
 public:
  SslTrainer(const ModelConfig& model, const TrainerConfig& config);

  // One optimization step of the configured method at step index `step`.
  LossBundle step(const TrainingBatch& batch);
  LossBundle step_mean_teacher(const TrainingBatch& batch);
  LossBundle step_ict(const TrainingBatch& batch);
  LossBundle step_mixmatch(const TrainingBatch& batch);

  Crnn<float>& student() { return student_; }
  Crnn<float>& teacher() { return teacher_; }
  std::size_t steps_done() const { return steps_; }
  const TrainerConfig& config() const { return config_; }

 private:
  std::vector<std::vector<float>> augment(
      const std::vector<const std::vector<float>*>& items);
  LossBundle finish(const Tensorf& l_w, const Tensorf& l_s, const Tensorf* l_cw,
                    const Tensorf* l_cs, double weight);

  ModelConfig model_config_;
  TrainerConfig config_;
  Crnn<float> student_;
  Crnn<float> teacher_;
  Adam adam_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 mix_rng_;
  std::size_t steps_ = 0;
};

struct TrainResult {
  std::vector<LossBundle> log;
  std::filesystem::path student_path, teacher_path;
};

// Runs config.epochs epochs, writing <out>/train_log.csv, the final
// <out>/student.hpsed and <out>/teacher.hpsed and, every checkpoint_every
// epochs, <out>/checkpoints/epoch_NNN_{student,teacher}.hpsed. `on_epoch`
// (optional) is called after each epoch with the trainer.
TrainResult train_model(const ModelConfig& model, const TrainerConfig& config,
                        const TrainingData& data, const std::filesystem::path& out,
                        const std::function<void(std::size_t, SslTrainer&)>& on_epoch = {});

std::string loss_csv_header();
std::string loss_csv_row(std::size_t step, const LossBundle& loss);

}  // namespace sedlab

#endif  // SEDLAB_SSL_H_

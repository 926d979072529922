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

// Convolutional recurrent network with gated linear unit blocks, two
// bidirectional GRU layers, a frame-level sigmoid classifier and an
// attention head that pools frame probabilities into clip probabilities.
//
// Tensor layout inside the network is (batch, channels, freq, time): the
// mel spectrogram is stored band-major, so a clip enters as (1, mels,
// frames) without a transpose. Pooling factors are given as (time, freq).

#ifndef SEDLAB_CRNN_H_
#define SEDLAB_CRNN_H_

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "sedlab/ops.h"
#include "sedlab/params.h"

namespace sedlab {

struct ModelConfig {
  std::size_t n_classes = 10;
  std::size_t n_mels = 128;
  std::size_t n_frames = 1024;
  std::vector<std::size_t> conv_filters{16, 32, 64, 128, 128, 128, 128};
  // (time, freq) per block.
  std::vector<std::pair<std::size_t, std::size_t>> poolings{
      {2, 2}, {2, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  std::size_t gru_units = 64;
  std::size_t gru_layers = 2;
  std::size_t kernel = 3;

  // Throws std::invalid_argument on inconsistent settings, including
  // pooling factors that do not reduce frequency to exactly 1.
  void validate() const;
  std::size_t time_pool_factor() const;
  std::size_t output_frames() const { return n_frames / time_pool_factor(); }

  bool operator==(const ModelConfig&) const = default;
};

enum class NormMode {
  kTrain,        // batch statistics, running buffers updated
  kTrainFrozen,  // batch statistics, running buffers untouched
  kInference,    // running buffers
};

template <typename T>
struct ModelOutput {
  Tensor<T> frame_probs;  // (batch, output_frames, classes)
  Tensor<T> clip_probs;   // (batch, classes)
};

template <typename T>
struct GluBlockParams {
  Tensor<T> lin_weight, lin_bias, gate_weight, gate_bias;
  Tensor<T> lin_gamma, lin_beta, gate_gamma, gate_beta;
  BatchNormBuffers<T> lin_stats, gate_stats;
  std::size_t pool_time = 1;
  std::size_t pool_freq = 1;
};

// o = BN(x*W + b) * sigmoid(BN(x*W_g + b_g)), then max pooling.
// x: (batch, channels, freq, time). Single fused graph node; the
// intermediate maps are recomputed in the backward pass.
template <typename T>
Tensor<T> glu_block(const Tensor<T>& x, GluBlockParams<T>& p, NormMode mode);

// The same block assembled from conv2d / batch_norm / sigmoid / mul /
// max_pool2d nodes. Slower and memory hungry; kept as a cross-check.
template <typename T>
Tensor<T> glu_block_composed(const Tensor<T>& x, GluBlockParams<T>& p,
                             NormMode mode);

// Gate columns are ordered [reset, update, candidate].
template <typename T>
struct GruParams {
  Tensor<T> w_input;   // (in, 3H)
  Tensor<T> w_hidden;  // (H, 3H)
  Tensor<T> b_input;   // (3H)
  Tensor<T> b_hidden;  // (3H)
};

// seq: (steps * batch, in), time-major. Returns (steps * batch, H) where
// row block t is the hidden state after step t (in input order, also when
// the recurrence runs backwards).
template <typename T>
Tensor<T> gru_direction(const Tensor<T>& seq, std::size_t steps,
                        std::size_t batch, const GruParams<T>& p,
                        bool reverse);

// Forward and backward directions concatenated: (steps * batch, 2H).
template <typename T>
Tensor<T> bigru_layer(const Tensor<T>& seq, std::size_t steps,
                      std::size_t batch, const GruParams<T>& forward,
                      const GruParams<T>& backward);

// frame_probs: (steps, batch, C); features: (steps * batch, D).
// Softmax over time of a dense projection gives per-class weights; the clip
// probability is the weighted sum of frame probabilities. Returns (batch, C).
template <typename T>
Tensor<T> attention_pool(const Tensor<T>& frame_probs,
                         const Tensor<T>& features, const Tensor<T>& weight,
                         const Tensor<T>& bias);

template <typename T>
class Crnn {
 public:
  // Trainable models record gradients for their parameters; a non-trainable
  // instance (e.g. the EMA teacher) never builds a graph.
  Crnn(ModelConfig config, std::uint64_t seed, bool trainable = true);

  Crnn(const Crnn&) = delete;
  Crnn& operator=(const Crnn&) = delete;
  Crnn(Crnn&&) = default;
  Crnn& operator=(Crnn&&) = default;

  // mel: (batch, n_mels, n_frames).
  ModelOutput<T> forward(const Tensor<T>& mel, NormMode mode);

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  GluBlockParams<T>& block(std::size_t i) { return blocks_.at(i); }
  GruParams<T>& gru(std::size_t layer, bool backward_dir) {
    return grus_.at(2 * layer + (backward_dir ? 1 : 0));
  }

 private:
  void build(std::uint64_t seed, bool trainable);

  ModelConfig config_;
  ParameterSet<T> params_;
  std::vector<GluBlockParams<T>> blocks_;
  std::vector<GruParams<T>> grus_;
  Tensor<T> frame_weight_, frame_bias_, att_weight_, att_bias_;
};

// Stacks equally shaped (n_mels x n_frames) feature grids into a batch.
template <typename T>
Tensor<T> stack_features(const std::vector<const std::vector<float>*>& items,
                         std::size_t n_mels, std::size_t n_frames);

}  // namespace sedlab

#endif  // SEDLAB_CRNN_H_

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

#include "sedlab/crnn.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace sedlab {

void ModelConfig::validate() const {
  if (n_classes == 0) throw std::invalid_argument("n_classes must be positive");
  if (conv_filters.empty() || conv_filters.size() != poolings.size()) {
    throw std::invalid_argument(
        "conv_filters and poolings must be non-empty and of equal length");
  }
  if (kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
  if (gru_units == 0 || gru_layers == 0) {
    throw std::invalid_argument("gru_units and gru_layers must be positive");
  }
  std::size_t t = n_frames, f = n_mels;
  for (const auto& [pt, pf] : poolings) {
    if (pt == 0 || pf == 0 || t % pt != 0 || f % pf != 0) {
      throw std::invalid_argument("pooling factors do not divide the input");
    }
    t /= pt;
    f /= pf;
  }
  if (f != 1) {
    throw std::invalid_argument(
        "frequency pooling must reduce n_mels to 1, got " + std::to_string(f));
  }
  for (auto c : conv_filters) {
    if (c == 0) throw std::invalid_argument("conv filter count must be positive");
  }
}

std::size_t ModelConfig::time_pool_factor() const {
  std::size_t f = 1;
  for (const auto& p : poolings) f *= p.first;
  return f;
}

template <typename T>
Tensor<T> glu_block_composed(const Tensor<T>& x, GluBlockParams<T>& p,
                             NormMode mode) {
  const bool batch_stats = mode != NormMode::kInference;
  const bool update = mode == NormMode::kTrain;
  Tensor<T> lin = batch_norm(conv2d(x, p.lin_weight, p.lin_bias), p.lin_gamma,
                             p.lin_beta, p.lin_stats, batch_stats, update);
  Tensor<T> gate =
      batch_norm(conv2d(x, p.gate_weight, p.gate_bias), p.gate_gamma,
                 p.gate_beta, p.gate_stats, batch_stats, update);
  return max_pool2d(mul(lin, sigmoid(gate)), p.pool_freq, p.pool_time);
}

template <typename T>
Tensor<T> gru_direction(const Tensor<T>& seq, std::size_t steps,
                        std::size_t batch, const GruParams<T>& p,
                        bool reverse) {
  const std::size_t hidden = p.w_hidden.dim(0);
  if (seq.rank() != 2 || seq.dim(0) != steps * batch ||
      seq.dim(1) != p.w_input.dim(0)) {
    throw_shape_mismatch("gru", seq.shape(), p.w_input.shape());
  }
  // Input projections for every step at once.
  const Tensor<T> projected = add_bias(matmul(seq, p.w_input), p.b_input);
  std::vector<Tensor<T>> outputs(steps);
  Tensor<T> h = Tensor<T>::zeros({batch, hidden});
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    const Tensor<T> xt = slice(projected, 0, t * batch, batch);
    const Tensor<T> ht = add_bias(matmul(h, p.w_hidden), p.b_hidden);
    const Tensor<T> rz = sigmoid(
        add(slice(xt, 1, 0, 2 * hidden), slice(ht, 1, 0, 2 * hidden)));
    const Tensor<T> r = slice(rz, 1, 0, hidden);
    const Tensor<T> z = slice(rz, 1, hidden, hidden);
    const Tensor<T> n = tanh(add(slice(xt, 1, 2 * hidden, hidden),
                                 mul(r, slice(ht, 1, 2 * hidden, hidden))));
    // (1 - z) * n + z * h
    h = add(n, mul(z, sub(h, n)));
    outputs[t] = h;
  }
  return concat(outputs, 0);
}

template <typename T>
Tensor<T> bigru_layer(const Tensor<T>& seq, std::size_t steps,
                      std::size_t batch, const GruParams<T>& forward,
                      const GruParams<T>& backward) {
  return concat<T>({gru_direction(seq, steps, batch, forward, false),
                    gru_direction(seq, steps, batch, backward, true)},
                   1);
}

template <typename T>
Tensor<T> attention_pool(const Tensor<T>& frame_probs,
                         const Tensor<T>& features, const Tensor<T>& weight,
                         const Tensor<T>& bias) {
  if (frame_probs.rank() != 3 ||
      features.dim(0) != frame_probs.dim(0) * frame_probs.dim(1) ||
      weight.dim(1) != frame_probs.dim(2)) {
    throw_shape_mismatch("attention_pool", frame_probs.shape(),
                         features.shape());
  }
  const Tensor<T> logits =
      reshape(add_bias(matmul(features, weight), bias), frame_probs.shape());
  const Tensor<T> attention = softmax(logits, 0);
  return sum_axis(mul(attention, frame_probs), 0);
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng,
                         bool trainable) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> v(shape_size(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(v), trainable);
}

}  // namespace

template <typename T>
Crnn<T>::Crnn(ModelConfig config, std::uint64_t seed, bool trainable)
    : config_(std::move(config)) {
  config_.validate();
  build(seed, trainable);
}

template <typename T>
void Crnn<T>::build(std::uint64_t seed, bool trainable) {
  std::mt19937_64 rng(seed);
  const std::size_t k = config_.kernel;
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    const std::size_t out = config_.conv_filters[i];
    const double bound =
        std::sqrt(6.0 / static_cast<double>((in_channels + out) * k * k));
    const std::string prefix = "conv" + std::to_string(i);
    GluBlockParams<T> b;
    auto path = [&](const std::string& kind, Tensor<T>& w, Tensor<T>& bias,
                    Tensor<T>& gamma, Tensor<T>& beta,
                    BatchNormBuffers<T>& stats) {
      const std::string p = prefix + "." + kind;
      w = params_.add(p + ".weight",
                      uniform_tensor<T>({out, in_channels, k, k}, bound, rng,
                                        trainable));
      bias = params_.add(p + ".bias", Tensor<T>::zeros({out}, trainable));
      gamma = params_.add(p + ".bn.gamma", Tensor<T>::full({out}, T(1), trainable));
      beta = params_.add(p + ".bn.beta", Tensor<T>::zeros({out}, trainable));
      stats.running_mean =
          params_.add(p + ".bn.running_mean", Tensor<T>::zeros({out}), false);
      stats.running_var =
          params_.add(p + ".bn.running_var", Tensor<T>::full({out}, T(1)), false);
    };
    path("lin", b.lin_weight, b.lin_bias, b.lin_gamma, b.lin_beta, b.lin_stats);
    path("gate", b.gate_weight, b.gate_bias, b.gate_gamma, b.gate_beta,
         b.gate_stats);
    b.pool_time = config_.poolings[i].first;
    b.pool_freq = config_.poolings[i].second;
    blocks_.push_back(std::move(b));
    in_channels = out;
  }

  const std::size_t h = config_.gru_units;
  const double gru_bound = 1.0 / std::sqrt(static_cast<double>(h));
  std::size_t width = in_channels;
  for (std::size_t layer = 0; layer < config_.gru_layers; ++layer) {
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = "gru" + std::to_string(layer) + "." + dir;
      GruParams<T> g;
      g.w_input = params_.add(p + ".w_input",
                              uniform_tensor<T>({width, 3 * h}, gru_bound, rng,
                                                trainable));
      g.w_hidden = params_.add(p + ".w_hidden",
                               uniform_tensor<T>({h, 3 * h}, gru_bound, rng,
                                                 trainable));
      g.b_input = params_.add(
          p + ".b_input", uniform_tensor<T>({3 * h}, gru_bound, rng, trainable));
      g.b_hidden = params_.add(
          p + ".b_hidden", uniform_tensor<T>({3 * h}, gru_bound, rng, trainable));
      grus_.push_back(std::move(g));
    }
    width = 2 * h;
  }

  const std::size_t c = config_.n_classes;
  const double dense_bound = std::sqrt(6.0 / static_cast<double>(width + c));
  frame_weight_ = params_.add(
      "frame.weight", uniform_tensor<T>({width, c}, dense_bound, rng, trainable));
  frame_bias_ = params_.add("frame.bias", Tensor<T>::zeros({c}, trainable));
  att_weight_ = params_.add("attention.weight",
                            uniform_tensor<T>({width, c}, dense_bound, rng,
                                              trainable));
  att_bias_ = params_.add("attention.bias", Tensor<T>::zeros({c}, trainable));
}

template <typename T>
ModelOutput<T> Crnn<T>::forward(const Tensor<T>& mel, NormMode mode) {
  if (mel.rank() != 3 || mel.dim(1) != config_.n_mels ||
      mel.dim(2) != config_.n_frames) {
    throw ShapeError("model input must be (batch, " +
                     std::to_string(config_.n_mels) + ", " +
                     std::to_string(config_.n_frames) + "), got " +
                     shape_string(mel.shape()));
  }
  const std::size_t batch = mel.dim(0);
  Tensor<T> x = reshape(mel, {batch, 1, config_.n_mels, config_.n_frames});
  for (auto& b : blocks_) x = glu_block(x, b, mode);

  // (batch, C, 1, T') -> time-major rows (T' * batch, C)
  const std::size_t channels = x.dim(1);
  const std::size_t steps = x.dim(3);
  x = permute(reshape(x, {batch, channels, steps}), {2, 0, 1});
  Tensor<T> seq = reshape(x, {steps * batch, channels});
  for (std::size_t layer = 0; layer < config_.gru_layers; ++layer) {
    seq = bigru_layer(seq, steps, batch, grus_[2 * layer], grus_[2 * layer + 1]);
  }

  const std::size_t c = config_.n_classes;
  const Tensor<T> frame = reshape(
      sigmoid(add_bias(matmul(seq, frame_weight_), frame_bias_)),
      {steps, batch, c});
  ModelOutput<T> out;
  out.clip_probs = attention_pool(frame, seq, att_weight_, att_bias_);
  out.frame_probs = permute(frame, {1, 0, 2});
  return out;
}

template <typename T>
Tensor<T> stack_features(const std::vector<const std::vector<float>*>& items,
                         std::size_t n_mels, std::size_t n_frames) {
  const std::size_t cell = n_mels * n_frames;
  std::vector<T> v(items.size() * cell);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->size() != cell) {
      throw ShapeError("feature grid has " + std::to_string(items[i]->size()) +
                       " cells, expected " + std::to_string(cell));
    }
    std::copy(items[i]->begin(), items[i]->end(), v.begin() + i * cell);
  }
  return Tensor<T>::from({items.size(), n_mels, n_frames}, std::move(v));
}

#define SEDLAB_INSTANTIATE_CRNN(T)                                            \
  template Tensor<T> glu_block_composed(const Tensor<T>&,                    \
                                        GluBlockParams<T>&, NormMode);        \
  template Tensor<T> gru_direction(const Tensor<T>&, std::size_t,             \
                                   std::size_t, const GruParams<T>&, bool);   \
  template Tensor<T> bigru_layer(const Tensor<T>&, std::size_t, std::size_t,  \
                                 const GruParams<T>&, const GruParams<T>&);   \
  template Tensor<T> attention_pool(const Tensor<T>&, const Tensor<T>&,       \
                                    const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> stack_features<T>(                                       \
      const std::vector<const std::vector<float>*>&, std::size_t, std::size_t); \
  template class Crnn<T>;

SEDLAB_INSTANTIATE_CRNN(float)
SEDLAB_INSTANTIATE_CRNN(double)

#undef SEDLAB_INSTANTIATE_CRNN

}  // namespace sedlab

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

#ifndef SEDLAB_OPS_H_
#define SEDLAB_OPS_H_

#include <cstddef>
#include <vector>

#include "sedlab/tensor.h"

namespace sedlab {

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// scale * a + shift
template <typename T> Tensor<T> affine(const Tensor<T>& a, T scale, T shift);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);

// x[..., j] + bias[j]; bias is rank 1 with the size of x's last dimension.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

// (M, K) x (K, N) -> (M, N)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x: (N, Cin, H, W), weight: (Cout, Cin, k, k) with odd k, bias: (Cout) or
// undefined. Stride 1, zero padding k/2, so H and W are preserved.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias);

// Non-overlapping max pooling of (N, C, H, W) by (ph, pw); H % ph == 0 and
// W % pw == 0. Gradient goes to the first maximal cell of each window.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t ph, std::size_t pw);

// Per-channel normalization of (N, C, H, W). In training mode the batch
// statistics are used and folded into the running buffers (which carry no
// gradient); otherwise the running buffers are used.
template <typename T>
struct BatchNormBuffers {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormBuffers<T>& buffers,
                     bool training, bool update_running = true,
                     T momentum = T(0.1), T eps = T(1e-5));

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start,
                std::size_t length);
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
// Removes `axis`.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);

// Mean binary cross-entropy; predictions are clamped to [eps, 1 - eps] and
// `target` is treated as a constant.
template <typename T>
Tensor<T> bce(const Tensor<T>& pred, const Tensor<T>& target,
              T eps = T(1e-7));
// Mean squared difference; `target` is treated as a constant.
template <typename T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace sedlab

#endif  // SEDLAB_OPS_H_

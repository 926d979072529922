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

// Fused gated convolution block. Forward keeps only the stacked convolution
// outputs and the pooling argmax; normalization, gating and the gradient of
// the pooled product are recomputed from them in the backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "graph_internal.h"
#include "sedlab/crnn.h"

namespace sedlab {

using namespace detail;

namespace {

template <typename T>
void im2col_same(const T* img, std::size_t channels, std::size_t height,
                 std::size_t width, std::size_t k, T* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h_s = static_cast<std::ptrdiff_t>(height);
  const auto w_s = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = img + c * height * width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * height * width;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(w_s, w_s - dx);
        for (std::ptrdiff_t y = 0; y < h_s; ++y) {
          T* dst = row + y * w_s;
          const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(ky) - pad;
          if (sy < 0 || sy >= h_s || x_lo >= x_hi) {
            std::fill(dst, dst + w_s, T(0));
            continue;
          }
          const T* src = plane + sy * w_s;
          std::fill(dst, dst + x_lo, T(0));
          std::copy(src + x_lo + dx, src + x_hi + dx, dst + x_lo);
          std::fill(dst + x_hi, dst + w_s, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_same_add(const T* col, std::size_t channels, std::size_t height,
                     std::size_t width, std::size_t k, T* img) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h_s = static_cast<std::ptrdiff_t>(height);
  const auto w_s = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = img + c * height * width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * height * width;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(w_s, w_s - dx);
        for (std::ptrdiff_t y = 0; y < h_s; ++y) {
          const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(ky) - pad;
          if (sy < 0 || sy >= h_s) continue;
          const T* src = row + y * w_s;
          T* dst = plane + sy * w_s + dx;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

// Per-channel affine form of the normalization: y = x * scale + shift.
template <typename T>
struct ChannelNorm {
  std::vector<T> mean, invstd, scale, shift;
};

template <typename T>
inline T sigmoid_of(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
Tensor<T> glu_block(const Tensor<T>& x, GluBlockParams<T>& p, NormMode mode) {
  if (x.rank() != 4 || p.lin_weight.rank() != 4 ||
      p.lin_weight.dim(1) != x.dim(1) ||
      p.gate_weight.shape() != p.lin_weight.shape()) {
    throw_shape_mismatch("glu_block", x.shape(), p.lin_weight.shape());
  }
  const std::size_t batch = x.dim(0), cin = x.dim(1), height = x.dim(2),
                    width = x.dim(3);
  const std::size_t cout = p.lin_weight.dim(0), k = p.lin_weight.dim(2);
  const std::size_t ph = p.pool_freq, pw = p.pool_time;
  if (ph == 0 || pw == 0 || height % ph != 0 || width % pw != 0) {
    throw ShapeError("glu_block: pooling does not tile " +
                     shape_string(x.shape()));
  }
  const std::size_t plane = height * width;
  const std::size_t patch = cin * k * k;
  const std::size_t rows = 2 * cout;  // lin channels, then gate channels
  const std::size_t oh = height / ph, ow = width / pw;
  const std::size_t out_plane = oh * ow;
  const bool batch_stats = mode != NormMode::kInference;

  // Stacked weights: (2 * cout, patch).
  std::vector<T> w_stack(rows * patch);
  std::copy(p.lin_weight.values().begin(), p.lin_weight.values().end(),
            w_stack.begin());
  std::copy(p.gate_weight.values().begin(), p.gate_weight.values().end(),
            w_stack.begin() + cout * patch);
  const auto e_rows = static_cast<Eigen::Index>(rows);
  const auto e_patch = static_cast<Eigen::Index>(patch);
  const auto e_plane = static_cast<Eigen::Index>(plane);

  std::vector<T> pre(batch * rows * plane);
  {
    std::vector<T> col(patch * plane);
    ConstMapMat<T> w(w_stack.data(), e_rows, e_patch);
    for (std::size_t n = 0; n < batch; ++n) {
      im2col_same(x.values().data() + n * cin * plane, cin, height, width, k,
                  col.data());
      MapMat<T>(pre.data() + n * rows * plane, e_rows, e_plane).noalias() =
          w * ConstMapMat<T>(col.data(), e_patch, e_plane);
    }
  }
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T b = r < cout ? p.lin_bias.values()[r]
                           : p.gate_bias.values()[r - cout];
      T* row = pre.data() + (n * rows + r) * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] += b;
    }
  }

  ChannelNorm<T> norm;
  norm.mean.resize(rows);
  norm.invstd.resize(rows);
  norm.scale.resize(rows);
  norm.shift.resize(rows);
  const double eps = 1e-5, momentum = 0.1;
  const std::size_t count = batch * plane;
  for (std::size_t r = 0; r < rows; ++r) {
    const bool is_lin = r < cout;
    const std::size_t c = is_lin ? r : r - cout;
    BatchNormBuffers<T>& stats = is_lin ? p.lin_stats : p.gate_stats;
    const T gamma = (is_lin ? p.lin_gamma : p.gate_gamma).values()[c];
    const T beta = (is_lin ? p.lin_beta : p.gate_beta).values()[c];
    double mu, var;
    if (batch_stats) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* row = pre.data() + (n * rows + r) * plane;
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += row[i];
        s += acc;
      }
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* row = pre.data() + (n * rows + r) * plane;
        const T m = static_cast<T>(mu);
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = row[i] - m;
          acc += d * d;
        }
        ss += acc;
      }
      var = ss / static_cast<double>(count);
      if (mode == NormMode::kTrain) {
        auto& rm = stats.running_mean.storage();
        auto& rv = stats.running_var.storage();
        const double unbiased =
            count > 1 ? ss / static_cast<double>(count - 1) : var;
        rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mu);
        rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
      }
    } else {
      mu = stats.running_mean.values()[c];
      var = stats.running_var.values()[c];
    }
    const double invstd = 1.0 / std::sqrt(var + eps);
    norm.mean[r] = static_cast<T>(mu);
    norm.invstd[r] = static_cast<T>(invstd);
    norm.scale[r] = static_cast<T>(gamma * invstd);
    norm.shift[r] = static_cast<T>(beta - mu * gamma * invstd);
  }

  std::vector<T> out(batch * cout * out_plane);
  std::vector<std::uint32_t> arg(out.size());
  std::vector<T> gated(plane);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < cout; ++c) {
      const T* lin = pre.data() + (n * rows + c) * plane;
      const T* gate = pre.data() + (n * rows + cout + c) * plane;
      const T ls = norm.scale[c], lb = norm.shift[c];
      const T gs = norm.scale[cout + c], gb = norm.shift[cout + c];
      for (std::size_t i = 0; i < plane; ++i) {
        gated[i] = (lin[i] * ls + lb) * sigmoid_of(gate[i] * gs + gb);
      }
      T* o = out.data() + (n * cout + c) * out_plane;
      std::uint32_t* a = arg.data() + (n * cout + c) * out_plane;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t best = oy * ph * width + ox * pw;
          for (std::size_t dy = 0; dy < ph; ++dy) {
            const std::size_t base = (oy * ph + dy) * width + ox * pw;
            for (std::size_t dx = 0; dx < pw; ++dx) {
              if (gated[base + dx] > gated[best]) best = base + dx;
            }
          }
          o[oy * ow + ox] = gated[best];
          a[oy * ow + ox] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }

  return make_result<T>(
      "glu_block", {batch, cout, oh, ow}, std::move(out),
      {&x, &p.lin_weight, &p.lin_bias, &p.gate_weight, &p.gate_bias,
       &p.lin_gamma, &p.lin_beta, &p.gate_gamma, &p.gate_beta},
      [=, pre = std::move(pre), arg = std::move(arg),
       norm = std::move(norm)](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>* weights[2] = {self.parents[1].get(), self.parents[3].get()};
        Node<T>* biases[2] = {self.parents[2].get(), self.parents[4].get()};
        Node<T>* gammas[2] = {self.parents[5].get(), self.parents[7].get()};
        Node<T>* betas[2] = {self.parents[6].get(), self.parents[8].get()};

        // Gradient w.r.t. the normalized maps, nonzero only at argmax cells.
        std::vector<T> dy_lin(self.grad.size()), dy_gate(self.grad.size());
        std::vector<double> sum_dy(rows, 0.0), sum_dy_xhat(rows, 0.0);
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < cout; ++c) {
            const std::size_t lr = c, gr = cout + c;
            const T* lin = pre.data() + (n * rows + lr) * plane;
            const T* gate = pre.data() + (n * rows + gr) * plane;
            for (std::size_t o = 0; o < out_plane; ++o) {
              const std::size_t at = (n * cout + c) * out_plane + o;
              const std::size_t i = arg[at];
              const T d = self.grad[at];
              const T lx = (lin[i] - norm.mean[lr]) * norm.invstd[lr];
              const T gx = (gate[i] - norm.mean[gr]) * norm.invstd[gr];
              const T a = lin[i] * norm.scale[lr] + norm.shift[lr];
              const T g = sigmoid_of(gate[i] * norm.scale[gr] + norm.shift[gr]);
              const T dl = d * g;
              const T dg = d * a * g * (T(1) - g);
              dy_lin[at] = dl;
              dy_gate[at] = dg;
              sum_dy[lr] += dl;
              sum_dy_xhat[lr] += dl * lx;
              sum_dy[gr] += dg;
              sum_dy_xhat[gr] += dg * gx;
            }
          }
        }
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t side = r < cout ? 0 : 1;
          const std::size_t c = side == 0 ? r : r - cout;
          if (wants_grad(*gammas[side]))
            gammas[side]->ensure_grad()[c] += static_cast<T>(sum_dy_xhat[r]);
          if (wants_grad(*betas[side]))
            betas[side]->ensure_grad()[c] += static_cast<T>(sum_dy[r]);
        }

        const bool need_x = wants_grad(px);
        const bool need_w = wants_grad(*weights[0]) || wants_grad(*weights[1]);
        const bool need_b = wants_grad(*biases[0]) || wants_grad(*biases[1]);
        if (!need_x && !need_w && !need_b) return;

        // Dense gradient w.r.t. the convolution outputs.
        std::vector<T> dpre(batch * rows * plane);
        const T inv_count = T(1) / static_cast<T>(count);
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t side = r < cout ? 0 : 1;
            const std::size_t c = side == 0 ? r : r - cout;
            const T* src = pre.data() + (n * rows + r) * plane;
            T* dst = dpre.data() + (n * rows + r) * plane;
            const T coef = norm.scale[r];  // gamma * invstd
            if (batch_stats) {
              const T a = static_cast<T>(sum_dy[r]) * inv_count;
              const T b = static_cast<T>(sum_dy_xhat[r]) * inv_count;
              const T m = norm.mean[r], is = norm.invstd[r];
              for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = -coef * (a + (src[i] - m) * is * b);
              }
            } else {
              std::fill(dst, dst + plane, T(0));
            }
            const std::vector<T>& dy = side == 0 ? dy_lin : dy_gate;
            for (std::size_t o = 0; o < out_plane; ++o) {
              const std::size_t at = (n * cout + c) * out_plane + o;
              dst[arg[at]] += coef * dy[at];
            }
          }
        }

        if (need_b) {
          for (std::size_t side = 0; side < 2; ++side) {
            if (!wants_grad(*biases[side])) continue;
            auto& gb = biases[side]->ensure_grad();
            for (std::size_t n = 0; n < batch; ++n)
              for (std::size_t c = 0; c < cout; ++c) {
                const T* row = dpre.data() + (n * rows + side * cout + c) * plane;
                T acc = 0;
                for (std::size_t i = 0; i < plane; ++i) acc += row[i];
                gb[c] += acc;
              }
          }
        }

        if (!need_x && !need_w) return;
        std::vector<T> w_stacked(rows * patch);
        std::copy(weights[0]->value.begin(), weights[0]->value.end(),
                  w_stacked.begin());
        std::copy(weights[1]->value.begin(), weights[1]->value.end(),
                  w_stacked.begin() + cout * patch);
        ConstMapMat<T> w(w_stacked.data(), e_rows, e_patch);
        RowMat<T> dw = RowMat<T>::Zero(e_rows, e_patch);
        std::vector<T> col(patch * plane);
        for (std::size_t n = 0; n < batch; ++n) {
          ConstMapMat<T> d(dpre.data() + n * rows * plane, e_rows, e_plane);
          if (need_w) {
            im2col_same(px.value.data() + n * cin * plane, cin, height, width,
                        k, col.data());
            dw.noalias() +=
                d * ConstMapMat<T>(col.data(), e_patch, e_plane).transpose();
          }
          if (need_x) {
            MapMat<T>(col.data(), e_patch, e_plane).noalias() =
                w.transpose() * d;
            col2im_same_add(col.data(), cin, height, width, k,
                            px.ensure_grad().data() + n * cin * plane);
          }
        }
        for (std::size_t side = 0; side < 2; ++side) {
          if (!wants_grad(*weights[side])) continue;
          auto& gw = weights[side]->ensure_grad();
          const T* src = dw.data() + side * cout * patch;
          for (std::size_t i = 0; i < cout * patch; ++i) gw[i] += src[i];
        }
      });
}

template Tensor<float> glu_block(const Tensor<float>&, GluBlockParams<float>&,
                                 NormMode);
template Tensor<double> glu_block(const Tensor<double>&,
                                  GluBlockParams<double>&, NormMode);

}  // namespace sedlab

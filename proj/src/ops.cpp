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

#include "sedlab/ops.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>

#include "graph_internal.h"

namespace sedlab {

using namespace detail;

namespace {

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw_shape_mismatch(op, a, b);
}

// Product of dims before / after `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_string(shape));
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same("add", a.shape(), b.shape());
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>("add", a.shape(), std::move(out), {&a, &b},
                        [](Node<T>& self) {
                          for (auto& p : self.parents) {
                            if (!wants_grad(*p)) continue;
                            auto& g = p->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              g[i] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same("sub", a.shape(), b.shape());
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>("sub", a.shape(), std::move(out), {&a, &b},
                        [](Node<T>& self) {
                          for (std::size_t k = 0; k < 2; ++k) {
                            auto& p = self.parents[k];
                            if (!wants_grad(*p)) continue;
                            const T sign = k == 0 ? T(1) : T(-1);
                            auto& g = p->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              g[i] += sign * self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same("mul", a.shape(), b.shape());
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(
      "mul", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (wants_grad(pa)) {
          auto& g = pa.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * pb.value[i];
        }
        if (wants_grad(pb)) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * pa.value[i];
        }
      });
}

template <typename T>
Tensor<T> affine(const Tensor<T>& a, T scale, T shift) {
  std::vector<T> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * av[i] + shift;
  return make_result<T>("affine", a.shape(), std::move(out), {&a},
                        [scale](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += scale * self.grad[i];
                        });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return make_result<T>("sigmoid", a.shape(), std::move(out), {&a},
                        [](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const auto& y = self.value;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * y[i] * (T(1) - y[i]);
                        });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return make_result<T>("tanh", a.shape(), std::move(out), {&a},
                        [](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const auto& y = self.value;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * (T(1) - y[i] * y[i]);
                        });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back()) {
    throw_shape_mismatch("add_bias", x.shape(), bias.shape());
  }
  const std::size_t cols = bias.dim(0);
  const std::size_t rows = x.size() / cols;
  std::vector<T> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return make_result<T>(
      "add_bias", x.shape(), std::move(out), {&x, &bias},
      [rows, cols](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (wants_grad(px)) {
          auto& g = px.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants_grad(pb)) {
          auto& g = pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
              g[c] += self.grad[r * cols + c];
        }
      });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw_shape_mismatch("matmul", a.shape(), b.shape());
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MapMat<T>(out.data(), m, n).noalias() =
      ConstMapMat<T>(a.values().data(), m, k) *
      ConstMapMat<T>(b.values().data(), k, n);
  return make_result<T>(
      "matmul", {a.dim(0), b.dim(1)}, std::move(out), {&a, &b},
      [m, k, n](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        ConstMapMat<T> dc(self.grad.data(), m, n);
        if (wants_grad(pa)) {
          MapMat<T>(pa.ensure_grad().data(), m, k).noalias() +=
              dc * ConstMapMat<T>(pb.value.data(), k, n).transpose();
        }
        if (wants_grad(pb)) {
          MapMat<T>(pb.ensure_grad().data(), k, n).noalias() +=
              ConstMapMat<T>(pa.value.data(), m, k).transpose() * dc;
        }
      });
}

namespace {

// col[(c * k + ky) * k + kx][h * w + x] = img[c][h + ky - pad][x + kx - pad]
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t height,
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
void col2im_add(const T* col, std::size_t channels, std::size_t height,
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

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  if (x.rank() != 4 || weight.rank() != 4 || weight.dim(1) != x.dim(1) ||
      weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
    throw_shape_mismatch("conv2d", x.shape(), weight.shape());
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw_shape_mismatch("conv2d(bias)", weight.shape(), bias.shape());
  }
  const std::size_t batch = x.dim(0), cin = x.dim(1), height = x.dim(2),
                    width = x.dim(3), cout = weight.dim(0), k = weight.dim(2);
  const std::size_t plane = height * width;
  const std::size_t patch = cin * k * k;
  const auto e_cout = static_cast<Eigen::Index>(cout);
  const auto e_patch = static_cast<Eigen::Index>(patch);
  const auto e_plane = static_cast<Eigen::Index>(plane);

  std::vector<T> out(batch * cout * plane);
  std::vector<T> col(patch * plane);
  ConstMapMat<T> wmat(weight.values().data(), e_cout, e_patch);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.values().data() + n * cin * plane, cin, height, width, k,
           col.data());
    MapMat<T> y(out.data() + n * cout * plane, e_cout, e_plane);
    y.noalias() = wmat * ConstMapMat<T>(col.data(), e_patch, e_plane);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c) y.row(c).array() += bias.values()[c];
    }
  }
  return make_result<T>(
      "conv2d", {batch, cout, height, width}, std::move(out),
      {&x, &weight, &bias},
      [=](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const bool need_x = wants_grad(px);
        const bool need_w = wants_grad(pw);
        std::vector<T> col_buf(patch * plane);
        ConstMapMat<T> w_mat(pw.value.data(), e_cout, e_patch);
        for (std::size_t n = 0; n < batch; ++n) {
          ConstMapMat<T> dy(self.grad.data() + n * cout * plane, e_cout,
                            e_plane);
          if (need_w) {
            im2col(px.value.data() + n * cin * plane, cin, height, width, k,
                   col_buf.data());
            MapMat<T>(pw.ensure_grad().data(), e_cout, e_patch).noalias() +=
                dy * ConstMapMat<T>(col_buf.data(), e_patch, e_plane)
                         .transpose();
          }
          if (need_x) {
            MapMat<T>(col_buf.data(), e_patch, e_plane).noalias() =
                w_mat.transpose() * dy;
            col2im_add(col_buf.data(), cin, height, width, k,
                       px.ensure_grad().data() + n * cin * plane);
          }
          if (pb != nullptr && wants_grad(*pb)) {
            auto& gb = pb->ensure_grad();
            for (std::size_t c = 0; c < cout; ++c) gb[c] += dy.row(c).sum();
          }
        }
      });
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t ph, std::size_t pw) {
  if (x.rank() != 4 || ph == 0 || pw == 0 || x.dim(2) % ph != 0 ||
      x.dim(3) % pw != 0) {
    throw ShapeError("max_pool2d: window (" + std::to_string(ph) + ", " +
                     std::to_string(pw) + ") does not tile shape " +
                     shape_string(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / ph, ow = w / pw;
  std::vector<T> out(planes * oh * ow);
  std::vector<std::uint32_t> arg(out.size());
  const auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = base + oy * ph * w + ox * pw;
        for (std::size_t dy = 0; dy < ph; ++dy) {
          const std::size_t row = base + (oy * ph + dy) * w + ox * pw;
          for (std::size_t dx = 0; dx < pw; ++dx) {
            if (xv[row + dx] > xv[best]) best = row + dx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = xv[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return make_result<T>("max_pool2d", {x.dim(0), x.dim(1), oh, ow},
                        std::move(out), {&x},
                        [arg = std::move(arg)](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t o = 0; o < arg.size(); ++o)
                            g[arg[o]] += self.grad[o];
                        });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormBuffers<T>& buffers,
                     bool training, bool update_running, T momentum, T eps) {
  if (x.rank() != 4 || gamma.rank() != 1 || gamma.dim(0) != x.dim(1)) {
    throw_shape_mismatch("batch_norm", x.shape(), gamma.shape());
  }
  require_same("batch_norm(beta)", gamma.shape(), beta.shape());
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  const std::size_t count = batch * plane;
  const auto xv = x.values();

  std::vector<T> mean_c(channels), invstd_c(channels);
  auto& rm = buffers.running_mean.storage();
  auto& rv = buffers.running_var.storage();
  if (rm.size() != channels || rv.size() != channels) {
    throw_shape_mismatch("batch_norm(buffers)", gamma.shape(),
                         buffers.running_mean.shape());
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (training) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = xv.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = xv.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean_c[c] = static_cast<T>(mu);
      invstd_c[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      if (update_running) {
        const double unbiased =
            count > 1 ? ss / static_cast<double>(count - 1) : var;
        rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mu);
        rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
      }
    } else {
      mean_c[c] = rm[c];
      invstd_c[c] = static_cast<T>(1.0 / std::sqrt(double(rv[c]) + eps));
    }
  }

  std::vector<T> out(x.size());
  const auto gv = gamma.values();
  const auto bv = beta.values();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * plane;
      const T scale = gv[c] * invstd_c[c];
      const T shift = bv[c] - mean_c[c] * scale;
      for (std::size_t i = 0; i < plane; ++i)
        out[off + i] = xv[off + i] * scale + shift;
    }
  }

  return make_result<T>(
      "batch_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
      [=, mean_c = std::move(mean_c),
       invstd_c = std::move(invstd_c)](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pg = *self.parents[1];
        Node<T>& pbeta = *self.parents[2];
        const auto& dy = self.grad;
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T xhat = (px.value[off + i] - mean_c[c]) * invstd_c[c];
              sum_dy += dy[off + i];
              sum_dy_xhat += dy[off + i] * xhat;
            }
          }
          if (wants_grad(pg)) pg.ensure_grad()[c] += static_cast<T>(sum_dy_xhat);
          if (wants_grad(pbeta)) pbeta.ensure_grad()[c] += static_cast<T>(sum_dy);
          if (!wants_grad(px)) continue;
          auto& gx = px.ensure_grad();
          const T g = pg.value[c];
          if (training) {
            const T inv_m = T(1) / static_cast<T>(count);
            const T a = static_cast<T>(sum_dy) * inv_m;
            const T b = static_cast<T>(sum_dy_xhat) * inv_m;
            for (std::size_t n = 0; n < batch; ++n) {
              const std::size_t off = (n * channels + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const T xhat = (px.value[off + i] - mean_c[c]) * invstd_c[c];
                gx[off + i] += g * invstd_c[c] * (dy[off + i] - a - xhat * b);
              }
            }
          } else {
            for (std::size_t n = 0; n < batch; ++n) {
              const std::size_t off = (n * channels + c) * plane;
              for (std::size_t i = 0; i < plane; ++i)
                gx[off + i] += g * invstd_c[c] * dy[off + i];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  require_axis("concat", first, axis);
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw_shape_mismatch("concat", first, p.shape());
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.dim(i) != first[i])
        throw_shape_mismatch("concat", first, p.shape());
    }
    lens.push_back(p.dim(axis));
    shape[axis] += p.dim(axis);
  }
  const AxisSplit s = split_at(shape, axis);
  std::vector<T> out(shape_size(shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t block = lens[k] * s.inner;
    const auto pv = parts[k].values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(pv.data() + o * block, block,
                  out.data() + o * s.len * s.inner + offset);
    }
    offset += block;
  }
  return make_result<T>(
      "concat", shape, std::move(out), parts,
      [s, lens](Node<T>& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          const std::size_t block = lens[k] * s.inner;
          Node<T>& p = *self.parents[k];
          if (wants_grad(p)) {
            auto& g = p.ensure_grad();
            for (std::size_t o = 0; o < s.outer; ++o) {
              const T* src = self.grad.data() + o * s.len * s.inner + offset;
              T* dst = g.data() + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += block;
        }
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start,
                std::size_t length) {
  require_axis("slice", x.shape(), axis);
  if (start + length > x.dim(axis) || length == 0) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis " +
                     std::to_string(axis) + " of shape " +
                     shape_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  const std::size_t block = length * s.inner;
  std::vector<T> out(s.outer * block);
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + (o * s.len + start) * s.inner, block,
                out.data() + o * block);
  }
  return make_result<T>(
      "slice", std::move(shape), std::move(out), {&x},
      [s, start, block](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o) {
          T* dst = g.data() + (o * s.len + start) * s.inner;
          const T* src = self.grad.data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  require_axis("softmax", x.shape(), axis);
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<T> out(x.size());
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mx = xv[base];
      for (std::size_t l = 1; l < s.len; ++l)
        mx = std::max(mx, xv[base + l * s.inner]);
      T total = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(xv[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return make_result<T>(
      "softmax", x.shape(), std::move(out), {&x}, [s](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& y = self.value;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.len * s.inner + i;
            T dot = 0;
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t at = base + l * s.inner;
              dot += self.grad[at] * y[at];
            }
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t at = base + l * s.inner;
              g[at] += y[at] * (self.grad[at] - dot);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.values()) total += v;
  return make_result<T>("sum", {}, {total}, {&x}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const T n = static_cast<T>(x.size());
  return affine(sum(x), T(1) / n, T(0));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis) {
  require_axis("sum_axis", x.shape(), axis);
  const AxisSplit s = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<T> out(s.outer * s.inner, T(0));
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xv[(o * s.len + l) * s.inner + i];
  return make_result<T>(
      "sum_axis", std::move(shape), std::move(out), {&x}, [s](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i)
              g[(o * s.len + l) * s.inner + i] += self.grad[o * s.inner + i];
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw_shape_mismatch("reshape", x.shape(), shape);
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {&x},
                        [](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  std::vector<bool> used(r, false);
  if (perm.size() != r) throw ShapeError("permute: rank mismatch for " + shape_string(x.shape()));
  for (auto p : perm) {
    if (p >= r || used[p]) throw ShapeError("permute: invalid permutation");
    used[p] = true;
  }
  Shape shape(r);
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  for (std::size_t i = 0; i < r; ++i) shape[i] = x.dim(perm[i]);
  // Source offset for each destination element, in destination order.
  std::vector<std::size_t> src_index(x.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < src_index.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < r; ++d) off += idx[d] * in_stride[perm[d]];
    src_index[flat] = off;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<T> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[src_index[i]];
  return make_result<T>("permute", std::move(shape), std::move(out), {&x},
                        [src_index = std::move(src_index)](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < src_index.size(); ++i)
                            g[src_index[i]] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> bce(const Tensor<T>& pred, const Tensor<T>& target, T eps) {
  require_same("bce", pred.shape(), target.shape());
  const auto pv = pred.values();
  const auto yv = target.values();
  const std::size_t n = pred.size();
  if (n == 0) throw ShapeError("bce: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp<double>(pv[i], eps, 1.0 - eps);
    total -= yv[i] * std::log(p) + (1.0 - yv[i]) * std::log(1.0 - p);
  }
  const T value = static_cast<T>(total / static_cast<double>(n));
  std::vector<T> y(yv.begin(), yv.end());
  return make_result<T>(
      "bce", {}, {value}, {&pred}, [y = std::move(y), eps](Node<T>& self) {
        Node<T>& pp = *self.parents[0];
        auto& g = pp.ensure_grad();
        const T scale = self.grad[0] / static_cast<T>(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T p = pp.value[i];
          if (p < eps || p > T(1) - eps) continue;
          g[i] += scale * (p - y[i]) / (p * (T(1) - p));
        }
      });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same("mse", pred.shape(), target.shape());
  const std::size_t n = pred.size();
  if (n == 0) throw ShapeError("mse: empty input");
  const auto pv = pred.values();
  const auto tv = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(pv[i]) - double(tv[i]);
    total += d * d;
  }
  std::vector<T> t(tv.begin(), tv.end());
  return make_result<T>(
      "mse", {}, {static_cast<T>(total / static_cast<double>(n))}, {&pred},
      [t = std::move(t)](Node<T>& self) {
        Node<T>& pp = *self.parents[0];
        auto& g = pp.ensure_grad();
        const T scale = T(2) * self.grad[0] / static_cast<T>(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += scale * (pp.value[i] - t[i]);
      });
}

#define SEDLAB_INSTANTIATE_OPS(T)                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> affine(const Tensor<T>&, T, T);                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                \
  template Tensor<T> tanh(const Tensor<T>&);                                   \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&);                                 \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t, std::size_t);   \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, BatchNormBuffers<T>&, bool,  \
                                bool, T, T);                                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);       \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t,         \
                           std::size_t);                                       \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> sum(const Tensor<T>&);                                    \
  template Tensor<T> mean(const Tensor<T>&);                                   \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t);                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&); \
  template Tensor<T> bce(const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);

SEDLAB_INSTANTIATE_OPS(float)
SEDLAB_INSTANTIATE_OPS(double)

#undef SEDLAB_INSTANTIATE_OPS

}  // namespace sedlab

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

#include "sedlab/params.h"

#include <cmath>
#include <fstream>

#include "binary_io.h"

namespace sedlab {

namespace {
constexpr char kCheckpointMagic[] = "HPSED1";
}  // namespace

template <typename T>
Tensor<T>& ParameterSet<T>::add(std::string name, Tensor<T> tensor,
                                bool trainable) {
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  tensor.set_requires_grad(trainable && tensor.requires_grad());
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor), trainable});
  return entries_.back().tensor;
}

template <typename T>
Tensor<T>& ParameterSet<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].tensor;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].tensor;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
std::size_t ParameterSet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.size();
  return n;
}

template <typename T>
void ParameterSet<T>::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) {
    throw std::invalid_argument("parameter sets differ in size");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i];
    const auto& src = other.entries_[i];
    if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape()) {
      throw std::invalid_argument("parameter mismatch at " + dst.name);
    }
    auto& v = dst.tensor.storage();
    std::copy(src.tensor.values().begin(), src.tensor.values().end(), v.begin());
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;

void Adam::step(ParameterSet<float>& params) {
  for (const auto& e : params.entries()) {
    if (e.trainable && e.tensor.grad().empty()) {
      throw std::runtime_error("adam: parameter '" + e.name +
                               "' has no gradient");
    }
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step_size = config_.learning_rate / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    auto& m = moments_[e.name];
    const std::size_t n = e.tensor.size();
    if (m.first.size() != n) {
      m.first.assign(n, 0.0f);
      m.second.assign(n, 0.0f);
    }
    auto values = e.tensor.mutable_values();
    const auto grad = e.tensor.grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m.first[i] = static_cast<float>(b1 * m.first[i] + (1.0 - b1) * g);
      m.second[i] = static_cast<float>(b2 * m.second[i] + (1.0 - b2) * g * g);
      const double denom =
          std::sqrt(static_cast<double>(m.second[i])) * inv_sqrt_c2 +
          config_.epsilon;
      values[i] = static_cast<float>(values[i] - step_size * m.first[i] / denom);
    }
  }
}

void save_checkpoint(const ParameterSet<float>& params,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  binary::write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    binary::write_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binary::write_u32(os, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape())
      binary::write_u32(os, static_cast<std::uint32_t>(d));
    binary::write_f32_array(os, e.tensor.values().data(), e.tensor.size());
  }
  if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor<float>> read_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  if (!binary::read_magic(is, kCheckpointMagic)) {
    throw CheckpointError(path.string() + " is not an HPSED1 checkpoint");
  }
  auto fail = [&]() -> CheckpointError {
    return CheckpointError("truncated checkpoint " + path.string());
  };
  std::uint32_t count = 0;
  if (!binary::read_u32(is, count)) throw fail();
  std::vector<NamedTensor<float>> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t len = 0, rank = 0;
    if (!binary::read_u32(is, len) || len > (1u << 16)) throw fail();
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw fail();
    if (!binary::read_u32(is, rank) || rank > 8) throw fail();
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!binary::read_u32(is, v)) throw fail();
      d = v;
    }
    std::vector<float> values(shape_size(shape));
    if (!binary::read_f32_array(is, values.data(), values.size())) throw fail();
    out.push_back({std::move(name),
                   Tensor<float>::from(std::move(shape), std::move(values)),
                   true});
  }
  return out;
}

void load_checkpoint(ParameterSet<float>& params,
                     const std::filesystem::path& path) {
  auto stored = read_checkpoint(path);
  if (stored.size() != params.size()) {
    throw CheckpointError("checkpoint " + path.string() + " holds " +
                          std::to_string(stored.size()) +
                          " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (auto& s : stored) {
    if (!params.contains(s.name)) {
      throw CheckpointError("checkpoint tensor '" + s.name +
                            "' does not exist in the model");
    }
    auto& dst = params.get(s.name);
    if (dst.shape() != s.tensor.shape()) {
      throw CheckpointError("checkpoint tensor '" + s.name + "' has shape " +
                            shape_string(s.tensor.shape()) +
                            ", model expects " + shape_string(dst.shape()));
    }
    auto& v = dst.storage();
    std::copy(s.tensor.values().begin(), s.tensor.values().end(), v.begin());
  }
}

}  // namespace sedlab

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

#ifndef SEDLAB_PARAMS_H_
#define SEDLAB_PARAMS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sedlab/tensor.h"

namespace sedlab {

// A named model tensor. Trainable entries are learned parameters; the rest
// are state buffers such as batch-norm running statistics.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
class ParameterSet {
 public:
  // Names must be unique.
  Tensor<T>& add(std::string name, Tensor<T> tensor, bool trainable = true);

  std::vector<NamedTensor<T>>& entries() { return entries_; }
  const std::vector<NamedTensor<T>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  Tensor<T>& get(const std::string& name);
  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  void zero_grad();
  std::size_t parameter_count() const;  // scalars in trainable entries

  // Copies every value from `other`; names and shapes must match.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<NamedTensor<T>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction over the trainable entries
// of a ParameterSet.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Throws std::runtime_error naming the first trainable parameter that has
  // no gradient.
  void step(ParameterSet<float>& params);

  std::int64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<float> first;
    std::vector<float> second;
  };
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "HPSED1" checkpoint: magic, u32 entry count, then per entry u32 name
// length, UTF-8 name, u32 rank, u32 dims, f32 values. Little-endian.
void save_checkpoint(const ParameterSet<float>& params,
                     const std::filesystem::path& path);

// Entries as stored, in file order.
std::vector<NamedTensor<float>> read_checkpoint(
    const std::filesystem::path& path);

// Loads values into an existing set; every entry must be present with the
// same shape, and the file may not contain unknown names.
void load_checkpoint(ParameterSet<float>& params,
                     const std::filesystem::path& path);

}  // namespace sedlab

#endif  // SEDLAB_PARAMS_H_

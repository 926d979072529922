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

// Run configuration and the pipeline stages behind the command-line tool:
// featurization, model loading, batched inference, ensembling, decoding and
// median-window sweeps.

#ifndef SEDLAB_PIPELINE_H_
#define SEDLAB_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sedlab/crnn.h"
#include "sedlab/decode.h"
#include "sedlab/eval.h"
#include "sedlab/ssl.h"
#include "sedlab/synth.h"

namespace sedlab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parsed "key = value" file with [section] headers and '#' comments.
// Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path data_dir, features_dir, checkpoints_dir, outputs_dir;
  DatasetCounts counts;
  ModelConfig model;
  TrainerConfig trainer;
  DecodeConfig decode;
  MatchConfig match;
  std::filesystem::path predict_checkpoint;  // [predict] checkpoint
  std::string predict_split = "test";
  std::filesystem::path eval_reference;      // default <data>/test.tsv
  std::filesystem::path eval_predictions;    // default <outputs>/predictions.tsv
  std::vector<std::size_t> sweep_windows{5, 7, 9, 11, 13};
  std::vector<std::filesystem::path> sweep_checkpoints;
  std::vector<std::filesystem::path> ensemble_members;
  std::vector<Method> ensemble_methods{Method::kMeanTeacher, Method::kIct, Method::kMixMatch};
  std::vector<double> ensemble_w_max{0.5, 1.0, 2.0};
};

// Throws ConfigError for syntax errors, unknown keys and invalid values.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Directory name of a training run, e.g. "ict_w0.5".
std::string run_name(Method method, double w_max);
// <checkpoints>/<run_name>/teacher.hpsed
std::filesystem::path default_checkpoint(const RunConfig& config, Method method,
                                         double w_max);

// Sorted *.wav names of a split directory.
std::vector<std::string> split_clips(const std::filesystem::path& data_dir,
                                     const std::string& split);
std::filesystem::path feature_path(const std::filesystem::path& features_dir,
                                   const std::string& split, const std::string& clip);
// Writes one HPFEAT1 file per clip; returns the clip names.
std::vector<std::string> featurize_split(const std::filesystem::path& data_dir,
                                         const std::filesystem::path& features_dir,
                                         const std::string& split);

struct FeatureSplit {
  std::vector<std::string> names;
  std::vector<std::vector<float>> mels;  // 128 x 1024 each
};
FeatureSplit load_features(const std::filesystem::path& features_dir, const std::string& split,
                           const std::vector<std::string>& names);

// Weak, strong and unlabeled splits with targets for `model`'s output grid.
TrainingData load_training_data(const std::filesystem::path& data_dir,
                                const std::filesystem::path& features_dir,
                                const ModelConfig& model,
                                const std::vector<std::string>& labels);

// Evaluation-mode model with checkpoint weights. Throws CheckpointError when
// the file does not fit `model`.
Crnn<float> load_model(const ModelConfig& model, const std::filesystem::path& checkpoint);

std::vector<PosteriorGrid> predict_posteriors(Crnn<float>& model,
                                              const std::vector<std::vector<float>>& mels,
                                              std::size_t batch_size = 8);

// Elementwise mean of frame and clip probabilities.
PosteriorGrid ensemble_average(const std::vector<PosteriorGrid>& members);
// Per-clip ensemble of several members' posterior lists.
std::vector<PosteriorGrid> ensemble_average(
    const std::vector<std::vector<PosteriorGrid>>& members);

EventTable decode_table(const std::vector<std::string>& names,
                        const std::vector<PosteriorGrid>& grids, const DecodeConfig& config,
                        const std::vector<std::string>& labels);

struct SweepRow {
  std::string system;
  std::vector<double> macro_f;  // one per window
};

// Decodes every system once per window and scores against `reference`.
std::vector<SweepRow> sweep_median(
    const std::vector<std::pair<std::string, std::vector<PosteriorGrid>>>& systems,
    const std::vector<std::string>& names, const EventTable& reference,
    const std::vector<std::size_t>& windows, const DecodeConfig& decode,
    const MatchConfig& match, const std::vector<std::string>& labels);

std::string format_sweep(const std::vector<std::size_t>& windows,
                         const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<std::size_t>& windows,
                      const std::vector<SweepRow>& rows);

}  // namespace sedlab

#endif  // SEDLAB_PIPELINE_H_

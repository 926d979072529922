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

#include "sedlab/pipeline.h"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sedlab/features.h"
#include "sedlab/params.h"
#include "sedlab/wav.h"

namespace sedlab {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&,
                                  const fs::path&)>;

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() ? p : base / p;
}

const std::map<std::string, Setter>& setters() {
  using K = const std::string&;
  using B = const fs::path&;
  static const std::map<std::string, Setter> table = {
      {"run.seed", [](RunConfig& c, K k, K v, B) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"paths.data", [](RunConfig& c, K, K v, B b) { c.data_dir = resolve(b, v); }},
      {"paths.features", [](RunConfig& c, K, K v, B b) { c.features_dir = resolve(b, v); }},
      {"paths.checkpoints", [](RunConfig& c, K, K v, B b) { c.checkpoints_dir = resolve(b, v); }},
      {"paths.outputs", [](RunConfig& c, K, K v, B b) { c.outputs_dir = resolve(b, v); }},
      {"data.n_weak", [](RunConfig& c, K k, K v, B) { c.counts.weak = parse_number<std::size_t>(k, v); }},
      {"data.n_strong", [](RunConfig& c, K k, K v, B) { c.counts.strong = parse_number<std::size_t>(k, v); }},
      {"data.n_unlabeled", [](RunConfig& c, K k, K v, B) { c.counts.unlabeled = parse_number<std::size_t>(k, v); }},
      {"data.n_test", [](RunConfig& c, K k, K v, B) { c.counts.test = parse_number<std::size_t>(k, v); }},
      {"model.conv_filters", [](RunConfig& c, K k, K v, B) { c.model.conv_filters = parse_numbers<std::size_t>(k, v); }},
      {"model.time_pooling", [](RunConfig& c, K k, K v, B) {
         const auto f = parse_numbers<std::size_t>(k, v);
         c.model.poolings.resize(f.size(), {1, 1});
         for (std::size_t i = 0; i < f.size(); ++i) c.model.poolings[i].first = f[i];
       }},
      {"model.freq_pooling", [](RunConfig& c, K k, K v, B) {
         const auto f = parse_numbers<std::size_t>(k, v);
         c.model.poolings.resize(f.size(), {1, 1});
         for (std::size_t i = 0; i < f.size(); ++i) c.model.poolings[i].second = f[i];
       }},
      {"model.gru_units", [](RunConfig& c, K k, K v, B) { c.model.gru_units = parse_number<std::size_t>(k, v); }},
      {"model.gru_layers", [](RunConfig& c, K k, K v, B) { c.model.gru_layers = parse_number<std::size_t>(k, v); }},
      {"train.method", [](RunConfig& c, K k, K v, B) {
         try {
           c.trainer.method = parse_method(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError("config key '" + k + "': " + e.what());
         }
       }},
      {"train.w_max", [](RunConfig& c, K k, K v, B) { c.trainer.w_max = parse_number<double>(k, v); }},
      {"train.ramp_steps", [](RunConfig& c, K k, K v, B) { c.trainer.ramp_steps = parse_number<std::size_t>(k, v); }},
      {"train.ema_decay", [](RunConfig& c, K k, K v, B) { c.trainer.ema_decay = parse_number<double>(k, v); }},
      {"train.mixup_alpha", [](RunConfig& c, K k, K v, B) { c.trainer.mixup_alpha = parse_number<double>(k, v); }},
      {"train.augment_copies", [](RunConfig& c, K k, K v, B) { c.trainer.augment_copies = parse_number<std::size_t>(k, v); }},
      {"train.sharpen_temperature", [](RunConfig& c, K k, K v, B) { c.trainer.sharpen_temperature = parse_number<double>(k, v); }},
      {"train.noise_sigma", [](RunConfig& c, K k, K v, B) { c.trainer.noise_sigma = parse_number<double>(k, v); }},
      {"train.batch_weak", [](RunConfig& c, K k, K v, B) { c.trainer.n_weak = parse_number<std::size_t>(k, v); }},
      {"train.batch_strong", [](RunConfig& c, K k, K v, B) { c.trainer.n_strong = parse_number<std::size_t>(k, v); }},
      {"train.batch_unlabeled", [](RunConfig& c, K k, K v, B) { c.trainer.n_unlabeled = parse_number<std::size_t>(k, v); }},
      {"train.epochs", [](RunConfig& c, K k, K v, B) { c.trainer.epochs = parse_number<std::size_t>(k, v); }},
      {"train.checkpoint_every", [](RunConfig& c, K k, K v, B) { c.trainer.checkpoint_every = parse_number<std::size_t>(k, v); }},
      {"train.learning_rate", [](RunConfig& c, K k, K v, B) { c.trainer.adam.learning_rate = parse_number<double>(k, v); }},
      {"decode.frame_threshold", [](RunConfig& c, K k, K v, B) { c.decode.frame_threshold = parse_number<double>(k, v); }},
      {"decode.clip_threshold", [](RunConfig& c, K k, K v, B) { c.decode.clip_threshold = parse_number<double>(k, v); }},
      {"decode.median_window", [](RunConfig& c, K k, K v, B) { c.decode.median_window = parse_number<std::size_t>(k, v); }},
      {"eval.onset_collar", [](RunConfig& c, K k, K v, B) { c.match.onset_collar = parse_number<double>(k, v); }},
      {"eval.offset_collar", [](RunConfig& c, K k, K v, B) { c.match.offset_collar_abs = parse_number<double>(k, v); }},
      {"eval.offset_collar_ratio", [](RunConfig& c, K k, K v, B) { c.match.offset_collar_ratio = parse_number<double>(k, v); }},
      {"eval.reference", [](RunConfig& c, K, K v, B b) { c.eval_reference = resolve(b, v); }},
      {"eval.predictions", [](RunConfig& c, K, K v, B b) { c.eval_predictions = resolve(b, v); }},
      {"predict.checkpoint", [](RunConfig& c, K, K v, B b) { c.predict_checkpoint = resolve(b, v); }},
      {"predict.split", [](RunConfig& c, K, K v, B) { c.predict_split = v; }},
      {"sweep.windows", [](RunConfig& c, K k, K v, B) { c.sweep_windows = parse_numbers<std::size_t>(k, v); }},
      {"sweep.checkpoints", [](RunConfig& c, K, K v, B b) {
         c.sweep_checkpoints.clear();
         for (const auto& p : split_list(v)) c.sweep_checkpoints.push_back(resolve(b, p));
       }},
      {"ensemble.members", [](RunConfig& c, K, K v, B b) {
         c.ensemble_members.clear();
         for (const auto& p : split_list(v)) c.ensemble_members.push_back(resolve(b, p));
       }},
      {"ensemble.methods", [](RunConfig& c, K k, K v, B) {
         c.ensemble_methods.clear();
         for (const auto& m : split_list(v)) {
           try {
             c.ensemble_methods.push_back(parse_method(m));
           } catch (const std::invalid_argument& e) {
             throw ConfigError("config key '" + k + "': " + e.what());
           }
         }
       }},
      {"ensemble.w_max", [](RunConfig& c, K k, K v, B) { c.ensemble_w_max = parse_numbers<double>(k, v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir) {
  RunConfig config;
  config.data_dir = base_dir / "data";
  config.features_dir = base_dir / "features";
  config.checkpoints_dir = base_dir / "checkpoints";
  config.outputs_dir = base_dir / "outputs";

  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigBase().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  std::map<std::string, int> seen;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    if (seen[key]++) throw ConfigError("config key '" + key + "' given twice");
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    it->second(config, key, value, base_dir);
  }
  config.trainer.seed = config.seed;
  try {
    config.model.validate();
    config.trainer.validate();
    config.decode.validate();
    config.match.validate();
    DecodeConfig probe = config.decode;
    for (auto w : config.sweep_windows) {
      probe.median_window = w;
      probe.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  if (config.ensemble_methods.empty()) throw ConfigError("ensemble.methods is empty");
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_run_config(in, fs::absolute(path).parent_path());
}

std::string run_name(Method method, double w_max) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_w%g", method_name(method).c_str(), w_max);
  return buf;
}

fs::path default_checkpoint(const RunConfig& config, Method method, double w_max) {
  return config.checkpoints_dir / run_name(method, w_max) / "teacher.hpsed";
}

std::vector<std::string> split_clips(const fs::path& data_dir, const std::string& split) {
  const fs::path dir = data_dir / split;
  if (!fs::is_directory(dir)) throw std::runtime_error("missing split directory " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

fs::path feature_path(const fs::path& features_dir, const std::string& split,
                      const std::string& clip) {
  return features_dir / split / (fs::path(clip).stem().string() + ".feat");
}

std::vector<std::string> featurize_split(const fs::path& data_dir, const fs::path& features_dir,
                                         const std::string& split) {
  const auto names = split_clips(data_dir, split);
  fs::create_directories(features_dir / split);
  for (const auto& name : names) {
    write_features(log_mel(read_wav(data_dir / split / name)),
                   feature_path(features_dir, split, name));
  }
  return names;
}

FeatureSplit load_features(const fs::path& features_dir, const std::string& split,
                           const std::vector<std::string>& names) {
  FeatureSplit out;
  out.names = names;
  out.mels.reserve(names.size());
  for (const auto& name : names) {
    Grid g = read_features(feature_path(features_dir, split, name));
    if (g.rows != kNumMels || g.cols != kNumFrames) {
      throw std::runtime_error("feature file for " + name + " is " + std::to_string(g.rows) +
                               "x" + std::to_string(g.cols));
    }
    out.mels.push_back(std::move(g.values));
  }
  return out;
}

TrainingData load_training_data(const fs::path& data_dir, const fs::path& features_dir,
                                const ModelConfig& model,
                                const std::vector<std::string>& labels) {
  if (labels.size() != model.n_classes) {
    throw std::invalid_argument("model has " + std::to_string(model.n_classes) +
                                " classes but " + std::to_string(labels.size()) +
                                " labels were given");
  }
  TrainingData data;
  const auto weak_labels = read_weak_tsv(data_dir / "weak.tsv");
  auto weak = load_features(features_dir, "weak", split_clips(data_dir, "weak"));
  for (std::size_t i = 0; i < weak.names.size(); ++i) {
    const auto it = weak_labels.find(weak.names[i]);
    if (it == weak_labels.end()) throw std::runtime_error("no weak label for " + weak.names[i]);
    data.weak_y.push_back(weak_targets(it->second, labels));
  }
  data.weak_x = std::move(weak.mels);

  const auto strong_labels = read_event_tsv(data_dir / "strong.tsv");
  auto strong = load_features(features_dir, "strong", split_clips(data_dir, "strong"));
  for (const auto& name : strong.names) {
    const auto it = strong_labels.find(name);
    static const EventList kNone;
    data.strong_y.push_back(strong_targets(it == strong_labels.end() ? kNone : it->second,
                                           labels, model.n_frames, model.time_pool_factor()));
  }
  data.strong_x = std::move(strong.mels);

  data.unlabeled_x =
      load_features(features_dir, "unlabeled", split_clips(data_dir, "unlabeled")).mels;
  return data;
}

Crnn<float> load_model(const ModelConfig& model, const fs::path& checkpoint) {
  if (!fs::is_regular_file(checkpoint)) {
    throw CheckpointError("checkpoint not found: " + checkpoint.string());
  }
  Crnn<float> net(model, 0, false);
  load_checkpoint(net.params(), checkpoint);
  return net;
}

std::vector<PosteriorGrid> predict_posteriors(Crnn<float>& model,
                                              const std::vector<std::vector<float>>& mels,
                                              std::size_t batch_size) {
  const auto& mc = model.config();
  const std::size_t frames = mc.output_frames(), classes = mc.n_classes;
  std::vector<PosteriorGrid> out;
  out.reserve(mels.size());
  NoGradGuard guard;
  for (std::size_t start = 0; start < mels.size(); start += batch_size) {
    std::vector<const std::vector<float>*> items;
    for (std::size_t i = start; i < std::min(mels.size(), start + batch_size); ++i)
      items.push_back(&mels[i]);
    const auto result =
        model.forward(stack_features<float>(items, mc.n_mels, mc.n_frames), NormMode::kInference);
    for (std::size_t b = 0; b < items.size(); ++b) {
      PosteriorGrid g{frames, classes, {}, {}};
      const auto fp = result.frame_probs.values().subspan(b * frames * classes, frames * classes);
      const auto cp = result.clip_probs.values().subspan(b * classes, classes);
      g.frame_probs.assign(fp.begin(), fp.end());
      g.clip_probs.assign(cp.begin(), cp.end());
      out.push_back(std::move(g));
    }
  }
  return out;
}

PosteriorGrid ensemble_average(const std::vector<PosteriorGrid>& members) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  const PosteriorGrid& first = members.front();
  for (const auto& m : members) {
    if (m.frames != first.frames || m.classes != first.classes ||
        m.frame_probs.size() != first.frame_probs.size() ||
        m.clip_probs.size() != first.clip_probs.size()) {
      throw std::invalid_argument("ensemble members have different posterior shapes");
    }
  }
  // Mean as first + mean offset: exact when all members agree, clamped to
  // the member range against rounding.
  auto average = [&](auto field) {
    std::vector<double> out((first.*field).size());
    const double n = static_cast<double>(members.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double base = (first.*field)[i];
      double lo = base, hi = base, offset = 0.0;
      for (const auto& m : members) {
        const double v = (m.*field)[i];
        offset += v - base;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out[i] = std::clamp(base + offset / n, lo, hi);
    }
    return out;
  };
  PosteriorGrid out{first.frames, first.classes, average(&PosteriorGrid::frame_probs),
                    average(&PosteriorGrid::clip_probs)};
  return out;
}

std::vector<PosteriorGrid> ensemble_average(
    const std::vector<std::vector<PosteriorGrid>>& members) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  std::vector<PosteriorGrid> out;
  for (std::size_t clip = 0; clip < members.front().size(); ++clip) {
    std::vector<PosteriorGrid> per_clip;
    for (const auto& m : members) {
      if (m.size() != members.front().size()) {
        throw std::invalid_argument("ensemble members cover different clip counts");
      }
      per_clip.push_back(m[clip]);
    }
    out.push_back(ensemble_average(per_clip));
  }
  return out;
}

EventTable decode_table(const std::vector<std::string>& names,
                        const std::vector<PosteriorGrid>& grids, const DecodeConfig& config,
                        const std::vector<std::string>& labels) {
  if (names.size() != grids.size()) {
    throw std::invalid_argument("clip names and posterior grids differ in count");
  }
  EventTable table;
  for (std::size_t i = 0; i < names.size(); ++i)
    table[names[i]] = decode(grids[i], config, labels);
  return table;
}

std::vector<SweepRow> sweep_median(
    const std::vector<std::pair<std::string, std::vector<PosteriorGrid>>>& systems,
    const std::vector<std::string>& names, const EventTable& reference,
    const std::vector<std::size_t>& windows, const DecodeConfig& decode,
    const MatchConfig& match, const std::vector<std::string>& labels) {
  if (reference.empty()) throw std::invalid_argument("sweep needs reference labels");
  std::vector<SweepRow> rows;
  for (const auto& [system, grids] : systems) {
    SweepRow row{system, {}};
    for (auto w : windows) {
      DecodeConfig c = decode;
      c.median_window = w;
      row.macro_f.push_back(
          evaluate(reference, decode_table(names, grids, c, labels), match, labels).macro_f);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_sweep(const std::vector<std::size_t>& windows,
                         const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  char cell[64];
  std::snprintf(cell, sizeof(cell), "%-28s", "Median window size");
  os << cell;
  for (auto w : windows) {
    std::snprintf(cell, sizeof(cell), " %7zu", w);
    os << cell;
  }
  os << '\n';
  for (const auto& row : rows) {
    std::snprintf(cell, sizeof(cell), "%-28s", row.system.c_str());
    os << cell;
    for (double f : row.macro_f) {
      std::snprintf(cell, sizeof(cell), " %6.1f%%", 100.0 * f);
      os << cell;
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_csv(const std::vector<std::size_t>& windows,
                      const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "system";
  for (auto w : windows) os << ",w" << w;
  os << '\n';
  char cell[32];
  for (const auto& row : rows) {
    os << row.system;
    for (double f : row.macro_f) {
      std::snprintf(cell, sizeof(cell), ",%.6f", f);
      os << cell;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace sedlab

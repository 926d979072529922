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

// sedlab command-line tool.
//
//   sedlab <synth|featurize|train|predict|eval|sweep|ensemble-predict>
//          --config PATH [--seed N] [--out DIR]
//
// Exit status: 0 success, 2 configuration or usage error, 3 missing or
// unreadable input, 4 checkpoint does not fit the model, 1 anything else.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sedlab/pipeline.h"
#include "sedlab/tensor.h"

namespace fs = std::filesystem;
using namespace sedlab;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load(const Options& o) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.trainer.seed = *o.seed;
  }
  return c;
}

fs::path out_or(const Options& o, const fs::path& fallback) {
  return o.out.empty() ? fallback : fs::path(o.out);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw InputError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw InputError(std::string(what) + " not found: " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os || !(os << text)) throw std::runtime_error("cannot write " + p.string());
}

const char* kSplits[] = {"weak", "strong", "unlabeled", "test"};

int cmd_synth(const Options& o) {
  const RunConfig c = load(o);
  const fs::path out = out_or(o, c.data_dir);
  generate_dataset(c.counts, c.seed, out);
  std::printf("wrote %zu weak, %zu strong, %zu unlabeled, %zu test clips to %s\n", c.counts.weak,
              c.counts.strong, c.counts.unlabeled, c.counts.test, out.string().c_str());
  return 0;
}

int cmd_featurize(const Options& o) {
  const RunConfig c = load(o);
  require_dir(c.data_dir, "data directory");
  const fs::path out = out_or(o, c.features_dir);
  for (const char* split : kSplits) {
    if (!fs::is_directory(c.data_dir / split)) continue;
    const auto names = featurize_split(c.data_dir, out, split);
    std::printf("%-10s %zu clips\n", split, names.size());
  }
  return 0;
}

std::vector<std::string> labels_for(const RunConfig& c) {
  auto labels = class_labels();
  if (labels.size() != c.model.n_classes) {
    throw ConfigError("model has " + std::to_string(c.model.n_classes) + " classes, dataset " +
                      std::to_string(labels.size()));
  }
  return labels;
}

int cmd_train(const Options& o) {
  const RunConfig c = load(o);
  require_dir(c.data_dir, "data directory");
  require_dir(c.features_dir, "feature directory");
  const auto labels = labels_for(c);
  TrainingData data;
  try {
    data = load_training_data(c.data_dir, c.features_dir, c.model, labels);
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
  const fs::path out = out_or(o, c.checkpoints_dir / run_name(c.trainer.method, c.trainer.w_max));
  const auto start = std::chrono::steady_clock::now();
  std::size_t logged = 0;
  const auto result = train_model(
      c.model, c.trainer, data, out, [&](std::size_t epoch, SslTrainer& t) {
        (void)t;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "epoch %zu done (%zu steps, %.0f s)\n", epoch, t.steps_done(), secs);
        logged = t.steps_done();
      });
  const auto& last = result.log.back();
  std::printf("trained %s (w_max=%g) for %zu steps; final loss %s\n",
              method_name(c.trainer.method).c_str(), c.trainer.w_max, logged,
              loss_csv_row(logged, last).c_str());
  std::printf("teacher checkpoint: %s\n", result.teacher_path.string().c_str());
  return 0;
}

// Posterior grids of one split under one checkpoint.
std::vector<PosteriorGrid> posteriors(const RunConfig& c, const fs::path& checkpoint,
                                      const FeatureSplit& split) {
  Crnn<float> model = load_model(c.model, checkpoint);
  return predict_posteriors(model, split.mels);
}

FeatureSplit load_split(const RunConfig& c, const std::string& split) {
  require_dir(c.data_dir / split, "split directory");
  try {
    return load_features(c.features_dir, split, split_clips(c.data_dir, split));
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
}

int cmd_predict(const Options& o) {
  const RunConfig c = load(o);
  const auto labels = labels_for(c);
  const fs::path ckpt = c.predict_checkpoint.empty()
                            ? default_checkpoint(c, c.trainer.method, c.trainer.w_max)
                            : c.predict_checkpoint;
  const FeatureSplit split = load_split(c, c.predict_split);
  const auto grids = posteriors(c, ckpt, split);
  const auto table = decode_table(split.names, grids, c.decode, labels);
  const fs::path out = out_or(o, c.outputs_dir);
  fs::create_directories(out);
  write_event_tsv(table, out / "predictions.tsv");
  std::printf("wrote %s\n", (out / "predictions.tsv").string().c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig c = load(o);
  const fs::path ref = c.eval_reference.empty() ? c.data_dir / "test.tsv" : c.eval_reference;
  const fs::path pred =
      c.eval_predictions.empty() ? c.outputs_dir / "predictions.tsv" : c.eval_predictions;
  require_file(ref, "reference file");
  require_file(pred, "prediction file");
  const EventTable reference = read_event_tsv(ref);
  const EventTable predicted = read_event_tsv(pred);
  const EvalReport report = evaluate(reference, predicted, c.match, labels_for(c));
  const fs::path out = out_or(o, c.outputs_dir);
  fs::create_directories(out);
  write_text(out / "report.txt", format_report(report));
  write_text(out / "report.csv", report_csv(report));
  std::cout << format_report(report);
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig c = load(o);
  const auto labels = labels_for(c);
  std::vector<fs::path> ckpts = c.sweep_checkpoints;
  if (ckpts.empty()) ckpts.push_back(default_checkpoint(c, c.trainer.method, c.trainer.w_max));
  for (const auto& p : ckpts) require_file(p, "checkpoint");
  const fs::path ref = c.eval_reference.empty() ? c.data_dir / "test.tsv" : c.eval_reference;
  require_file(ref, "reference file");
  const EventTable reference = read_event_tsv(ref);
  const FeatureSplit split = load_split(c, c.predict_split);
  std::vector<std::pair<std::string, std::vector<PosteriorGrid>>> systems;
  for (const auto& p : ckpts) {
    const std::string name = p.parent_path().filename().string() + "/" + p.filename().string();
    systems.emplace_back(name, posteriors(c, p, split));
  }
  const auto rows =
      sweep_median(systems, split.names, reference, c.sweep_windows, c.decode, c.match, labels);
  const fs::path out = out_or(o, c.outputs_dir);
  fs::create_directories(out);
  write_text(out / "sweep.txt", format_sweep(c.sweep_windows, rows));
  write_text(out / "sweep.csv", sweep_csv(c.sweep_windows, rows));
  std::cout << format_sweep(c.sweep_windows, rows);
  return 0;
}

int cmd_ensemble(const Options& o) {
  const RunConfig c = load(o);
  const auto labels = labels_for(c);
  std::vector<fs::path> members = c.ensemble_members;
  if (members.empty()) {
    for (auto m : c.ensemble_methods)
      for (double w : c.ensemble_w_max) members.push_back(default_checkpoint(c, m, w));
  }
  for (const auto& p : members) require_file(p, "ensemble member");
  const FeatureSplit split = load_split(c, c.predict_split);
  std::vector<std::vector<PosteriorGrid>> grids;
  for (const auto& p : members) grids.push_back(posteriors(c, p, split));
  const auto table = decode_table(split.names, ensemble_average(grids), c.decode, labels);
  const fs::path out = out_or(o, c.outputs_dir);
  fs::create_directories(out);
  write_event_tsv(table, out / "predictions.tsv");
  std::string list;
  for (const auto& p : members) list += p.string() + "\n";
  write_text(out / "ensemble_members.txt", list);
  std::printf("averaged %zu members; wrote %s\n", members.size(),
              (out / "predictions.tsv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Sound event detection with semi-supervised CRNN training"};
  app.require_subcommand(1);
  Options opts;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"synth", "Generate the synthetic corpus", cmd_synth},
      {"featurize", "Write log-mel feature files", cmd_featurize},
      {"train", "Train a model", cmd_train},
      {"predict", "Decode events for a split", cmd_predict},
      {"eval", "Score predictions against references", cmd_eval},
      {"sweep", "Score a range of median windows", cmd_sweep},
      {"ensemble-predict", "Decode the averaged posteriors of several models", cmd_ensemble},
  };
  int (*selected)(const Options&) = nullptr;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", opts.config, "Run configuration file")->required();
    sub->add_option("--seed", opts.seed, "Overrides run.seed");
    sub->add_option("--out", opts.out, "Output directory");
    sub->callback([&selected, run = cmd.run] { selected = run; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    return selected(opts);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 4;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

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

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sedlab/pipeline.h"

using namespace sedlab;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text, const fs::path& base = "/base") {
  std::istringstream in(text);
  return parse_run_config(in, base);
}

PosteriorGrid random_grid(std::mt19937_64& rng, std::size_t frames = 16, std::size_t classes = 3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PosteriorGrid g{frames, classes, std::vector<double>(frames * classes), std::vector<double>(classes)};
  for (auto& p : g.frame_probs) p = u(rng);
  for (auto& p : g.clip_probs) p = u(rng);
  return g;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SEDLAB_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("run configuration parsing") {
  const RunConfig c = parse(R"(# comment
[run]
seed = 42
[paths]
data = d
features = /abs/f
[data]
n_weak = 10
[model]
conv_filters = 4, 8, 16, 16, 16, 16, 16
gru_units = 32
[train]
method = mixmatch_variant
w_max = 2.5
ema_decay = 0.99
batch_unlabeled = 8
learning_rate = 0.002
[decode]
median_window = 7
[eval]
offset_collar_ratio = 0.3
[sweep]
windows = 1, 9
[ensemble]
methods = ict, mean_teacher
w_max = 0.5, 1
)");
  CHECK(c.seed == 42);
  CHECK(c.trainer.seed == 42);
  CHECK(c.data_dir == fs::path("/base/d"));
  CHECK(c.features_dir == fs::path("/abs/f"));
  CHECK(c.checkpoints_dir == fs::path("/base/checkpoints"));
  CHECK(c.counts.weak == 10);
  CHECK(c.counts.strong == 200);
  CHECK(c.model.conv_filters == std::vector<std::size_t>{4, 8, 16, 16, 16, 16, 16});
  CHECK(c.model.gru_units == 32);
  CHECK(c.trainer.method == Method::kMixMatch);
  CHECK(c.trainer.w_max == 2.5);
  CHECK(c.trainer.ema_decay == 0.99);
  CHECK(c.trainer.n_unlabeled == 8);
  CHECK(c.trainer.adam.learning_rate == 0.002);
  CHECK(c.decode.median_window == 7);
  CHECK(c.match.offset_collar_ratio == 0.3);
  CHECK(c.sweep_windows == std::vector<std::size_t>{1, 9});
  CHECK(c.ensemble_methods == std::vector<Method>{Method::kIct, Method::kMeanTeacher});
  CHECK(c.ensemble_w_max == std::vector<double>{0.5, 1.0});

  const RunConfig d = parse("");
  CHECK(d.model == ModelConfig{});
  CHECK(d.decode.median_window == 9);
  CHECK(d.sweep_windows == std::vector<std::size_t>{5, 7, 9, 11, 13});

  CHECK_THROWS_AS(parse("[train]\nlearning_rat = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 3\n"), ConfigError);  // must live in [run]
  CHECK_THROWS_AS(parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseed = one\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nmethod = fixmatch\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nw_max = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[decode]\nmedian_window = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[sweep]\nwindows = 5, 6\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nconv_filters = 16, 32\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nmethod = mixmatch_variant\naugment_copies = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("run naming") {
  CHECK(run_name(Method::kIct, 0.5) == "ict_w0.5");
  CHECK(run_name(Method::kMeanTeacher, 0.0) == "mean_teacher_w0");
  const RunConfig c = parse("[paths]\ncheckpoints = ck\n");
  CHECK(default_checkpoint(c, Method::kMixMatch, 2.0) ==
        fs::path("/base/ck/mixmatch_variant_w2/teacher.hpsed"));
}

TEST_CASE("ensemble averaging") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_grid(rng);
    for (std::size_t n : {1, 2, 3, 9}) CHECK(ensemble_average(std::vector<PosteriorGrid>(n, g)) == g);
  }

  PosteriorGrid a{1, 1, {0.2}, {0.2}}, b{1, 1, {0.6}, {0.6}};
  const auto m = ensemble_average({a, b});
  CHECK(m.frame_probs[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(m.clip_probs[0] == doctest::Approx(0.4).epsilon(1e-15));

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PosteriorGrid> members;
    for (int k = 0; k < 1 + trial % 9; ++k) members.push_back(random_grid(rng));
    const auto avg = ensemble_average(members);
    for (std::size_t i = 0; i < avg.frame_probs.size(); ++i) {
      double lo = 1.0, hi = 0.0, sum = 0.0;
      for (const auto& g : members) {
        lo = std::min(lo, g.frame_probs[i]);
        hi = std::max(hi, g.frame_probs[i]);
        sum += g.frame_probs[i];
      }
      CHECK(avg.frame_probs[i] >= lo);
      CHECK(avg.frame_probs[i] <= hi);
      CHECK(avg.frame_probs[i] == doctest::Approx(sum / members.size()).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(ensemble_average(std::vector<PosteriorGrid>{}), std::invalid_argument);
  CHECK_THROWS_AS(ensemble_average({random_grid(rng, 16, 3), random_grid(rng, 8, 3)}),
                  std::invalid_argument);
  const std::vector<std::vector<PosteriorGrid>> uneven{{random_grid(rng)},
                                                       {random_grid(rng), random_grid(rng)}};
  CHECK_THROWS_AS(ensemble_average(uneven), std::invalid_argument);
}

TEST_CASE("median window sweep table") {
  std::mt19937_64 rng(2);
  const std::vector<std::string> labels{"x", "y", "z"};
  const std::vector<std::string> names{"a.wav", "b.wav"};
  std::vector<PosteriorGrid> grids{random_grid(rng, 256), random_grid(rng, 256)};
  const EventTable ref{{"a.wav", {{"x", 0.5, 2.0}}}, {"b.wav", {{"z", 1.0, 4.0}}}};
  const std::vector<std::size_t> windows{5, 7, 9, 11, 13};
  const auto rows = sweep_median({{"sys", grids}, {"other", grids}}, names, ref, windows, {}, {},
                                 labels);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].macro_f.size() == 5);
  CHECK(rows[0].macro_f == rows[1].macro_f);
  const auto one = sweep_median({{"sys", grids}}, names, ref, {9}, {}, {}, labels);
  CHECK(one[0].macro_f.size() == 1);
  CHECK(one[0].macro_f[0] == rows[0].macro_f[2]);

  const std::string table = format_sweep(windows, rows);
  CHECK(table.rfind("Median window size", 0) == 0);
  CHECK(table.find("sys") != std::string::npos);
  const std::string csv = sweep_csv(windows, rows);
  CHECK(csv.rfind("system,w5,w7,w9,w11,w13\n", 0) == 0);

  CHECK_THROWS_AS(sweep_median({{"sys", grids}}, names, {}, windows, {}, {}, labels),
                  std::invalid_argument);
  CHECK_THROWS_AS(decode_table({"a.wav"}, grids, {}, labels), std::invalid_argument);
}

TEST_CASE("command line pipeline and exit codes") {
  const fs::path dir = fs::temp_directory_path() / "sedlab_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  {
    std::ofstream cfg(dir / "tiny.ini");
    cfg << "[run]\nseed = 3\n[paths]\ndata = data\nfeatures = features\n"
           "checkpoints = ckpt\noutputs = out\n"
           "[data]\nn_weak = 2\nn_strong = 2\nn_unlabeled = 2\nn_test = 2\n"
           "[model]\nconv_filters = 2, 2, 2, 2, 2, 2, 2\ngru_units = 4\n"
           "[train]\nmethod = ict\nepochs = 1\nbatch_weak = 2\nbatch_strong = 2\n"
           "batch_unlabeled = 2\n";
    std::ofstream bad(dir / "bad.ini");
    bad << "[train]\nwmax = 1\n";
  }
  const std::string cfg = "--config " + (dir / "tiny.ini").string();

  CHECK(run_cli("", log) == 2);
  CHECK(run_cli("train", log) == 2);
  CHECK(run_cli("frobnicate --config x", log) == 2);
  CHECK(run_cli("train --config " + (dir / "bad.ini").string(), log) == 2);
  CHECK(slurp(log).find("wmax") != std::string::npos);
  CHECK(run_cli("train --config " + (dir / "missing.ini").string(), log) == 2);
  CHECK(run_cli("featurize " + cfg, log) == 3);  // no data yet
  CHECK(!fs::exists(dir / "features"));

  REQUIRE(run_cli("synth " + cfg, log) == 0);
  CHECK(fs::exists(dir / "data" / "test.tsv"));
  REQUIRE(run_cli("featurize " + cfg, log) == 0);
  CHECK(fs::exists(dir / "features" / "weak" / "weak_0000.feat"));
  CHECK(run_cli("predict " + cfg, log) == 4);  // nothing trained
  REQUIRE(run_cli("train " + cfg, log) == 0);
  CHECK(fs::exists(dir / "ckpt" / "ict_w1" / "teacher.hpsed"));
  CHECK(fs::exists(dir / "ckpt" / "ict_w1" / "train_log.csv"));
  REQUIRE(run_cli("predict " + cfg, log) == 0);
  CHECK(fs::exists(dir / "out" / "predictions.tsv"));
  REQUIRE(run_cli("eval " + cfg, log) == 0);
  CHECK(fs::exists(dir / "out" / "report.csv"));
  REQUIRE(run_cli("sweep " + cfg, log) == 0);
  CHECK(fs::exists(dir / "out" / "sweep.csv"));

  // Scoring the references against themselves gives 100 %.
  {
    std::ofstream self(dir / "self.ini");
    self << slurp(dir / "tiny.ini") << "[eval]\npredictions = data/test.tsv\n";
  }
  REQUIRE(run_cli("eval --config " + (dir / "self.ini").string() + " --out " +
                      (dir / "self").string(),
                  log) == 0);
  CHECK(slurp(log).find("macro F(%) = 100.00") != std::string::npos);

  // A single-member ensemble is the plain prediction.
  {
    std::ofstream ens(dir / "ens.ini");
    ens << slurp(dir / "tiny.ini") << "[ensemble]\nmembers = ckpt/ict_w1/teacher.hpsed\n";
  }
  REQUIRE(run_cli("ensemble-predict --config " + (dir / "ens.ini").string() + " --out " +
                      (dir / "ens").string(),
                  log) == 0);
  CHECK(slurp(dir / "ens" / "predictions.tsv") == slurp(dir / "out" / "predictions.tsv"));

  // Checkpoint of another architecture.
  {
    std::ofstream wide(dir / "wide.ini");
    std::string text = slurp(dir / "tiny.ini");
    text.replace(text.find("gru_units = 4"), 13, "gru_units = 8");
    wide << text << "[predict]\ncheckpoint = ckpt/ict_w1/teacher.hpsed\n";
  }
  CHECK(run_cli("predict --config " + (dir / "wide.ini").string(), log) == 4);
  fs::remove_all(dir);
}

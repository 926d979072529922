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

#include <filesystem>
#include <fstream>
#include <random>

#include "sedlab/ops.h"
#include "sedlab/params.h"
#include "support.h"

using namespace sedlab;
using sedlab::testing::random_tensor;

TEST_CASE("primitive forward values") {
  CHECK(sigmoid(Tensord::scalar(0.0)).item() == 0.5);
  CHECK(tanh(Tensord::scalar(0.0)).item() == 0.0);

  SUBCASE("centre-one kernel is the identity convolution") {
    std::mt19937_64 rng(1);
    const Tensord x = random_tensor({2, 3, 5, 4}, rng, -1, 1, false);
    std::vector<double> w(3 * 3 * 9, 0.0);
    for (std::size_t c = 0; c < 3; ++c) w[(c * 3 + c) * 9 + 4] = 1.0;
    const Tensord y = conv2d(x, Tensord::from({3, 3, 3, 3}, w), Tensord());
    CHECK(std::equal(y.values().begin(), y.values().end(), x.values().begin()));
  }
  SUBCASE("max pool routes the gradient to the maximum") {
    const Tensord x = Tensord::from({1, 1, 2, 2}, {1, 2, 3, 4}, true);
    const Tensord y = max_pool2d(x, 2, 2);
    CHECK(y.item() == 4.0);
    backward(sum(y));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) ==
          std::vector<double>{0, 0, 0, 1});
  }
  SUBCASE("softmax rows sum to one") {
    std::mt19937_64 rng(2);
    const Tensord s = softmax(random_tensor({3, 4}, rng, -3, 3, false), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 4; ++c) total += s.at(r * 4 + c);
      CHECK(total == doctest::Approx(1.0));
    }
  }
  SUBCASE("matmul") {
    const Tensord a = Tensord::from({2, 2}, {1, 2, 3, 4});
    const Tensord b = Tensord::from({2, 1}, {5, 6});
    const Tensord c = matmul(a, b);
    CHECK(c.at(0) == 17.0);
    CHECK(c.at(1) == 39.0);
  }
  SUBCASE("concat, slice, permute") {
    const Tensord a = Tensord::from({2, 2}, {1, 2, 3, 4});
    const Tensord b = Tensord::from({2, 1}, {5, 6});
    const Tensord c = concat<double>({a, b}, 1);
    CHECK(std::vector<double>(c.values().begin(), c.values().end()) ==
          std::vector<double>{1, 2, 5, 3, 4, 6});
    const Tensord s = slice(c, 1, 1, 2);
    CHECK(std::vector<double>(s.values().begin(), s.values().end()) ==
          std::vector<double>{2, 5, 4, 6});
    const Tensord p = permute(a, {1, 0});
    CHECK(std::vector<double>(p.values().begin(), p.values().end()) ==
          std::vector<double>{1, 3, 2, 4});
  }
}

TEST_CASE("shape errors name both shapes") {
  const Tensord a = Tensord::zeros({2, 3});
  const Tensord b = Tensord::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  try {
    (void)mul(a, b);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2, 3)") != std::string::npos);
    CHECK(msg.find("(3, 2)") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(concat<double>({a, b}, 0), ShapeError);
}

TEST_CASE("backward") {
  SUBCASE("x*x at 3") {
    const Tensord x = Tensord::scalar(3.0, true);
    backward(mul(x, x));
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("sigmoid slope at 0") {
    const Tensord x = Tensord::scalar(0.0, true);
    backward(sigmoid(x));
    CHECK(x.grad()[0] == 0.25);
  }
  SUBCASE("two consumers sum their gradients") {
    const Tensord x = Tensord::scalar(2.0, true);
    const Tensord y = add(mul(x, x), affine(x, 3.0, 0.0));
    backward(y);
    CHECK(x.grad()[0] == 7.0);
  }
  SUBCASE("non-scalar loss") {
    const Tensord x = Tensord::zeros({2}, true);
    CHECK_THROWS_AS(backward(x), std::invalid_argument);
  }
  SUBCASE("leaf gradients accumulate until zero_grad") {
    Tensord x = Tensord::scalar(1.0, true);
    backward(affine(x, 2.0, 0.0));
    backward(affine(x, 2.0, 0.0));
    CHECK(x.grad()[0] == 4.0);
    x.zero_grad();
    CHECK(x.grad().empty());
  }
  SUBCASE("forward values do not depend on gradient recording") {
    std::mt19937_64 rng(4);
    const Tensord a = random_tensor({3, 4}, rng);
    const Tensord b = random_tensor({4, 2}, rng);
    const Tensord with = softmax(tanh(matmul(a, b)), 0);
    Tensord without;
    {
      NoGradGuard g;
      without = softmax(tanh(matmul(a, b)), 0);
    }
    CHECK(std::equal(with.values().begin(), with.values().end(), without.values().begin()));
    CHECK(without.is_leaf());
  }
}

TEST_CASE("adam") {
  auto make = [] {
    ParameterSet<float> p;
    p.add("w", Tensorf::from({3}, {0.5f, -1.0f, 2.0f}, true));
    return p;
  };
  SUBCASE("zero gradients leave parameters unchanged") {
    auto p = make();
    Adam opt;
    for (int i = 0; i < 5; ++i) {
      p.get("w").node()->ensure_grad();
      opt.step(p);
      p.zero_grad();
    }
    CHECK(std::vector<float>(p.get("w").values().begin(), p.get("w").values().end()) ==
          std::vector<float>{0.5f, -1.0f, 2.0f});
  }
  SUBCASE("first step moves by lr times the gradient sign") {
    auto p = make();
    p.get("w").node()->ensure_grad() = {0.3f, -7.0f, 1e-3f};
    Adam opt;
    opt.step(p);
    const auto v = p.get("w").values();
    CHECK(v[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-5));
    CHECK(v[1] == doctest::Approx(-1.0 + 1e-3).epsilon(1e-5));
    CHECK(v[2] == doctest::Approx(2.0 - 1e-3).epsilon(1e-4));
  }
  SUBCASE("missing gradient names the parameter") {
    auto p = make();
    Adam opt;
    try {
      opt.step(p);
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
  }
  SUBCASE("deterministic") {
    auto run = [&] {
      auto p = make();
      Adam opt;
      for (int i = 0; i < 10; ++i) {
        p.get("w").node()->ensure_grad() = {float(i) * 0.1f, -0.2f, 0.7f};
        opt.step(p);
        p.zero_grad();
      }
      return std::vector<float>(p.get("w").values().begin(), p.get("w").values().end());
    };
    CHECK(run() == run());
  }
}

TEST_CASE("checkpoints") {
  const auto dir = std::filesystem::temp_directory_path() / "sedlab_ckpt_test";
  std::filesystem::create_directories(dir);
  ParameterSet<float> p;
  p.add("layer.weight", Tensorf::from({2, 3}, {1, 2, 3, 4, 5, 6}, true));
  p.add("layer.stats", Tensorf::from({2}, {0.5f, -0.5f}), false);
  save_checkpoint(p, dir / "a.hpsed");

  {
    std::ifstream is(dir / "a.hpsed", std::ios::binary);
    char magic[6];
    is.read(magic, 6);
    CHECK(std::string(magic, 6) == "HPSED1");
  }
  const auto entries = read_checkpoint(dir / "a.hpsed");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].name == "layer.weight");
  CHECK(entries[0].tensor.shape() == Shape{2, 3});

  ParameterSet<float> q;
  q.add("layer.weight", Tensorf::zeros({2, 3}, true));
  q.add("layer.stats", Tensorf::zeros({2}), false);
  load_checkpoint(q, dir / "a.hpsed");
  CHECK(q.get("layer.weight").at(5) == 6.0f);
  CHECK(q.get("layer.stats").at(1) == -0.5f);

  ParameterSet<float> wrong_shape;
  wrong_shape.add("layer.weight", Tensorf::zeros({3, 2}, true));
  wrong_shape.add("layer.stats", Tensorf::zeros({2}), false);
  CHECK_THROWS_AS(load_checkpoint(wrong_shape, dir / "a.hpsed"), CheckpointError);
  ParameterSet<float> wrong_name;
  wrong_name.add("other.weight", Tensorf::zeros({2, 3}, true));
  wrong_name.add("layer.stats", Tensorf::zeros({2}), false);
  CHECK_THROWS_AS(load_checkpoint(wrong_name, dir / "a.hpsed"), CheckpointError);
  ParameterSet<float> too_few;
  too_few.add("layer.weight", Tensorf::zeros({2, 3}, true));
  CHECK_THROWS_AS(load_checkpoint(too_few, dir / "a.hpsed"), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.hpsed"), CheckpointError);
  CHECK_THROWS_AS(p.add("layer.weight", Tensorf::zeros({1})), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

// Copyright 2026 The SeCoST Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "secost/adam.hpp"
#include "secost/nn.hpp"
#include "secost/reference.hpp"
#include "secost/rng.hpp"

using namespace secost;

namespace {

TensorPtr filled(std::vector<int> shape, float v) {
  auto t = make_tensor(std::move(shape));
  t->fill(v);
  return t;
}

TensorPtr random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  auto t = make_tensor(std::move(shape));
  for (auto& v : t->data) v = rng.uniform_f(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("conv2d: all-ones 4x4 input with one 3x3 ones filter, pad 1") {
  Conv2d conv(1, 1, 3, 3, 1, 1);
  conv.weight().fill(1.0f);
  conv.bias().fill(0.0f);
  auto out = conv.forward(filled({1, 1, 4, 4}, 1.0f), Mode::kEval, false);
  REQUIRE(out->shape == std::vector<int>({1, 1, 4, 4}));
  // Corners see a 2x2 neighborhood, edges 2x3, the interior 3x3.
  REQUIRE(out->at4(0, 0, 0, 0) == 4.0f);
  REQUIRE(out->at4(0, 0, 0, 3) == 4.0f);
  REQUIRE(out->at4(0, 0, 3, 0) == 4.0f);
  REQUIRE(out->at4(0, 0, 3, 3) == 4.0f);
  REQUIRE(out->at4(0, 0, 0, 1) == 6.0f);
  REQUIRE(out->at4(0, 0, 1, 0) == 6.0f);
  REQUIRE(out->at4(0, 0, 1, 1) == 9.0f);
  REQUIRE(out->at4(0, 0, 2, 2) == 9.0f);
}

TEST_CASE("conv2d: 1x1 identity kernel") {
  Conv2d conv(1, 1, 1, 1, 1, 0);
  conv.weight().fill(1.0f);
  conv.bias().fill(0.0f);
  Rng rng(2);
  auto x = random_tensor({2, 1, 5, 7}, rng);
  auto out = conv.forward(x, Mode::kEval, false);
  REQUIRE(out->data == x->data);
}

TEST_CASE("conv2d: B1 output size for a 1024x64 input") {
  Conv2d conv(1, 64, 3, 3, 1, 1);
  Rng rng(3);
  conv.init_kaiming_uniform(rng);
  auto x = random_tensor({1, 1, 1024, 64}, rng);
  auto out = conv.forward(x, Mode::kEval, false);
  REQUIRE(out->shape == std::vector<int>({1, 64, 1024, 64}));
}

TEST_CASE("conv2d: agrees with the naive double-precision oracle") {
  Rng rng(7);
  struct Geometry {
    int cin, cout, kh, kw, stride, pad, h, w;
  };
  const Geometry cases[] = {
      {1, 2, 3, 3, 1, 1, 6, 6}, {3, 4, 3, 3, 1, 1, 8, 5}, {2, 3, 3, 2, 1, 0, 7, 4},
      {4, 2, 1, 1, 1, 0, 5, 8}, {2, 2, 3, 3, 2, 1, 8, 8}, {3, 1, 2, 2, 2, 0, 6, 6},
      {2, 5, 3, 3, 1, 1, 64, 33},  // wide-row kernel path
  };
  for (const auto& g : cases) {
    Conv2d conv(g.cin, g.cout, g.kh, g.kw, g.stride, g.pad);
    conv.init_kaiming_uniform(rng);
    auto x = random_tensor({2, g.cin, g.h, g.w}, rng);
    auto out = conv.forward(x, Mode::kEval, false);

    refnn::DTensor ref = refnn::conv2d(refnn::DTensor(*x), refnn::DTensor(conv.weight()),
                                       refnn::DTensor(conv.bias()), g.stride, g.pad);
    REQUIRE(ref.shape == out->shape);
    for (size_t i = 0; i < ref.data.size(); ++i) {
      REQUIRE(std::abs(ref.data[i] - static_cast<double>(out->data[i])) < 1e-5);
    }
  }
}

TEST_CASE("conv2d: kernel must fit the padded input") {
  Conv2d conv(1, 1, 3, 3, 1, 0);
  REQUIRE_THROWS_MATCHES(conv.forward(filled({1, 1, 2, 2}, 1.0f), Mode::kEval, false), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kShapeMismatch;
                         }));
}

TEST_CASE("pool2d: worked 2x2 examples") {
  auto x = make_tensor({1, 1, 2, 2});
  x->data = {1.0f, 2.0f, 3.0f, 4.0f};
  Pool2d max_pool(PoolKind::kMax, 2, 2);
  REQUIRE(max_pool.forward(x, Mode::kEval, false)->data == std::vector<float>({4.0f}));
  Pool2d avg_pool(PoolKind::kAvg, 2, 2);
  REQUIRE(avg_pool.forward(x, Mode::kEval, false)->data == std::vector<float>({2.5f}));
}

TEST_CASE("pool2d: B1 pooling maps 1024x64 to 256x16") {
  Pool2d pool(PoolKind::kMax, 4, 4);
  Rng rng(5);
  auto x = random_tensor({1, 64, 1024, 64}, rng);
  auto out = pool.forward(x, Mode::kEval, false);
  REQUIRE(out->shape == std::vector<int>({1, 64, 256, 16}));
}

TEST_CASE("pool2d: ragged edges are truncated") {
  Pool2d pool(PoolKind::kMax, 2, 2);
  Rng rng(6);
  auto out = pool.forward(random_tensor({1, 1, 5, 5}, rng), Mode::kEval, false);
  REQUIRE(out->shape == std::vector<int>({1, 1, 2, 2}));
}

TEST_CASE("batchnorm: eval with unit running stats is the identity") {
  BatchNorm2d bn(3);
  Rng rng(8);
  auto x = random_tensor({2, 3, 4, 4}, rng);
  auto out = bn.forward(x, Mode::kEval, false);
  for (int64_t i = 0; i < x->numel(); ++i) {
    REQUIRE(out->data[static_cast<size_t>(i)] ==
            Catch::Approx(x->data[static_cast<size_t>(i)]).margin(1e-4));
  }
}

TEST_CASE("batchnorm: train mode normalizes a +-1 batch to unit variance") {
  BatchNorm2d bn(1);
  auto x = make_tensor({2, 1, 1, 1});
  x->data = {-1.0f, 1.0f};
  auto out = bn.forward(x, Mode::kTrain, false);
  REQUIRE(out->data[0] == Catch::Approx(-1.0).margin(1e-4));
  REQUIRE(out->data[1] == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("batchnorm: zero scale pins the output at the shift") {
  BatchNorm2d bn(2);
  bn.gamma().fill(0.0f);
  bn.beta().fill(5.0f);
  Rng rng(9);
  auto out = bn.forward(random_tensor({3, 2, 2, 2}, rng), Mode::kTrain, false);
  for (float v : out->data) REQUIRE(v == 5.0f);
}

TEST_CASE("batchnorm: running statistics update with momentum 0.1") {
  BatchNorm2d bn(1);
  auto x = make_tensor({2, 1, 1, 1});
  x->data = {0.0f, 2.0f};  // batch mean 1, biased var 1
  bn.forward(x, Mode::kTrain, false);
  REQUIRE(bn.running_mean().data[0] == Catch::Approx(0.9f * 0.0f + 0.1f * 1.0f));
  REQUIRE(bn.running_var().data[0] == Catch::Approx(0.9f * 1.0f + 0.1f * 1.0f));
}

TEST_CASE("batchnorm: eval mode is affine per channel") {
  BatchNorm2d bn(2);
  Rng rng(10);
  for (auto& v : bn.gamma().data) v = rng.uniform_f(0.5f, 1.5f);
  for (auto& v : bn.beta().data) v = rng.uniform_f(-1.0f, 1.0f);
  for (auto& v : bn.running_mean().data) v = rng.uniform_f(-1.0f, 1.0f);
  for (auto& v : bn.running_var().data) v = rng.uniform_f(0.5f, 2.0f);

  auto x = random_tensor({1, 2, 3, 3}, rng);
  auto y = random_tensor({1, 2, 3, 3}, rng);
  auto apply = [&](const TensorPtr& t) { return bn.forward(t, Mode::kEval, false); };
  auto fx = apply(x);
  auto fy = apply(y);

  // f(x) - f(y) must be linear in (x - y): f(x) - f(y) == gamma * istd * (x - y).
  auto sum = make_tensor(x->shape);
  for (int64_t i = 0; i < x->numel(); ++i) {
    sum->data[static_cast<size_t>(i)] =
        x->data[static_cast<size_t>(i)] + 0.5f * (y->data[static_cast<size_t>(i)] -
                                                  x->data[static_cast<size_t>(i)]);
  }
  auto fmid = apply(sum);
  for (int64_t i = 0; i < x->numel(); ++i) {
    const float expect = 0.5f * (fx->data[static_cast<size_t>(i)] +
                                 fy->data[static_cast<size_t>(i)]);
    REQUIRE(fmid->data[static_cast<size_t>(i)] == Catch::Approx(expect).margin(1e-4));
  }
}

TEST_CASE("activations: worked values") {
  ReLU relu;
  auto x = make_tensor({1, 1, 1, 2});
  x->data = {-2.0f, 3.0f};
  auto out = relu.forward(x, Mode::kEval, false);
  REQUIRE(out->data == std::vector<float>({0.0f, 3.0f}));

  Sigmoid sigmoid;
  auto z = make_tensor({1, 1, 1, 2});
  z->data = {0.0f, std::log(3.0f)};
  auto p = sigmoid.forward(z, Mode::kEval, false);
  REQUIRE(p->data[0] == Catch::Approx(0.5).margin(1e-7));
  REQUIRE(p->data[1] == Catch::Approx(0.75).margin(1e-6));
}

TEST_CASE("global pooling over the segment axis") {
  SECTION("K=1 squeezes without changing values") {
    auto x = make_tensor({1, 3, 1, 1});
    x->data = {0.1f, 0.2f, 0.3f};
    Tensor out = global_avg_pool(*x);
    REQUIRE(out.shape == std::vector<int>({1, 3}));
    REQUIRE(out.data == x->data);
  }
  SECTION("mean of segment values") {
    auto x = make_tensor({1, 1, 3, 1});
    x->data = {0.2f, 0.4f, 0.6f};
    REQUIRE(global_avg_pool(*x).data[0] == Catch::Approx(0.4).margin(1e-7));
  }
  SECTION("constant over 30 segments") {
    auto x = filled({1, 1, 30, 1}, 0.9f);
    REQUIRE(global_avg_pool(*x).data[0] == Catch::Approx(0.9).margin(1e-6));
  }
}

TEST_CASE("backward: mean pool distributes the gradient equally") {
  GlobalPool pool(PoolKind::kAvg);
  auto x = make_tensor({1, 1, 4, 1});
  x->data = {1.0f, 2.0f, 3.0f, 4.0f};
  pool.forward(x, Mode::kTrain, true);
  Tensor dy({1, 1});
  dy.data = {1.0f};
  Tensor dx = pool.backward(dy);
  for (float v : dx.data) REQUIRE(v == 0.25f);
}

TEST_CASE("backward: relu gradient is zero for negative pre-activations") {
  ReLU relu;
  auto x = make_tensor({1, 1, 1, 4});
  x->data = {-1.0f, 2.0f, -3.0f, 4.0f};
  relu.forward(x, Mode::kTrain, true);
  Tensor dy({1, 1, 1, 4});
  dy.fill(1.0f);
  Tensor dx = relu.backward(dy);
  REQUIRE(dx.data == std::vector<float>({0.0f, 1.0f, 0.0f, 1.0f}));
}

TEST_CASE("backward without a recorded forward throws") {
  Conv2d conv(1, 1, 3, 3, 1, 1);
  Tensor dy({1, 1, 4, 4});
  REQUIRE_THROWS_MATCHES(conv.backward(dy), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kGraphNotRecorded;
                         }));

  ReLU relu;
  REQUIRE_THROWS_AS(relu.backward(dy), Error);
  Pool2d pool(PoolKind::kMax, 2, 2);
  REQUIRE_THROWS_AS(pool.backward(dy), Error);
}

TEST_CASE("adam: zero gradient from a fresh state leaves parameters unchanged") {
  Tensor param({4});
  param.data = {1.0f, -2.0f, 3.0f, 0.5f};
  const Tensor before = param;
  Tensor grad({4});
  AdamParamState state;
  adam_step(param, grad, state, 1, {});
  REQUIRE(param.data == before.data);
}

TEST_CASE("adam: bias-corrected first step moves by about lr") {
  Tensor param({1});
  param.data = {2.0f};
  Tensor grad({1});
  grad.data = {1.0f};
  AdamParamState state;
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step(param, grad, state, 1, cfg);
  REQUIRE(param.data[0] == Catch::Approx(2.0 - 0.1).margin(1e-6));
}

TEST_CASE("adam: two identical steps reproduce the scalar trace") {
  // Hand-rolled two-iteration reference for g = 0.5, lr = 0.01.
  const double g = 0.5, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p_ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    p_ref -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }

  Tensor param({1});
  param.data = {1.0f};
  Tensor grad({1});
  grad.data = {static_cast<float>(g)};
  AdamParamState state;
  AdamConfig cfg;
  cfg.lr = lr;
  adam_step(param, grad, state, 1, cfg);
  adam_step(param, grad, state, 2, cfg);
  REQUIRE(param.data[0] == Catch::Approx(p_ref).margin(1e-6));
}

TEST_CASE("adam: shape mismatch is rejected") {
  Tensor param({2});
  Tensor grad({3});
  AdamParamState state;
  REQUIRE_THROWS_MATCHES(adam_step(param, grad, state, 1, {}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kShapeMismatch;
                         }));
}

TEST_CASE("forward passes are deterministic") {
  Rng rng(12);
  Conv2d conv(3, 4, 3, 3, 1, 1);
  conv.init_kaiming_uniform(rng);
  auto x = random_tensor({2, 3, 16, 16}, rng);
  auto a = conv.forward(x, Mode::kEval, false);
  auto b = conv.forward(x, Mode::kEval, false);
  REQUIRE(a->data == b->data);
}

TEST_CASE("tensors reject non-finite values in checks") {
  Tensor t({2});
  t.data = {1.0f, std::numeric_limits<float>::quiet_NaN()};
  REQUIRE_FALSE(t.all_finite());
  REQUIRE_THROWS_AS(check_finite(t, "test"), Error);
}

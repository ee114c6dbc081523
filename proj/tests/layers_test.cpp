// Copyright 2026 The splitleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "splitleak/layers.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace splitleak {
namespace {

using testutil::random_tensor;

TEST(Conv2d, OneByOneKernelScales) {
  // 1x1 conv with weight 2, bias 0 doubles every pixel.
  Rng rng(1);
  Conv2d conv("c", 1, 1, 1, rng);
  conv.weight().data = {2.0};
  conv.bias().data = {0.0};
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor y = conv.forward(x, false);
  EXPECT_EQ(y.shape, (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.data, (std::vector<double>{2, 4, 6, 8}));
}

TEST(Conv2d, PreservesSpatialSize) {
  Rng rng(2);
  Conv2d conv("c", 3, 5, 3, rng);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);
  EXPECT_EQ(conv.forward(x, false).shape, (Shape{2, 5, 8, 8}));
}

TEST(Conv2d, RejectsWrongChannelCountNamingLayer) {
  Rng rng(3);
  Conv2d conv("conv3", 32, 32, 3, rng);
  Tensor x = random_tensor({1, 4, 8, 8}, rng);
  try {
    conv.forward(x, false);
    FAIL() << "expected shape error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("conv3"), std::string::npos);
  }
}

TEST(MaxPool2d, TakesWindowMaximum) {
  MaxPool2d pool("p");
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor y = pool.forward(x, false);
  EXPECT_EQ(y.shape, (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.data[0], 4.0);
}

TEST(MaxPool2d, GradientRoutesToArgmaxFirstOnTies) {
  MaxPool2d pool("p");
  // Window is all equal: the gradient must land on the first element in
  // row-major window order.
  Tensor x({1, 1, 2, 2}, {5, 5, 5, 5});
  pool.forward(x, true);
  Tensor gy({1, 1, 1, 1}, {1.0});
  Tensor gx = pool.backward(gy);
  EXPECT_EQ(gx.data, (std::vector<double>{1, 0, 0, 0}));

  Tensor x2({1, 1, 2, 2}, {1, 7, 7, 2});
  pool.forward(x2, true);
  Tensor gx2 = pool.backward(gy);
  EXPECT_EQ(gx2.data, (std::vector<double>{0, 1, 0, 0}));
}

TEST(MaxPool2d, RejectsOddExtent) {
  MaxPool2d pool("p");
  Rng rng(4);
  Tensor x = random_tensor({1, 1, 3, 4}, rng);
  EXPECT_THROW(pool.forward(x, false), std::invalid_argument);
}

TEST(ReLU, ClampsNegatives) {
  ReLU relu("r");
  Tensor x({3}, {-1, 0, 3});
  EXPECT_EQ(relu.forward(x, false).data, (std::vector<double>{0, 0, 3}));
}

TEST(Softmax, RowsArePositiveAndNormalized) {
  Softmax sm("s");
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({4, 6}, rng, -30.0, 30.0);
    Tensor y = sm.forward(x, false);
    for (size_t r = 0; r < 4; ++r) {
      double sum = 0;
      for (size_t c = 0; c < 6; ++c) {
        EXPECT_GT(y.data[r * 6 + c], 0.0);
        sum += y.data[r * 6 + c];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Layer, BackwardWithoutForwardThrows) {
  Rng rng(6);
  Dense dense("d", 3, 2, rng);
  Tensor gy({1, 2}, {1, 1});
  EXPECT_THROW(dense.backward(gy), std::runtime_error);
  Tensor x = random_tensor({1, 3}, rng);
  dense.forward(x, true);
  EXPECT_NO_THROW(dense.backward(gy));
  // The recorded pass is consumed.
  EXPECT_THROW(dense.backward(gy), std::runtime_error);
}

TEST(Layer, ForwardOutputsStayFiniteThroughDeepStack) {
  Rng rng(7);
  LayerStack stack;
  stack.emplace<Conv2d>("c1", 1, 8, 3, rng);
  stack.emplace<ReLU>("r1");
  stack.emplace<MaxPool2d>("p1");
  stack.emplace<Conv2d>("c2", 8, 8, 3, rng);
  stack.emplace<ReLU>("r2");
  stack.emplace<Flatten>("f");
  stack.emplace<Dense>("d", 8 * 4 * 4, 3, rng);
  stack.emplace<Softmax>("s");
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({2, 1, 8, 8}, rng);
    Tensor y = stack.forward(x, true);
    EXPECT_TRUE(y.all_finite());
    Tensor gy(y.shape);
    for (auto& v : gy.data) v = rng.uniform(-1, 1);
    Tensor gx = stack.backward(gy);
    EXPECT_TRUE(gx.all_finite());
    for (auto& p : stack.params()) {
      ASSERT_TRUE(p.tensor->has_grad());
      Tensor g(p.tensor->shape, p.tensor->grad);
      EXPECT_TRUE(g.all_finite()) << p.name;
    }
  }
}

TEST(ParamSet, StableIterationOrderAndNames) {
  Rng rng(8);
  LayerStack stack;
  stack.emplace<Dense>("fc1", 4, 3, rng);
  stack.emplace<Dense>("fc2", 3, 2, rng);
  ParamSet ps = stack.params();
  ASSERT_EQ(ps.size(), 4u);
  EXPECT_EQ(ps[0].name, "fc1.weight");
  EXPECT_EQ(ps[1].name, "fc1.bias");
  EXPECT_EQ(ps[2].name, "fc2.weight");
  EXPECT_EQ(ps[3].name, "fc2.bias");
  EXPECT_EQ(ps.scalar_count(), 4u * 3 + 3 + 3 * 2 + 2);
}

TEST(LayerStack, CloneIsDeepAndIdentical) {
  Rng rng(9);
  LayerStack a;
  a.emplace<Dense>("d", 3, 3, rng);
  a.emplace<ReLU>("r");
  LayerStack b = a.clone();
  Tensor x = random_tensor({2, 3}, rng);
  EXPECT_EQ(a.forward(x, false).data, b.forward(x, false).data);
  // Mutating the clone leaves the original untouched.
  b.params()[0].tensor->data[0] += 1.0;
  EXPECT_NE(a.forward(x, false).data, b.forward(x, false).data);
}

TEST(StackSlice, SliceCompositionMatchesFull) {
  Rng rng(10);
  LayerStack stack;
  stack.emplace<Dense>("d1", 4, 4, rng);
  stack.emplace<ReLU>("r");
  stack.emplace<Dense>("d2", 4, 2, rng);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor full = stack.forward(x, false);
  Tensor front = stack.slice(0, 2).forward(x, false);
  Tensor back = stack.slice(2, 3).forward(front, false);
  EXPECT_EQ(full.data, back.data);
}

}  // namespace
}  // namespace splitleak

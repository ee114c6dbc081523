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

#include "splitleak/models.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace splitleak {
namespace {

using testutil::random_tensor;

std::vector<double> flat_params(LayerStack& s) {
  std::vector<double> out;
  for (auto& p : s.params()) out.insert(out.end(), p.tensor->data.begin(), p.tensor->data.end());
  return out;
}

TEST(Mlp, ParameterCountClosedForm) {
  LayerStack a = build_mlp(11, 2, 1);
  EXPECT_EQ(a.params().scalar_count(), 11502u);
  LayerStack b = build_mlp(1, 2, 1);
  EXPECT_EQ(b.params().scalar_count(), 10502u);
}

TEST(Mlp, SameSeedBitIdentical) {
  LayerStack a = build_mlp(5, 3, 42);
  LayerStack b = build_mlp(5, 3, 42);
  EXPECT_EQ(flat_params(a), flat_params(b));
  LayerStack c = build_mlp(5, 3, 43);
  EXPECT_NE(flat_params(a), flat_params(c));
}

TEST(Mlp, OutputsAreProbabilityVectors) {
  LayerStack net = build_mlp(6, 4, 7);
  Rng rng(3);
  Tensor x = random_tensor({10, 6}, rng, -4.0, 4.0);
  Tensor probs = net.forward(x, false);
  for (size_t r = 0; r < 10; ++r) {
    double sum = 0;
    for (size_t c = 0; c < 4; ++c) {
      EXPECT_GT(probs.data[r * 4 + c], 0.0);
      sum += probs.data[r * 4 + c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Mlp, RejectsBadArguments) {
  EXPECT_THROW(build_mlp(0, 2, 1), std::invalid_argument);
  EXPECT_THROW(build_mlp(4, 1, 1), std::invalid_argument);
}

TEST(SplitCnn, ActivationShapesPerCut) {
  SplitCnn m2 = build_split_cnn(32, 2, 2, 128, 9);
  EXPECT_EQ(m2.activation_shape(), (Shape{32, 16, 16}));
  SplitCnn m4 = build_split_cnn(32, 2, 4, 128, 9);
  EXPECT_EQ(m4.activation_shape(), (Shape{32, 8, 8}));
  SplitCnn m6 = build_split_cnn(32, 2, 6, 128, 9);
  EXPECT_EQ(m6.activation_shape(), (Shape{32, 4, 4}));

  Rng rng(4);
  Tensor x = random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0);
  Tensor act = m6.party_a().forward(x, false);
  EXPECT_EQ(act.shape, (Shape{1, 32, 4, 4}));
}

TEST(SplitCnn, RejectsBadCutAndSide) {
  try {
    build_split_cnn(32, 2, 3, 128, 1);
    FAIL() << "expected cut point error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("{2, 4, 6}"), std::string::npos);
  }
  EXPECT_THROW(build_split_cnn(20, 2, 2, 128, 1), std::invalid_argument);
}

TEST(SplitCnn, SplitCompositionMatchesFullBitExactly) {
  Rng rng(6);
  for (int cut : {2, 4, 6}) {
    SplitCnn model = build_split_cnn(32, 3, cut, 64, 11);
    Tensor x = random_tensor({2, 1, 32, 32}, rng, 0.0, 1.0);
    Tensor full = model.full().forward(x, false);
    Tensor a = model.party_a().forward(x, false);
    Tensor b = model.party_b().forward(a, false);
    EXPECT_EQ(full.data, b.data) << "cut " << cut;
  }
}

TEST(SplitCnn, SameSeedSameParamsForAnyCut) {
  // The cut is a partition of one architecture; it does not change init.
  SplitCnn a = build_split_cnn(32, 2, 2, 128, 5);
  SplitCnn b = build_split_cnn(32, 2, 6, 128, 5);
  EXPECT_EQ(flat_params(a.stack), flat_params(b.stack));
}

TEST(InverseNet, BlockCountFollowsCutDepth) {
  // One upsampling block per pooling stage crossed: layer counts are
  // 2*blocks + 2 (each block is tconv+relu, then final conv+sigmoid).
  InverseNet g2 = build_inverse_net({32, 16, 16}, 32, 1);
  EXPECT_EQ(g2.net.layer_count(), 4u);
  EXPECT_EQ(g2.input_shape, (Shape{32, 16, 16}));
  InverseNet g4 = build_inverse_net({32, 8, 8}, 32, 1);
  EXPECT_EQ(g4.net.layer_count(), 6u);
  InverseNet g6 = build_inverse_net({32, 4, 4}, 32, 1);
  EXPECT_EQ(g6.net.layer_count(), 8u);
}

TEST(InverseNet, OutputShapeAndRange) {
  Rng rng(8);
  for (const Shape& s : {Shape{32, 16, 16}, Shape{32, 8, 8}, Shape{32, 4, 4}}) {
    InverseNet g = build_inverse_net(s, 32, 3);
    Tensor v = random_tensor({2, s[0], s[1], s[2]}, rng, -2.0, 2.0);
    Tensor out = g.net.forward(v, false);
    EXPECT_EQ(out.shape, (Shape{2, 1, 32, 32}));
    for (double p : out.data) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(InverseNet, RejectsUnknownShape) {
  EXPECT_THROW(build_inverse_net({32, 5, 5}, 32, 1), std::invalid_argument);
  EXPECT_THROW(build_inverse_net({16, 16, 16}, 32, 1), std::invalid_argument);
  EXPECT_THROW(build_inverse_net({32, 32, 32}, 32, 1), std::invalid_argument);
}

TEST(TrainClassifier, LearnsLinearlySeparableToyProblem) {
  // 200 points in two attributes, label = sign of their sum: separable, so
  // a few hundred epochs of Adam reach high train accuracy.
  Rng rng(10);
  const size_t n = 200;
  Tensor x({n, 2});
  std::vector<int> y(n);
  for (size_t i = 0; i < n; ++i) {
    double a, b;
    do {
      a = rng.uniform(-1, 1);
      b = rng.uniform(-1, 1);
    } while (std::abs(a + b) < 0.05);
    x.data[i * 2] = a;
    x.data[i * 2 + 1] = b;
    y[i] = a + b > 0 ? 1 : 0;
  }
  LayerStack net = build_mlp(2, 2, 3);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-3;
  cfg.rng_seed = 4;
  const auto trace = train_classifier(net.full(), x, y, cfg);
  ASSERT_EQ(trace.size(), 200u);
  EXPECT_GE(trace.back().accuracy, 0.95);
  EXPECT_LE(trace.back().loss, trace.front().loss);
}

TEST(TrainClassifier, ZeroEpochsLeavesModelUntouched) {
  LayerStack net = build_mlp(3, 2, 5);
  const auto before = flat_params(net);
  Rng rng(2);
  Tensor x = random_tensor({10, 3}, rng);
  std::vector<int> y(10, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 5;
  const auto trace = train_classifier(net.full(), x, y, cfg);
  EXPECT_TRUE(trace.empty());
  EXPECT_EQ(flat_params(net), before);
}

TEST(TrainClassifier, SameSeedSameTrace) {
  Rng rng(3);
  Tensor x = random_tensor({40, 3}, rng);
  std::vector<int> y(40);
  for (size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  auto run = [&] {
    LayerStack net = build_mlp(3, 2, 9);
    return train_classifier(net.full(), x, y, cfg);
  };
  const auto t1 = run(), t2 = run();
  ASSERT_EQ(t1.size(), t2.size());
  for (size_t i = 0; i < t1.size(); ++i) {
    EXPECT_EQ(t1[i].loss, t2[i].loss);
    EXPECT_EQ(t1[i].accuracy, t2[i].accuracy);
  }
}

TEST(TrainClassifier, RejectsEmptyDataset) {
  LayerStack net = build_mlp(3, 2, 5);
  Tensor x({1, 3});
  TrainConfig cfg;
  EXPECT_THROW(train_classifier(net.full(), x, {}, cfg), std::invalid_argument);
}

TEST(EpochPermutation, IsAPermutationAndSeedStable) {
  const auto p1 = epoch_permutation(100, 7, 3);
  const auto p2 = epoch_permutation(100, 7, 3);
  EXPECT_EQ(p1, p2);
  EXPECT_NE(p1, epoch_permutation(100, 7, 4));
  std::vector<bool> seen(100, false);
  for (size_t i : p1) {
    ASSERT_LT(i, 100u);
    EXPECT_FALSE(seen[i]);
    seen[i] = true;
  }
}

}  // namespace
}  // namespace splitleak

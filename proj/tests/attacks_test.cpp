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

#include "splitleak/attacks.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace splitleak {
namespace {

using testutil::random_tensor;

// Deterministic oracle: y = x1 XOR x2 with full confidence.
TabularOracle xor_oracle() {
  return [](const std::vector<int>& rec) {
    const int y = rec[0] ^ rec[1];
    std::vector<double> probs(2, 0.0);
    probs[static_cast<size_t>(y)] = 1.0;
    return probs;
  };
}

// Independent enumeration of prior(v) * L(v) with the lowest-index
// tie-break, written directly from the definition.
int brute_force_argmax(const TabularOracle& oracle, std::vector<int> record, size_t target,
                       int observed, const std::vector<double>& priors, bool soft) {
  int best = 0;
  double best_score = -1.0;
  for (size_t v = 0; v < priors.size(); ++v) {
    record[target] = static_cast<int>(v);
    const std::vector<double> probs = oracle(record);
    double like;
    if (soft) {
      like = probs[static_cast<size_t>(observed)];
    } else {
      size_t am = 0;
      for (size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[am]) am = c;
      like = am == static_cast<size_t>(observed) ? 1.0 : 0.0;
    }
    const double score = priors[v] * like;
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(v);
    }
  }
  return best;
}

TEST(InferAttribute, XorOracleRecoversHiddenBit) {
  AttrAttackConfig cfg;
  cfg.target_attribute = 1;
  const std::vector<double> priors{0.5, 0.5};
  // known x1 = 1, observed y = 1 -> x2 must be 0 (score 0.5 vs 0).
  const AttrInference got = infer_attribute(xor_oracle(), {1, 0}, 1, priors, cfg);
  EXPECT_EQ(got.level, 0);
  EXPECT_DOUBLE_EQ(got.scores[0], 0.5);
  EXPECT_DOUBLE_EQ(got.scores[1], 0.0);
}

TEST(InferAttribute, PriorDecidesUnderIndifferentModel) {
  TabularOracle indifferent = [](const std::vector<int>&) {
    return std::vector<double>{0.5, 0.5};
  };
  AttrAttackConfig cfg;
  cfg.target_attribute = 0;
  const AttrInference got = infer_attribute(indifferent, {0}, 1, {1.0 - 1e-6, 1e-6}, cfg);
  EXPECT_EQ(got.level, 0);
}

TEST(InferAttribute, TieBreakPicksLowestLevel) {
  TabularOracle indifferent = [](const std::vector<int>&) {
    return std::vector<double>{0.5, 0.5};
  };
  AttrAttackConfig cfg;
  cfg.target_attribute = 0;
  const AttrInference got = infer_attribute(indifferent, {1}, 0, {0.5, 0.5}, cfg);
  EXPECT_EQ(got.level, 0);
  EXPECT_EQ(got.scores[0], got.scores[1]);
}

TEST(InferAttribute, RejectsBadInputs) {
  AttrAttackConfig cfg;
  cfg.target_attribute = 5;
  EXPECT_THROW(infer_attribute(xor_oracle(), {0, 1}, 0, {0.5, 0.5}, cfg), std::invalid_argument);
  cfg.target_attribute = 1;
  EXPECT_THROW(infer_attribute(xor_oracle(), {0, 1}, 3, {0.5, 0.5}, cfg), std::invalid_argument);
}

TEST(InferAttribute, MatchesBruteForceOnEnumerableModels) {
  // Exhaustive equivalence on 3-binary-attribute models: a bank of fixed
  // pseudo-random confidence tables, both scoring modes, all 8 records.
  Rng rng(31);
  for (int model = 0; model < 10; ++model) {
    std::vector<std::vector<double>> table(8);
    Rng mr = rng.fork(model);
    for (auto& row : table) {
      const double p = mr.uniform(0.05, 0.95);
      row = {p, 1.0 - p};
    }
    TabularOracle oracle = [table](const std::vector<int>& rec) {
      return table[static_cast<size_t>(rec[0] * 4 + rec[1] * 2 + rec[2])];
    };
    const std::vector<double> priors{mr.uniform(0.1, 0.9), 1.0};
    for (size_t target = 0; target < 3; ++target)
      for (int bits = 0; bits < 8; ++bits)
        for (int observed = 0; observed < 2; ++observed)
          for (bool soft : {true, false}) {
            std::vector<int> rec{(bits >> 2) & 1, (bits >> 1) & 1, bits & 1};
            AttrAttackConfig cfg;
            cfg.target_attribute = target;
            cfg.scoring = soft ? AttrScoring::soft_confidence : AttrScoring::hard_label;
            const AttrInference got = infer_attribute(oracle, rec, observed, priors, cfg);
            EXPECT_EQ(got.level,
                      brute_force_argmax(oracle, rec, target, observed, priors, soft));
          }
  }
}

TEST(InferAttribute, PriorScalingInvariance) {
  Rng rng(17);
  TabularOracle oracle = [](const std::vector<int>& rec) {
    const double p = 0.2 + 0.15 * rec[0] + 0.3 * rec[1];
    return std::vector<double>{p, 1.0 - p};
  };
  AttrAttackConfig cfg;
  cfg.target_attribute = 1;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> rec{static_cast<int>(rng.below(2)), 0};
    const int observed = static_cast<int>(rng.below(2));
    std::vector<double> priors{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    const double scale = rng.uniform(0.01, 100.0);
    std::vector<double> scaled{priors[0] * scale, priors[1] * scale};
    EXPECT_EQ(infer_attribute(oracle, rec, observed, priors, cfg).level,
              infer_attribute(oracle, rec, observed, scaled, cfg).level);
  }
}

TabularDataset xor_dataset() {
  TabularDataset ds;
  AttributeDesc a;
  a.name = "x1";
  a.levels = {"0", "1"};
  AttributeDesc b = a;
  b.name = "x2";
  b.sensitive = true;
  ds.schema.attributes = {a, b};
  ds.schema.label_column = "y";
  ds.schema.classes = 2;
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x2 = 0; x2 < 2; ++x2) {
      ds.records.push_back({x1, x2});
      ds.labels.push_back(x1 ^ x2);
    }
  return ds;
}

TEST(EvalAttrAttack, XorSetupIsFullyRecovered) {
  const TabularDataset test = xor_dataset();
  PriorTable priors;
  priors.by_attribute = {{0.5, 0.5}, {0.5, 0.5}};
  const AttackReport report =
      eval_attr_attack(xor_oracle(), test, 1, priors, nullptr, 10, Rng(3));
  EXPECT_EQ(report.trial_attack_accuracy.size(), 10u);
  EXPECT_EQ(report.attack_accuracy_mean, 1.0);
  EXPECT_EQ(report.attack_accuracy_std, 0.0);
  EXPECT_EQ(report.test_accuracy_mean, 1.0);
}

TEST(EvalAttrAttack, ZeroFlipMatchesNoDefense) {
  const TabularDataset test = xor_dataset();
  PriorTable priors;
  priors.by_attribute = {{0.5, 0.5}, {0.5, 0.5}};
  LabelPerturbConfig defense;
  defense.flip_probability = 0.0;
  defense.classes = 2;
  const AttackReport with = eval_attr_attack(xor_oracle(), test, 1, priors, &defense, 5, Rng(4));
  const AttackReport without = eval_attr_attack(xor_oracle(), test, 1, priors, nullptr, 5, Rng(4));
  EXPECT_EQ(with.trial_attack_accuracy, without.trial_attack_accuracy);
  EXPECT_EQ(with.trial_test_accuracy, without.trial_test_accuracy);
}

TEST(EvalAttrAttack, FullFlipDegradesBinaryAttack) {
  const TabularDataset test = xor_dataset();
  PriorTable priors;
  priors.by_attribute = {{0.5, 0.5}, {0.5, 0.5}};
  LabelPerturbConfig defense;
  defense.flip_probability = 1.0;
  defense.classes = 2;
  const AttackReport report = eval_attr_attack(xor_oracle(), test, 1, priors, &defense, 3, Rng(5));
  // Observed labels are always wrong, so the XOR inversion is always wrong.
  EXPECT_EQ(report.attack_accuracy_mean, 0.0);
  EXPECT_EQ(report.test_accuracy_mean, 0.0);
}

TEST(EvalAttrAttack, RejectsEmptyTestSet) {
  TabularDataset empty;
  empty.schema = xor_dataset().schema;
  PriorTable priors;
  priors.by_attribute = {{0.5, 0.5}, {0.5, 0.5}};
  EXPECT_THROW(eval_attr_attack(xor_oracle(), empty, 1, priors, nullptr, 1, Rng(1)),
               std::invalid_argument);
}

TEST(MajorityBaseline, CountsLevels) {
  TabularDataset ds = xor_dataset();  // two 0s and two 1s in attribute 1
  EXPECT_EQ(majority_prior_baseline(ds, 1), 0.5);
  ds.records.push_back({0, 1});
  EXPECT_EQ(majority_prior_baseline(ds, 1), 0.6);
}

// ---------------------------------------------------------------------------
// Inversion attack

ActivationOracle identity_oracle() {
  return [](const Tensor& img) { return downcast_f32(img); };
}

TEST(CollectQueries, PairsPreservedBitExactly) {
  ImageDataset ds = synth_images(100, 32, 5);
  const auto acts = collect_queries(identity_oracle(), ds.images);
  ASSERT_EQ(acts.size(), 100u);
  for (size_t i = 0; i < acts.size(); ++i)
    EXPECT_EQ(acts[i].data, downcast_f32(ds.images[i]).data);
  EXPECT_THROW(collect_queries(identity_oracle(), {}), std::invalid_argument);
}

TEST(TrainInverse, IdentityMappingIsLearnable) {
  // The queried model is a 1x1 identity conv, so its activations ARE the
  // images and the identity map is exactly realizable by a 1x1-conv
  // decoder. On constant-pattern images the loss falls below 1e-3.
  ImageDataset ds;
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    Tensor img({1, 32, 32});
    const double v = rng.uniform(0.1, 0.9);
    std::fill(img.data.begin(), img.data.end(), v);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(i % 2);
  }
  Rng build_rng(7);
  LayerStack identity;
  auto& conv = identity.emplace<Conv2d>("f", 1, 1, 1, build_rng);
  conv.weight().data = {1.0};
  conv.bias().data = {0.0};
  ActivationOracle oracle = [&identity](const Tensor& img) {
    Tensor batched({1, 1, 32, 32}, img.data);
    Tensor act = identity.forward(batched, false);
    return downcast_f32(Tensor({1, 32, 32}, act.data));
  };
  const auto acts = collect_queries(oracle, ds.images);
  LayerStack decoder;
  decoder.emplace<Conv2d>("g", 1, 1, 1, build_rng);
  InversionAttackConfig cfg;
  cfg.query_set_size = 200;
  cfg.train.batch_size = 8;
  cfg.train.epochs = 50;
  cfg.train.learning_rate = 1e-2;
  cfg.train.rng_seed = 8;
  const auto trace = train_inverse(decoder, acts, ds.images, cfg);
  ASSERT_EQ(trace.size(), 50u);
  EXPECT_LT(trace.back(), 1e-3);
  EXPECT_LE(trace.back(), trace.front());
}

TEST(TrainInverse, ZeroEpochsLeavesDecoderUntouched) {
  InverseNet decoder = build_inverse_net({32, 8, 8}, 32, 9);
  std::vector<double> before;
  for (auto& p : decoder.net.params()) before.insert(before.end(), p.tensor->data.begin(), p.tensor->data.end());
  ImageDataset ds = synth_images(8, 32, 10);
  Rng rng(11);
  std::vector<Tensor> acts;
  for (int i = 0; i < 8; ++i) acts.push_back(testutil::random_tensor({32, 8, 8}, rng));
  InversionAttackConfig cfg;
  cfg.query_set_size = 8;
  cfg.train.batch_size = 4;
  cfg.train.epochs = 0;
  EXPECT_TRUE(train_inverse(decoder, acts, ds.images, cfg).empty());
  std::vector<double> after;
  for (auto& p : decoder.net.params()) after.insert(after.end(), p.tensor->data.begin(), p.tensor->data.end());
  EXPECT_EQ(before, after);
}

TEST(TrainInverse, DeterministicTraces) {
  ImageDataset ds = synth_images(32, 32, 13);
  SplitCnn victim = build_split_cnn(32, 2, 4, 64, 15);
  StackSlice party_a = victim.party_a();
  ActivationOracle oracle = [&party_a](const Tensor& img) {
    Tensor batched({1, 1, 32, 32}, img.data);
    Tensor act = party_a.forward(batched, false);
    return downcast_f32(Tensor({32, 8, 8}, act.data));
  };
  const auto acts = collect_queries(oracle, ds.images);
  InversionAttackConfig cfg;
  cfg.query_set_size = 32;
  cfg.train.batch_size = 8;
  cfg.train.epochs = 3;
  cfg.train.rng_seed = 21;
  auto run = [&] {
    InverseNet decoder = build_inverse_net({32, 8, 8}, 32, 17);
    return train_inverse(decoder, acts, ds.images, cfg);
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainInverse, RejectsSizeMismatch) {
  InverseNet decoder = build_inverse_net({32, 8, 8}, 32, 9);
  ImageDataset ds = synth_images(8, 32, 10);
  std::vector<Tensor> acts(7, Tensor({32, 8, 8}));
  InversionAttackConfig cfg;
  EXPECT_THROW(train_inverse(decoder, acts, ds.images, cfg), std::invalid_argument);
  std::vector<Tensor> wrong_shape(8, Tensor({32, 4, 4}));
  EXPECT_THROW(train_inverse(decoder, wrong_shape, ds.images, cfg), std::invalid_argument);
}

TEST(Invert, ShapeRangeAndDeterminism) {
  InverseNet decoder = build_inverse_net({32, 4, 4}, 32, 19);
  Rng rng(23);
  Tensor v = testutil::random_tensor({32, 4, 4}, rng);
  Tensor a = invert(decoder, v);
  Tensor b = invert(decoder, v);
  EXPECT_EQ(a.shape, (Shape{1, 32, 32}));
  EXPECT_EQ(a.data, b.data);
  for (double p : a.data) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  Tensor bad = testutil::random_tensor({32, 8, 8}, rng);
  EXPECT_THROW(invert(decoder, bad), std::invalid_argument);
}

}  // namespace
}  // namespace splitleak

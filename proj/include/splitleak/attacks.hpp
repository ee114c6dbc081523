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

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitleak/data.hpp"
#include "splitleak/defenses.hpp"
#include "splitleak/loss.hpp"
#include "splitleak/metrics.hpp"
#include "splitleak/models.hpp"
#include "splitleak/optimizer.hpp"
#include "splitleak/rng.hpp"

namespace splitleak {

// Black-box query access. Both oracles must be deterministic and
// side-effect free for a fixed deployed model.
using TabularOracle = std::function<std::vector<double>(const std::vector<int>&)>;
using ActivationOracle = std::function<Tensor(const Tensor&)>;

// Sensitive-attribute recovery by posterior maximization. For each
// candidate level v of the target attribute, the score is
// prior(v) * L(v); L is the model's confidence in the observed label
// (soft mode) or an indicator that the model's top-1 prediction matches
// it (hard mode).
enum class AttrScoring { soft_confidence, hard_label };

struct AttrAttackConfig {
  size_t target_attribute = 0;
  AttrScoring scoring = AttrScoring::soft_confidence;
};

struct AttrInference {
  int level = 0;
  std::vector<double> scores;  // unnormalized, one per candidate level
};

inline AttrInference infer_attribute(const TabularOracle& access, std::vector<int> known_record,
                                     int observed_label, const std::vector<double>& priors,
                                     const AttrAttackConfig& cfg) {
  if (cfg.target_attribute >= known_record.size())
    throw std::invalid_argument("infer_attribute: unknown attribute index " +
                                std::to_string(cfg.target_attribute));
  if (priors.empty())
    throw std::invalid_argument("infer_attribute: priors must cover every candidate level");
  AttrInference out;
  out.scores.resize(priors.size());
  for (size_t v = 0; v < priors.size(); ++v) {
    known_record[cfg.target_attribute] = static_cast<int>(v);
    const std::vector<double> probs = access(known_record);
    if (observed_label < 0 || static_cast<size_t>(observed_label) >= probs.size())
      throw std::invalid_argument("infer_attribute: observed label " +
                                  std::to_string(observed_label) + " out of range");
    double likelihood;
    if (cfg.scoring == AttrScoring::soft_confidence) {
      likelihood = probs[static_cast<size_t>(observed_label)];
    } else {
      size_t best = 0;
      for (size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c;
      likelihood = best == static_cast<size_t>(observed_label) ? 1.0 : 0.0;
    }
    out.scores[v] = priors[v] * likelihood;
  }
  // Argmax with ties broken toward the lowest level index.
  out.level = 0;
  for (size_t v = 1; v < out.scores.size(); ++v)
    if (out.scores[v] > out.scores[static_cast<size_t>(out.level)]) out.level = static_cast<int>(v);
  return out;
}

// Per-trial and aggregate metrics of an attack evaluation, plus whatever
// reconstruction-quality table the inversion pipeline filled in.
struct AttackReport {
  std::vector<double> trial_attack_accuracy;
  std::vector<double> trial_test_accuracy;
  double attack_accuracy_mean = 0.0, attack_accuracy_std = 0.0;
  double test_accuracy_mean = 0.0, test_accuracy_std = 0.0;

  void finalize() {
    auto [am, as] = mean_std(trial_attack_accuracy);
    attack_accuracy_mean = am;
    attack_accuracy_std = as;
    auto [tm, ts] = mean_std(trial_test_accuracy);
    test_accuracy_mean = tm;
    test_accuracy_std = ts;
  }
};

// Evaluates the attribute attack over a test set on one deployed model.
// Each repetition redraws the defense's randomness: the adversary observes
// the model's predicted label, flipped by the defense when one is
// configured, and test accuracy is measured on the same flipped labels.
inline AttackReport eval_attr_attack(const TabularOracle& access, const TabularDataset& test,
                                     size_t target_attr, const PriorTable& priors,
                                     const LabelPerturbConfig* defense, size_t repetitions,
                                     Rng rng, AttrScoring scoring = AttrScoring::soft_confidence) {
  if (test.size() == 0) throw std::invalid_argument("eval_attr_attack: empty test set");
  if (target_attr >= test.schema.attributes.size())
    throw std::invalid_argument("eval_attr_attack: unknown attribute index " +
                                std::to_string(target_attr));
  AttrAttackConfig cfg;
  cfg.target_attribute = target_attr;
  cfg.scoring = scoring;
  const std::vector<double>& attr_priors = priors.by_attribute.at(target_attr);

  // The deployed model's predictions do not depend on defense randomness;
  // compute them once.
  std::vector<int> predicted(test.size());
  for (size_t i = 0; i < test.size(); ++i) {
    const std::vector<double> probs = access(test.records[i]);
    size_t best = 0;
    for (size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[best]) best = c;
    predicted[i] = static_cast<int>(best);
  }

  AttackReport report;
  for (size_t rep = 0; rep < repetitions; ++rep) {
    Rng trial_rng = rng.fork(rep);
    size_t attack_hits = 0, test_hits = 0;
    for (size_t i = 0; i < test.size(); ++i) {
      int observed = predicted[i];
      if (defense) observed = perturb_label(observed, *defense, trial_rng);
      const AttrInference guess =
          infer_attribute(access, test.records[i], observed, attr_priors, cfg);
      if (guess.level == test.records[i][target_attr]) ++attack_hits;
      if (observed == test.labels[i]) ++test_hits;
    }
    report.trial_attack_accuracy.push_back(static_cast<double>(attack_hits) /
                                           static_cast<double>(test.size()));
    report.trial_test_accuracy.push_back(static_cast<double>(test_hits) /
                                         static_cast<double>(test.size()));
  }
  report.finalize();
  return report;
}

// Majority-level rate of the target attribute over a test set; the
// baseline an attacker achieves with priors alone.
inline double majority_prior_baseline(const TabularDataset& test, size_t target_attr) {
  const size_t levels = test.schema.attributes.at(target_attr).level_count();
  std::vector<size_t> counts(levels, 0);
  for (const auto& rec : test.records) ++counts[static_cast<size_t>(rec[target_attr])];
  size_t best = 0;
  for (size_t v = 1; v < levels; ++v)
    if (counts[v] > counts[best]) best = v;
  return static_cast<double>(counts[best]) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Inversion attack

struct InversionAttackConfig {
  size_t query_set_size = 512;
  TrainConfig train;

  void validate() const {
    if (query_set_size < train.batch_size)
      throw std::invalid_argument("inversion attack: query set smaller than batch size");
  }
};

// Queries the activation oracle once per image; pairing is preserved.
inline std::vector<Tensor> collect_queries(const ActivationOracle& access,
                                           const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("collect_queries: empty query set");
  std::vector<Tensor> activations;
  activations.reserve(images.size());
  for (const Tensor& img : images) activations.push_back(access(img));
  return activations;
}

namespace detail {

inline Tensor stack_batch(const std::vector<Tensor>& items, const std::vector<size_t>& order,
                          size_t first, size_t last) {
  Shape s = items[0].shape;
  s.insert(s.begin(), last - first);
  Tensor out(s);
  const size_t row = items[0].size();
  for (size_t i = first; i < last; ++i)
    std::copy(items[order[i]].data.begin(), items[order[i]].data.end(),
              out.data.begin() + static_cast<long>((i - first) * row));
  return out;
}

}  // namespace detail

// Trains a decoder stack on (activation, image) pairs by minibatch
// gradient descent on the mean squared pixel loss. Returns the per-epoch
// mean loss. Works for any decoder architecture; the InverseNet overload
// additionally pins the expected activation shape.
inline std::vector<double> train_inverse(LayerStack& decoder, const std::vector<Tensor>& activations,
                                         const std::vector<Tensor>& images,
                                         const InversionAttackConfig& cfg) {
  if (activations.size() != images.size())
    throw std::invalid_argument("train_inverse: " + std::to_string(activations.size()) +
                                " activations vs " + std::to_string(images.size()) + " images");
  const size_t n = activations.size();
  if (n == 0) throw std::invalid_argument("train_inverse: empty training set");
  cfg.validate();
  cfg.train.validate(n);
  ParamSet params = decoder.params();
  OptimizerState opt(cfg.train);
  std::vector<double> trace;
  trace.reserve(cfg.train.epochs);
  for (size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const std::vector<size_t> order = epoch_permutation(n, cfg.train.rng_seed, epoch);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t first = 0; first < n; first += cfg.train.batch_size) {
      const size_t last = std::min(first + cfg.train.batch_size, n);
      Tensor v = detail::stack_batch(activations, order, first, last);
      Tensor x = detail::stack_batch(images, order, first, last);
      Tensor recon = decoder.forward(v, true);
      const Loss loss = l2_recon_loss(recon, x);
      decoder.backward(loss.grad);
      opt.step(params);
      loss_sum += loss.value;
      ++batches;
    }
    trace.push_back(loss_sum / static_cast<double>(batches));
  }
  return trace;
}

inline std::vector<double> train_inverse(InverseNet& g, const std::vector<Tensor>& activations,
                                         const std::vector<Tensor>& images,
                                         const InversionAttackConfig& cfg) {
  for (const Tensor& v : activations)
    if (v.shape != g.input_shape)
      throw std::invalid_argument("train_inverse: activation shape " + shape_str(v.shape) +
                                  " does not match decoder input " + shape_str(g.input_shape));
  return train_inverse(g.net, activations, images, cfg);
}

// Recovers one image from one intercepted activation.
inline Tensor invert(InverseNet& g, const Tensor& activation) {
  if (activation.shape != g.input_shape)
    throw std::invalid_argument("invert: activation shape " + shape_str(activation.shape) +
                                " does not match decoder input " + shape_str(g.input_shape));
  Tensor batched({1, activation.shape[0], activation.shape[1], activation.shape[2]},
                 activation.data);
  Tensor out = g.net.forward(batched, false);
  return Tensor(Shape(out.shape.begin() + 1, out.shape.end()), out.data);
}

}  // namespace splitleak

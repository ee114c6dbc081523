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

#include <cstdint>
#include <stdexcept>

#include "splitleak/layers.hpp"
#include "splitleak/rng.hpp"

namespace splitleak {

// Randomized-response label flipping: keep the label with probability
// 1 - p, otherwise substitute one of the other C - 1 classes uniformly.
struct LabelPerturbConfig {
  double flip_probability = 0.0;
  size_t classes = 2;
  uint64_t rng_stream = 0;

  void validate() const {
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
      throw std::invalid_argument("flip_probability must be in [0,1]");
    if (classes < 2) throw std::invalid_argument("label perturbation needs >= 2 classes");
  }
};

// One-shot Gaussian noise on every model parameter, applied before
// deployment. sigma is the standard deviation of the per-scalar draw.
struct ModelPerturbConfig {
  double sigma = 0.0;
  uint64_t rng_stream = 0;

  void validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  }
};

inline int perturb_label(int y, const LabelPerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  if (y < 0 || static_cast<size_t>(y) >= cfg.classes)
    throw std::invalid_argument("perturb_label: label " + std::to_string(y) + " outside [0," +
                                std::to_string(cfg.classes) + ")");
  if (!rng.bernoulli(cfg.flip_probability)) return y;
  // Uniform over the other C-1 classes.
  const uint64_t pick = rng.below(cfg.classes - 1);
  return pick < static_cast<uint64_t>(y) ? static_cast<int>(pick) : static_cast<int>(pick) + 1;
}

// Closed-form test accuracy after label flipping: a correct prediction
// survives with probability 1 - p, and a wrong one lands on the true class
// with probability p / (C - 1).
inline double expected_perturbed_accuracy(double base_accuracy, double p, size_t classes) {
  if (!(base_accuracy >= 0.0 && base_accuracy <= 1.0))
    throw std::invalid_argument("base_accuracy must be in [0,1]");
  return base_accuracy * (1.0 - p) +
         (1.0 - base_accuracy) * p / static_cast<double>(classes - 1);
}

// Adds an independent N(0, sigma^2) draw to every scalar parameter, in
// iteration order. Shapes and ordering are untouched.
inline void perturb_model(ParamSet& params, const ModelPerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.sigma == 0.0) return;
  for (auto& p : params)
    for (double& v : p.tensor->data) v += cfg.sigma * rng.normal();
}

}  // namespace splitleak

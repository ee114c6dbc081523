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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitleak/layers.hpp"

namespace splitleak {

enum class OptimizerKind { adam, sgd };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

struct TrainConfig {
  size_t batch_size = 32;
  size_t epochs = 10;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t rng_seed = 42;

  void validate(size_t dataset_size) const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (dataset_size > 0 && batch_size > dataset_size)
      throw std::invalid_argument("batch_size " + std::to_string(batch_size) +
                                  " exceeds dataset size " + std::to_string(dataset_size));
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  }
};

// Per-model optimizer state. Elementwise moments are kept in parameter
// iteration order, so stepping a split model half-by-half updates every
// scalar exactly as stepping the whole model would.
class OptimizerState {
 public:
  explicit OptimizerState(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(ParamSet& params) {
    if (params.size() == 0) throw std::invalid_argument("optimizer_step: empty parameter set");
    for (auto& p : params)
      if (!p.tensor->has_grad())
        throw std::runtime_error("optimizer_step: missing grad for " + p.name);
    if (cfg_.optimizer == OptimizerKind::adam)
      adam_step(params);
    else
      sgd_step(params);
    for (auto& p : params) p.tensor->zero_grad();
  }

  uint64_t steps_taken() const { return t_; }

 private:
  void sgd_step(ParamSet& params) {
    ++t_;
    for (auto& p : params) {
      Tensor& t = *p.tensor;
      for (size_t i = 0; i < t.size(); ++i) t.data[i] -= cfg_.learning_rate * t.grad[i];
    }
  }

  void adam_step(ParamSet& params) {
    if (m_.empty()) {
      for (auto& p : params) {
        m_.emplace_back(p.tensor->size(), 0.0);
        v_.emplace_back(p.tensor->size(), 0.0);
      }
    }
    if (m_.size() != params.size())
      throw std::runtime_error("optimizer_step: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Tensor& t = *params[pi].tensor;
      std::vector<double>& m = m_[pi];
      std::vector<double>& v = v_[pi];
      if (m.size() != t.size())
        throw std::runtime_error("optimizer_step: parameter shape changed between steps");
      for (size_t i = 0; i < t.size(); ++i) {
        const double g = t.grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        t.data[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  uint64_t t_ = 0;
};

inline void optimizer_step(ParamSet& params, OptimizerState& state) { state.step(params); }

}  // namespace splitleak

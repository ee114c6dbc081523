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
#include <stdexcept>
#include <vector>

#include "splitleak/tensor.hpp"

namespace splitleak {

// Probability floor applied before logs, so saturated softmax outputs do
// not produce -inf.
constexpr double kProbFloor = 1e-12;

// A scalar loss plus its gradient with respect to the prediction tensor;
// feeding `grad` into the producing stack's backward() completes the pass.
struct Loss {
  double value = 0.0;
  Tensor grad;
};

// Mean over the batch of the squared l2 distance between prediction and
// target: (1/n) * sum_i ||pred_i - target_i||^2. The first axis is the
// batch axis.
inline Loss l2_recon_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape)
    throw std::invalid_argument("l2_recon_loss: shape mismatch " + shape_str(pred.shape) +
                                " vs " + shape_str(target.shape));
  const size_t n = pred.shape[0];
  Loss loss;
  loss.grad = Tensor(pred.shape);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    total += d * d;
    loss.grad.data[i] = 2.0 * d * inv_n;
  }
  loss.value = total * inv_n;
  return loss;
}

// -ln p[true_class] for a single probability vector.
inline double cross_entropy(const std::vector<double>& probabilities, size_t true_class) {
  if (true_class >= probabilities.size())
    throw std::invalid_argument("cross_entropy: class index " + std::to_string(true_class) +
                                " out of range for " + std::to_string(probabilities.size()) +
                                " classes");
  return -std::log(std::max(probabilities[true_class], kProbFloor));
}

// Mean cross-entropy over a batch of probability rows (N, C).
inline Loss cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.shape.size() != 2)
    throw std::invalid_argument("cross_entropy: expected (N,C) probabilities, got " +
                                shape_str(probs.shape));
  const size_t n = probs.shape[0], c = probs.shape[1];
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy: batch has " + std::to_string(n) +
                                " rows but " + std::to_string(labels.size()) + " labels");
  Loss loss;
  loss.grad = Tensor(probs.shape);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<size_t>(y) >= c)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range at row " + std::to_string(r));
    const double p = std::max(probs.data[r * c + static_cast<size_t>(y)], kProbFloor);
    loss.value += -std::log(p) * inv_n;
    loss.grad.data[r * c + static_cast<size_t>(y)] = -inv_n / p;
  }
  return loss;
}

}  // namespace splitleak

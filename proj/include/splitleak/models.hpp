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
#include <string>
#include <vector>

#include "splitleak/layers.hpp"
#include "splitleak/loss.hpp"
#include "splitleak/optimizer.hpp"
#include "splitleak/rng.hpp"
#include "splitleak/tensor.hpp"

namespace splitleak {

// Classifier MLP: two hidden layers of 100 units with ReLU, softmax head.
inline LayerStack build_mlp(size_t d_in, size_t classes, uint64_t seed) {
  if (d_in < 1) throw std::invalid_argument("build_mlp: d_in must be >= 1");
  if (classes < 2) throw std::invalid_argument("build_mlp: need at least 2 classes");
  Rng rng = Rng(seed).fork(0x6D6C70);  // "mlp"
  constexpr size_t kHidden = 100;
  LayerStack net;
  net.emplace<Dense>("fc1", d_in, kHidden, rng);
  net.emplace<ReLU>("relu1");
  net.emplace<Dense>("fc2", kHidden, kHidden, rng);
  net.emplace<ReLU>("relu2");
  net.emplace<Dense>("head", kHidden, classes, rng);
  net.emplace<Softmax>("softmax");
  return net;
}

// Convolutional classifier split between two parties. Six 3x3 convolutions
// of 32 channels with a 2x2 maxpool after every second one, then two fully
// connected layers with a softmax head. The cut point names the activation
// just after the pool that follows conv 2, 4, or 6; party A owns the layers
// up to the cut, party B the rest.
struct SplitCnn {
  LayerStack stack;
  int cut_point = 2;
  size_t cut_index = 0;  // first layer owned by party B
  size_t image_side = 32;
  size_t classes = 2;
  size_t hidden_width = 128;

  StackSlice party_a() { return stack.slice(0, cut_index); }
  StackSlice party_b() { return stack.slice(cut_index, stack.layer_count()); }
  StackSlice full() { return stack.full(); }

  // Shape of the activation that crosses the wire, for one image.
  Shape activation_shape() const {
    const size_t pools = static_cast<size_t>(cut_point) / 2;
    const size_t side = image_side >> pools;
    return {32, side, side};
  }
};

inline SplitCnn build_split_cnn(size_t image_side, size_t classes, int cut_point,
                                size_t hidden_width, uint64_t seed) {
  if (image_side % 8 != 0)
    throw std::invalid_argument("build_split_cnn: image_side must be divisible by 8");
  if (cut_point != 2 && cut_point != 4 && cut_point != 6)
    throw std::invalid_argument("build_split_cnn: cut_point must be one of {2, 4, 6}, got " +
                                std::to_string(cut_point));
  if (classes < 2) throw std::invalid_argument("build_split_cnn: need at least 2 classes");
  Rng rng = Rng(seed).fork(0x636E6E);  // "cnn"
  constexpr size_t kChannels = 32;
  SplitCnn model;
  model.cut_point = cut_point;
  model.image_side = image_side;
  model.classes = classes;
  model.hidden_width = hidden_width;
  LayerStack& net = model.stack;
  size_t in_ch = 1;
  for (int block = 0; block < 3; ++block) {
    for (int c = 0; c < 2; ++c) {
      const int conv_idx = block * 2 + c + 1;
      net.emplace<Conv2d>("conv" + std::to_string(conv_idx), in_ch, kChannels, 3, rng);
      net.emplace<ReLU>("relu" + std::to_string(conv_idx));
      in_ch = kChannels;
    }
    net.emplace<MaxPool2d>("pool" + std::to_string(block + 1));
    if ((block + 1) * 2 == cut_point) model.cut_index = net.layer_count();
  }
  const size_t final_side = image_side / 8;
  net.emplace<Flatten>("flatten");
  net.emplace<Dense>("fc1", kChannels * final_side * final_side, hidden_width, rng);
  net.emplace<ReLU>("fc1_relu");
  net.emplace<Dense>("head", hidden_width, classes, rng);
  net.emplace<Softmax>("softmax");
  return model;
}

// Decoder mapping an intercepted activation back to image space: one
// 2x-upsampling transposed-conv block per pooling stage the cut crossed,
// then a 3x3 convolution down to one channel and a sigmoid, so outputs
// land in [0, 1]. The decoder's structure is free-standing; it shares
// nothing with the model it inverts.
struct InverseNet {
  LayerStack net;
  Shape input_shape;  // intercepted activation shape (C,H,W)
  size_t image_side = 0;
};

inline InverseNet build_inverse_net(const Shape& activation_shape, size_t image_side,
                                    uint64_t seed) {
  if (activation_shape.size() != 3)
    throw std::invalid_argument("build_inverse_net: expected a (C,H,W) activation shape, got " +
                                shape_str(activation_shape));
  const size_t ch = activation_shape[0], side = activation_shape[1];
  if (ch != 32 || activation_shape[2] != side || side == 0 || image_side % side != 0)
    throw std::invalid_argument("build_inverse_net: unrecognized activation shape " +
                                shape_str(activation_shape) + " for image side " +
                                std::to_string(image_side));
  const size_t factor = image_side / side;
  if (factor != 2 && factor != 4 && factor != 8)
    throw std::invalid_argument("build_inverse_net: activation shape " +
                                shape_str(activation_shape) +
                                " is not one pooling stage of 2, 4, or 6 conv layers");
  Rng rng = Rng(seed).fork(0x696E76);  // "inv"
  LayerStack net;
  int blocks = factor == 2 ? 1 : (factor == 4 ? 2 : 3);
  for (int b = 0; b < blocks; ++b) {
    net.emplace<ConvTranspose2d>("up" + std::to_string(b + 1), 32, 32, rng);
    net.emplace<ReLU>("up" + std::to_string(b + 1) + "_relu");
  }
  net.emplace<Conv2d>("to_pixels", 32, 1, 3, rng);
  net.emplace<Sigmoid>("pixel_range");
  return {std::move(net), activation_shape, image_side};
}

// Deterministic Fisher-Yates permutation of [0, n), derived from the seed
// and the epoch index alone so independent training drivers shuffle
// identically.
inline std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, size_t epoch) {
  Rng rng = Rng(seed).fork(0x7065726D).fork(epoch);  // "perm"
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// Gathers rows `idx[first, last)` of X (first axis) into one batch tensor.
inline Tensor gather_batch(const Tensor& x, const std::vector<size_t>& idx,
                           size_t first, size_t last) {
  Shape s = x.shape;
  s[0] = last - first;
  Tensor out(s);
  const size_t row = x.size() / x.shape[0];
  for (size_t i = first; i < last; ++i)
    std::copy_n(x.data.begin() + static_cast<long>(idx[i] * row), row,
                out.data.begin() + static_cast<long>((i - first) * row));
  return out;
}

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline size_t argmax_row(const double* row, size_t c) {
  size_t best = 0;
  for (size_t i = 1; i < c; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

// Minibatch cross-entropy training of a softmax classifier. Shuffling is
// derived from cfg.rng_seed per epoch; two runs with the same seed and the
// same model produce bit-identical parameters.
inline std::vector<EpochStats> train_classifier(StackSlice model, const Tensor& x,
                                                const std::vector<int>& labels,
                                                const TrainConfig& cfg) {
  const size_t n = x.shape.empty() ? 0 : x.shape[0];
  if (n == 0 || labels.size() != n)
    throw std::invalid_argument("train_classifier: empty dataset or label count mismatch");
  cfg.validate(n);
  ParamSet params = model.params();
  OptimizerState opt(cfg);
  std::vector<EpochStats> trace;
  trace.reserve(cfg.epochs);
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<size_t> order = epoch_permutation(n, cfg.rng_seed, epoch);
    double loss_sum = 0.0;
    size_t correct = 0, batches = 0;
    for (size_t first = 0; first < n; first += cfg.batch_size) {
      const size_t last = std::min(first + cfg.batch_size, n);
      Tensor batch = gather_batch(x, order, first, last);
      std::vector<int> batch_labels(last - first);
      for (size_t i = first; i < last; ++i) batch_labels[i - first] = labels[order[i]];
      Tensor probs = model.forward(batch, true);
      const Loss loss = cross_entropy(probs, batch_labels);
      model.backward(loss.grad);
      opt.step(params);
      loss_sum += loss.value;
      ++batches;
      const size_t c = probs.shape[1];
      for (size_t r = 0; r < probs.shape[0]; ++r)
        if (argmax_row(probs.data.data() + r * c, c) == static_cast<size_t>(batch_labels[r]))
          ++correct;
    }
    trace.push_back({loss_sum / static_cast<double>(batches),
                     static_cast<double>(correct) / static_cast<double>(n)});
  }
  return trace;
}

// Forward pass without recording, batched to bound scratch memory.
inline Tensor predict(StackSlice model, const Tensor& x, size_t batch_size = 64) {
  const size_t n = x.shape[0];
  Tensor out;
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t first = 0; first < n; first += batch_size) {
    const size_t last = std::min(first + batch_size, n);
    Tensor chunk = model.forward(gather_batch(x, idx, first, last), false);
    if (first == 0) {
      Shape s = chunk.shape;
      s[0] = n;
      out = Tensor(s);
    }
    std::copy(chunk.data.begin(), chunk.data.end(),
              out.data.begin() + static_cast<long>(first * (chunk.size() / chunk.shape[0])));
  }
  return out;
}

}  // namespace splitleak

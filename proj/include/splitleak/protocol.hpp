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

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitleak/loss.hpp"
#include "splitleak/models.hpp"
#include "splitleak/optimizer.hpp"
#include "splitleak/wire.hpp"

// Two-party collaborative execution of a split model. Party A evaluates
// the front layers and ships the cut activation, party B finishes the pass
// and ships back the result (inference) or the cut-layer gradient
// (training). Every transfer goes through the framed wire format, and an
// optional passive tap records the decoded messages in order.
//
// Activation payloads travel as 32-bit floats during inference, which is
// the precision an eavesdropper sees. Result payloads and all training
// payloads travel as 64-bit floats, so class probabilities keep their
// softmax normalization and a split training run reproduces monolithic
// training bit for bit.

namespace splitleak {

enum class Direction : uint8_t { a_to_b = 0, b_to_a = 1 };

struct Transcript {
  struct Entry {
    Direction direction;
    WireMessage msg;
  };
  std::vector<Entry> entries;

  size_t size() const { return entries.size(); }
};

// Writes a transcript as a plain concatenation of frames. Direction is
// implied by message type (activations flow A->B; results and gradients
// flow B->A).
inline void save_transcript(const std::string& path, const Transcript& t) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_transcript: cannot open " + path);
  for (const auto& e : t.entries) {
    const std::vector<uint8_t> bytes = serialize(e.msg);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

inline Transcript load_transcript(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_transcript: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Transcript t;
  size_t off = 0;
  while (off < bytes.size()) {
    WireMessage msg;
    size_t consumed = 0;
    const WireError err = deserialize(reinterpret_cast<const uint8_t*>(bytes.data()) + off,
                                      bytes.size() - off, msg, &consumed);
    if (err != WireError::ok)
      throw std::runtime_error("load_transcript: bad frame at offset " + std::to_string(off) +
                               ": " + to_string(err));
    const Direction dir =
        msg.type == MsgType::activation ? Direction::a_to_b : Direction::b_to_a;
    t.entries.push_back({dir, std::move(msg)});
    off += consumed;
  }
  return t;
}

// Synchronous in-process duplex channel carrying one request at a time.
// send() serializes, validates and decodes each message — the same bytes a
// stream transport would carry — and appends a copy to the tap, if any,
// under a lock.
class DuplexChannel {
 public:
  explicit DuplexChannel(Transcript* tap = nullptr) : tap_(tap) {}

  WireMessage send(Direction dir, MsgType type, WireDtype dtype, const Tensor& payload) {
    WireMessage msg;
    msg.type = type;
    msg.dtype = dtype;
    msg.seq = dir == Direction::a_to_b ? seq_ab_++ : seq_ba_++;
    msg.tensor = payload;
    const std::vector<uint8_t> bytes = serialize(msg);
    WireMessage delivered;
    const WireError err = deserialize(bytes, delivered);
    if (err != WireError::ok)
      throw std::runtime_error(std::string("channel: frame rejected: ") + to_string(err));
    if (tap_) {
      std::lock_guard<std::mutex> lock(mu_);
      tap_->entries.push_back({dir, delivered});
    }
    return delivered;
  }

 private:
  Transcript* tap_;
  uint64_t seq_ab_ = 0;
  uint64_t seq_ba_ = 0;
  std::mutex mu_;
};

// One collaborative inference of a single image: exactly one activation
// message A->B and one result message B->A. Returns party B's class
// probabilities.
inline std::vector<double> collaborative_infer(StackSlice party_a, StackSlice party_b,
                                               const Tensor& image, Transcript* tap = nullptr) {
  if (image.shape.size() != 3)
    throw std::invalid_argument("collaborative_infer: expected a (C,H,W) image, got " +
                                shape_str(image.shape));
  DuplexChannel channel(tap);
  Tensor batched({1, image.shape[0], image.shape[1], image.shape[2]}, image.data);
  Tensor activation = party_a.forward(batched, false);
  Tensor unbatched(Shape(activation.shape.begin() + 1, activation.shape.end()), activation.data);
  const WireMessage act = channel.send(Direction::a_to_b, MsgType::activation,
                                       WireDtype::f32, unbatched);
  Tensor rebatched({1, act.tensor.shape[0], act.tensor.shape[1], act.tensor.shape[2]},
                   act.tensor.data);
  Tensor probs = party_b.forward(rebatched, false);
  const WireMessage res = channel.send(Direction::b_to_a, MsgType::result, WireDtype::f64,
                                       Tensor({probs.size()}, probs.data));
  return res.tensor.data;
}

// Per-half training state. Optimizer moments live with the owning party
// and persist across epochs.
struct SplitTrainSession {
  StackSlice party_a, party_b;
  OptimizerState opt_a, opt_b;
  ParamSet params_a, params_b;
  TrainConfig cfg;
  size_t epochs_done = 0;

  SplitTrainSession(StackSlice a, StackSlice b, const TrainConfig& config)
      : party_a(a), party_b(b), opt_a(config), opt_b(config),
        params_a(party_a.params()), params_b(party_b.params()), cfg(config) {}
};

// One epoch of collaborative training: per batch, one f64 activation
// message A->B and one f64 cut-gradient message B->A. Batch order is the
// same seed-derived permutation monolithic training uses, so parameters
// match a monolithic run bit for bit.
inline EpochStats collaborative_train_epoch(SplitTrainSession& session, const Tensor& x,
                                            const std::vector<int>& labels,
                                            Transcript* tap = nullptr) {
  const size_t n = x.shape.empty() ? 0 : x.shape[0];
  if (n == 0 || labels.size() != n)
    throw std::invalid_argument("collaborative_train_epoch: empty dataset or label mismatch");
  session.cfg.validate(n);
  DuplexChannel channel(tap);
  const std::vector<size_t> order = epoch_permutation(n, session.cfg.rng_seed, session.epochs_done);
  double loss_sum = 0.0;
  size_t correct = 0, batches = 0;
  for (size_t first = 0; first < n; first += session.cfg.batch_size) {
    const size_t last = std::min(first + session.cfg.batch_size, n);
    Tensor batch = gather_batch(x, order, first, last);
    std::vector<int> batch_labels(last - first);
    for (size_t i = first; i < last; ++i) batch_labels[i - first] = labels[order[i]];

    Tensor activation = session.party_a.forward(batch, true);
    const WireMessage act =
        channel.send(Direction::a_to_b, MsgType::activation, WireDtype::f64, activation);

    Tensor probs = session.party_b.forward(act.tensor, true);
    const Loss loss = cross_entropy(probs, batch_labels);
    Tensor cut_grad = session.party_b.backward(loss.grad);
    const WireMessage grad =
        channel.send(Direction::b_to_a, MsgType::gradient, WireDtype::f64, cut_grad);
    session.party_a.backward(grad.tensor);

    session.opt_a.step(session.params_a);
    session.opt_b.step(session.params_b);

    loss_sum += loss.value;
    ++batches;
    const size_t c = probs.shape[1];
    for (size_t r = 0; r < probs.shape[0]; ++r)
      if (argmax_row(probs.data.data() + r * c, c) == static_cast<size_t>(batch_labels[r]))
        ++correct;
  }
  ++session.epochs_done;
  return {loss_sum / static_cast<double>(batches),
          static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace splitleak

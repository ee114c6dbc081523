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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitleak/gemm.hpp"
#include "splitleak/rng.hpp"
#include "splitleak/tensor.hpp"

namespace splitleak {

// Ordered view over named parameter tensors. Iteration order is the order
// of registration, which for a stack is construction order, so it is
// stable across runs for the same model-building sequence.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

class ParamSet {
 public:
  void add(std::string name, Tensor* t) { refs_.push_back({std::move(name), t}); }

  size_t size() const { return refs_.size(); }
  const ParamRef& operator[](size_t i) const { return refs_[i]; }
  ParamRef& operator[](size_t i) { return refs_[i]; }

  auto begin() { return refs_.begin(); }
  auto end() { return refs_.end(); }
  auto begin() const { return refs_.begin(); }
  auto end() const { return refs_.end(); }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& r : refs_) n += r.tensor->size();
    return n;
  }

  bool grads_ready() const {
    for (const auto& r : refs_)
      if (!r.tensor->has_grad()) return false;
    return !refs_.empty();
  }

  void zero_grads() {
    for (auto& r : refs_) r.tensor->zero_grad();
  }

  Tensor* find(const std::string& name) const {
    for (const auto& r : refs_)
      if (r.name == name) return r.tensor;
    return nullptr;
  }

 private:
  std::vector<ParamRef> refs_;
};

// A layer owns its parameters and, after a recorded forward pass, enough
// cached state to run the exact backward pass. backward() accumulates into
// parameter grads and returns the gradient with respect to its input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual const char* kind() const = 0;
  const std::string& label() const { return label_; }

  virtual Tensor forward(const Tensor& input, bool record) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(const std::string& prefix, ParamSet& out) {}
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  explicit Layer(std::string label) : label_(std::move(label)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument(label_ + " (" + kind() + "): " + what);
  }

  void require_recorded() const {
    if (!recorded_)
      throw std::runtime_error(label_ + " (" + std::string(kind()) +
                               "): backward() without a recorded forward pass");
  }

  std::string label_;
  bool recorded_ = false;
};

namespace detail {

// Kaiming-style uniform init: bound = sqrt(6 / fan_in).
inline void kaiming_uniform(Tensor& w, size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
}

}  // namespace detail

// Fully connected layer. Weight layout is (in, out) so the forward pass is
// a plain row-major product; bias is (out).
class Dense : public Layer {
 public:
  Dense(std::string label, size_t in, size_t out, Rng& rng)
      : Layer(std::move(label)), in_(in), out_(out),
        weight_({in, out}), bias_({out}) {
    detail::kaiming_uniform(weight_, in_, rng);
  }

  const char* kind() const override { return "dense"; }
  size_t in_features() const { return in_; }
  size_t out_features() const { return out_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

  Tensor forward(const Tensor& x, bool record) override {
    if (x.shape.size() != 2 || x.shape[1] != in_)
      fail("expected input (N," + std::to_string(in_) + "), got " + shape_str(x.shape));
    const size_t n = x.shape[0];
    Tensor y({n, out_});
    gemm_nn(x.data.data(), weight_.data.data(), y.data.data(), n, in_, out_);
    for (size_t r = 0; r < n; ++r) {
      double* row = y.data.data() + r * out_;
      for (size_t o = 0; o < out_; ++o) row[o] += bias_.data[o];
    }
    if (record) {
      input_ = x;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    const size_t n = input_.shape[0];
    if (gy.shape != Shape{n, out_}) fail("gradient shape mismatch " + shape_str(gy.shape));
    weight_.ensure_grad();
    bias_.ensure_grad();
    // dW += X^T * dY ; db += column sums of dY ; dX = dY * W^T
    gemm_tn(input_.data.data(), gy.data.data(), weight_.grad.data(), in_, n, out_);
    for (size_t r = 0; r < n; ++r) {
      const double* row = gy.data.data() + r * out_;
      for (size_t o = 0; o < out_; ++o) bias_.grad[o] += row[o];
    }
    Tensor gx({n, in_});
    gemm_nt(gy.data.data(), weight_.data.data(), gx.data.data(), n, out_, in_);
    recorded_ = false;
    return gx;
  }

  void collect_params(const std::string& prefix, ParamSet& out) override {
    out.add(prefix + label_ + ".weight", &weight_);
    out.add(prefix + label_ + ".bias", &bias_);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  size_t in_, out_;
  Tensor weight_, bias_;
  Tensor input_;
};

// 2-D convolution with odd kernel, stride 1 and "same" zero padding k/2,
// so spatial extents are preserved. Weight layout (out, in*k*k).
class Conv2d : public Layer {
 public:
  Conv2d(std::string label, size_t in_ch, size_t out_ch, size_t k, Rng& rng)
      : Layer(std::move(label)), in_ch_(in_ch), out_ch_(out_ch), k_(k),
        weight_({out_ch, in_ch * k * k}), bias_({out_ch}) {
    if (k % 2 == 0) fail("kernel extent must be odd");
    detail::kaiming_uniform(weight_, in_ch * k * k, rng);
  }

  const char* kind() const override { return "conv2d"; }
  size_t in_channels() const { return in_ch_; }
  size_t out_channels() const { return out_ch_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

  Tensor forward(const Tensor& x, bool record) override {
    check_input(x);
    const size_t n = x.shape[0], h = x.shape[2], w = x.shape[3];
    const size_t hw = h * w, taps = in_ch_ * k_ * k_;
    Tensor y({n, out_ch_, h, w});
    cols_.resize(taps * hw);
    for (size_t img = 0; img < n; ++img) {
      im2col(x.data.data() + img * in_ch_ * hw, in_ch_, h, w, k_, 1, k_ / 2, cols_.data());
      double* out = y.data.data() + img * out_ch_ * hw;
      gemm_nn(weight_.data.data(), cols_.data(), out, out_ch_, taps, hw);
      for (size_t o = 0; o < out_ch_; ++o) {
        const double b = bias_.data[o];
        double* plane = out + o * hw;
        for (size_t p = 0; p < hw; ++p) plane[p] += b;
      }
    }
    if (record) {
      input_ = x;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    const size_t n = input_.shape[0], h = input_.shape[2], w = input_.shape[3];
    if (gy.shape != Shape{n, out_ch_, h, w})
      fail("gradient shape mismatch " + shape_str(gy.shape));
    const size_t hw = h * w, taps = in_ch_ * k_ * k_;
    weight_.ensure_grad();
    bias_.ensure_grad();
    Tensor gx({n, in_ch_, h, w});
    cols_.resize(taps * hw);
    cols_t_.resize(taps * hw);
    dcols_.resize(taps * hw);
    for (size_t img = 0; img < n; ++img) {
      const double* gout = gy.data.data() + img * out_ch_ * hw;
      im2col(input_.data.data() + img * in_ch_ * hw, in_ch_, h, w, k_, 1, k_ / 2, cols_.data());
      // dW += dY * cols^T, via an explicit transpose to keep the product axpy-shaped.
      transpose(cols_.data(), cols_t_.data(), taps, hw);
      gemm_nn(gout, cols_t_.data(), weight_.grad.data(), out_ch_, hw, taps);
      for (size_t o = 0; o < out_ch_; ++o) {
        const double* plane = gout + o * hw;
        double s = 0.0;
        for (size_t p = 0; p < hw; ++p) s += plane[p];
        bias_.grad[o] += s;
      }
      // dX = col2im(W^T * dY)
      std::fill(dcols_.begin(), dcols_.end(), 0.0);
      gemm_tn(weight_.data.data(), gout, dcols_.data(), taps, out_ch_, hw);
      col2im(dcols_.data(), in_ch_, h, w, k_, 1, k_ / 2, gx.data.data() + img * in_ch_ * hw);
    }
    recorded_ = false;
    return gx;
  }

  void collect_params(const std::string& prefix, ParamSet& out) override {
    out.add(prefix + label_ + ".weight", &weight_);
    out.add(prefix + label_ + ".bias", &bias_);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  void check_input(const Tensor& x) const {
    if (x.shape.size() != 4 || x.shape[1] != in_ch_)
      fail("expected input (N," + std::to_string(in_ch_) + ",H,W), got " + shape_str(x.shape));
  }

  size_t in_ch_, out_ch_, k_;
  Tensor weight_, bias_;
  Tensor input_;
  std::vector<double> cols_, cols_t_, dcols_;
};

// Fractionally strided convolution: kernel 4, stride 2, padding 1, which
// doubles both spatial extents exactly. Weight layout (in, out*k*k).
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string label, size_t in_ch, size_t out_ch, Rng& rng)
      : Layer(std::move(label)), in_ch_(in_ch), out_ch_(out_ch),
        weight_({in_ch, out_ch * kK * kK}), bias_({out_ch}) {
    detail::kaiming_uniform(weight_, in_ch * kK * kK, rng);
  }

  const char* kind() const override { return "conv_transpose2d"; }

  Tensor forward(const Tensor& x, bool record) override {
    if (x.shape.size() != 4 || x.shape[1] != in_ch_)
      fail("expected input (N," + std::to_string(in_ch_) + ",H,W), got " + shape_str(x.shape));
    const size_t n = x.shape[0], h = x.shape[2], w = x.shape[3];
    const size_t ho = 2 * h, wo = 2 * w;
    const size_t taps = out_ch_ * kK * kK;
    Tensor y({n, out_ch_, ho, wo});
    cols_.assign(taps * h * w, 0.0);
    for (size_t img = 0; img < n; ++img) {
      std::fill(cols_.begin(), cols_.end(), 0.0);
      gemm_tn(weight_.data.data(), x.data.data() + img * in_ch_ * h * w,
              cols_.data(), taps, in_ch_, h * w);
      double* out = y.data.data() + img * out_ch_ * ho * wo;
      col2im(cols_.data(), out_ch_, ho, wo, kK, kStride, kPad, out);
      for (size_t o = 0; o < out_ch_; ++o) {
        const double b = bias_.data[o];
        double* plane = out + o * ho * wo;
        for (size_t p = 0; p < ho * wo; ++p) plane[p] += b;
      }
    }
    if (record) {
      input_ = x;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    const size_t n = input_.shape[0], h = input_.shape[2], w = input_.shape[3];
    const size_t ho = 2 * h, wo = 2 * w;
    if (gy.shape != Shape{n, out_ch_, ho, wo})
      fail("gradient shape mismatch " + shape_str(gy.shape));
    const size_t taps = out_ch_ * kK * kK, hw = h * w;
    weight_.ensure_grad();
    bias_.ensure_grad();
    Tensor gx({n, in_ch_, h, w});
    cols_.resize(taps * hw);
    cols_t_.resize(taps * hw);
    for (size_t img = 0; img < n; ++img) {
      const double* gout = gy.data.data() + img * out_ch_ * ho * wo;
      // Unfold the output gradient on the stride-2 grid; then
      // dX = W * cols and dW += X * cols^T.
      im2col(gout, out_ch_, ho, wo, kK, kStride, kPad, cols_.data());
      gemm_nn(weight_.data.data(), cols_.data(), gx.data.data() + img * in_ch_ * hw,
              in_ch_, taps, hw);
      transpose(cols_.data(), cols_t_.data(), taps, hw);
      gemm_nn(input_.data.data() + img * in_ch_ * hw, cols_t_.data(),
              weight_.grad.data(), in_ch_, hw, taps);
      for (size_t o = 0; o < out_ch_; ++o) {
        const double* plane = gout + o * ho * wo;
        double s = 0.0;
        for (size_t p = 0; p < ho * wo; ++p) s += plane[p];
        bias_.grad[o] += s;
      }
    }
    recorded_ = false;
    return gx;
  }

  void collect_params(const std::string& prefix, ParamSet& out) override {
    out.add(prefix + label_ + ".weight", &weight_);
    out.add(prefix + label_ + ".bias", &bias_);
  }

  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ConvTranspose2d>(*this);
  }

 private:
  static constexpr size_t kK = 4, kStride = 2, kPad = 1;

  size_t in_ch_, out_ch_;
  Tensor weight_, bias_;
  Tensor input_;
  std::vector<double> cols_, cols_t_;
};

// 2x2 max pooling with stride 2. Ties route the gradient to the first
// maximal element in row-major window order.
class MaxPool2d : public Layer {
 public:
  explicit MaxPool2d(std::string label) : Layer(std::move(label)) {}

  const char* kind() const override { return "maxpool2d"; }

  Tensor forward(const Tensor& x, bool record) override {
    if (x.shape.size() != 4) fail("expected input (N,C,H,W), got " + shape_str(x.shape));
    const size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (h % 2 != 0 || w % 2 != 0) fail("spatial extents must be even, got " + shape_str(x.shape));
    const size_t ho = h / 2, wo = w / 2;
    Tensor y({n, c, ho, wo});
    argmax_.resize(y.size());
    size_t oi = 0;
    for (size_t img = 0; img < n; ++img)
      for (size_t ch = 0; ch < c; ++ch) {
        const double* plane = x.data.data() + (img * c + ch) * h * w;
        for (size_t oy = 0; oy < ho; ++oy)
          for (size_t ox = 0; ox < wo; ++ox) {
            const size_t base = (oy * 2) * w + ox * 2;
            const size_t cand[4] = {base, base + 1, base + w, base + w + 1};
            size_t best = cand[0];
            double bv = plane[cand[0]];
            for (int t = 1; t < 4; ++t)
              if (plane[cand[t]] > bv) {
                bv = plane[cand[t]];
                best = cand[t];
              }
            y.data[oi] = bv;
            argmax_[oi] = (img * c + ch) * h * w + best;
            ++oi;
          }
      }
    if (record) {
      in_shape_ = x.shape;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    if (gy.size() != argmax_.size()) fail("gradient shape mismatch " + shape_str(gy.shape));
    Tensor gx(in_shape_);
    for (size_t i = 0; i < gy.size(); ++i) gx.data[argmax_[i]] += gy.data[i];
    recorded_ = false;
    return gx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Shape in_shape_;
  std::vector<size_t> argmax_;
};

class ReLU : public Layer {
 public:
  explicit ReLU(std::string label) : Layer(std::move(label)) {}

  const char* kind() const override { return "relu"; }

  Tensor forward(const Tensor& x, bool record) override {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    if (record) {
      mask_.resize(x.size());
      for (size_t i = 0; i < x.size(); ++i) mask_[i] = x.data[i] > 0.0;
      in_shape_ = x.shape;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    if (gy.size() != mask_.size()) fail("gradient shape mismatch " + shape_str(gy.shape));
    Tensor gx(in_shape_);
    for (size_t i = 0; i < gy.size(); ++i) gx.data[i] = mask_[i] ? gy.data[i] : 0.0;
    recorded_ = false;
    return gx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Shape in_shape_;
  std::vector<uint8_t> mask_;
};

class Sigmoid : public Layer {
 public:
  explicit Sigmoid(std::string label) : Layer(std::move(label)) {}

  const char* kind() const override { return "sigmoid"; }

  Tensor forward(const Tensor& x, bool record) override {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
    if (record) {
      output_ = y;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    if (gy.size() != output_.size()) fail("gradient shape mismatch " + shape_str(gy.shape));
    Tensor gx(output_.shape);
    for (size_t i = 0; i < gy.size(); ++i) {
      const double s = output_.data[i];
      gx.data[i] = gy.data[i] * s * (1.0 - s);
    }
    recorded_ = false;
    return gx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }

 private:
  Tensor output_;
};

// Softmax over the last axis, computed with max subtraction. Outputs are
// clamped away from exact zero so downstream logs stay finite even on
// saturated inputs.
class Softmax : public Layer {
 public:
  explicit Softmax(std::string label) : Layer(std::move(label)) {}

  const char* kind() const override { return "softmax"; }

  Tensor forward(const Tensor& x, bool record) override {
    if (x.shape.empty()) fail("scalar input");
    const size_t c = x.shape.back();
    const size_t rows = x.size() / c;
    Tensor y(x.shape);
    for (size_t r = 0; r < rows; ++r) {
      const double* in = x.data.data() + r * c;
      double* out = y.data.data() + r * c;
      double mx = in[0];
      for (size_t i = 1; i < c; ++i) mx = std::max(mx, in[i]);
      double sum = 0.0;
      for (size_t i = 0; i < c; ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
      }
      for (size_t i = 0; i < c; ++i) {
        out[i] /= sum;
        if (out[i] < kTiny) out[i] = kTiny;
      }
    }
    if (record) {
      output_ = y;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    if (gy.shape != output_.shape) fail("gradient shape mismatch " + shape_str(gy.shape));
    const size_t c = output_.shape.back();
    const size_t rows = output_.size() / c;
    Tensor gx(output_.shape);
    for (size_t r = 0; r < rows; ++r) {
      const double* p = output_.data.data() + r * c;
      const double* g = gy.data.data() + r * c;
      double dot = 0.0;
      for (size_t i = 0; i < c; ++i) dot += g[i] * p[i];
      double* out = gx.data.data() + r * c;
      for (size_t i = 0; i < c; ++i) out[i] = p[i] * (g[i] - dot);
    }
    recorded_ = false;
    return gx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }

 private:
  static constexpr double kTiny = 1e-300;

  Tensor output_;
};

// Collapses (N, ...) to (N, features).
class Flatten : public Layer {
 public:
  explicit Flatten(std::string label) : Layer(std::move(label)) {}

  const char* kind() const override { return "flatten"; }

  Tensor forward(const Tensor& x, bool record) override {
    if (x.shape.size() < 2) fail("expected a batched input, got " + shape_str(x.shape));
    Tensor y({x.shape[0], x.size() / x.shape[0]}, x.data);
    if (record) {
      in_shape_ = x.shape;
      recorded_ = true;
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_recorded();
    if (gy.size() != shape_numel(in_shape_)) fail("gradient shape mismatch " + shape_str(gy.shape));
    Tensor gx(in_shape_, gy.data);
    recorded_ = false;
    return gx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape in_shape_;
};

class LayerStack;

// Non-owning view over a contiguous run of a stack's layers. The split
// parties each drive one slice of the same underlying model.
class StackSlice {
 public:
  StackSlice() = default;
  StackSlice(std::vector<std::unique_ptr<Layer>>* layers, size_t begin, size_t end)
      : layers_(layers), begin_(begin), end_(end) {}

  size_t layer_count() const { return end_ - begin_; }
  Layer& layer(size_t i) { return *(*layers_)[begin_ + i]; }

  Tensor forward(const Tensor& input, bool record = true) {
    Tensor cur = input;
    for (size_t i = begin_; i < end_; ++i) cur = (*layers_)[i]->forward(cur, record);
    return cur;
  }

  Tensor backward(const Tensor& grad_output) {
    Tensor cur = grad_output;
    for (size_t i = end_; i > begin_; --i) cur = (*layers_)[i - 1]->backward(cur);
    return cur;
  }

  ParamSet params(const std::string& prefix = "") {
    ParamSet out;
    for (size_t i = begin_; i < end_; ++i) (*layers_)[i]->collect_params(prefix, out);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer>>* layers_ = nullptr;
  size_t begin_ = 0, end_ = 0;
};

// Owning sequential container of layers.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(LayerStack&&) = default;
  LayerStack& operator=(LayerStack&&) = default;
  LayerStack(const LayerStack& other) { *this = other; }
  LayerStack& operator=(const LayerStack& other) {
    layers_.clear();
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
    return *this;
  }

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return static_cast<L&>(*layers_.back());
  }

  size_t layer_count() const { return layers_.size(); }
  Layer& layer(size_t i) { return *layers_[i]; }

  StackSlice full() { return StackSlice(&layers_, 0, layers_.size()); }
  StackSlice slice(size_t begin, size_t end) {
    if (begin > end || end > layers_.size()) throw std::invalid_argument("bad stack slice");
    return StackSlice(&layers_, begin, end);
  }

  Tensor forward(const Tensor& input, bool record = true) { return full().forward(input, record); }
  Tensor backward(const Tensor& grad_output) { return full().backward(grad_output); }
  ParamSet params(const std::string& prefix = "") { return full().params(prefix); }

  LayerStack clone() const { return LayerStack(*this); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace splitleak

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
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitleak {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

// Dense n-dimensional array of 64-bit floats, row-major. `grad` is either
// empty or a buffer of the same length as `data`.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;

  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

  Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor full(Shape s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  size_t size() const { return data.size(); }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  void zero_grad() { grad.assign(data.size(), 0.0); }

  void drop_grad() { grad.clear(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Convenience accessor for tests and small tensors; not for hot loops.
  double& at(std::initializer_list<size_t> idx) {
    return data[flat_index(idx)];
  }
  double at(std::initializer_list<size_t> idx) const {
    return data[flat_index(idx)];
  }

  size_t flat_index(std::initializer_list<size_t> idx) const {
    if (idx.size() != shape.size()) throw std::invalid_argument("index rank mismatch");
    size_t flat = 0;
    size_t axis = 0;
    for (size_t i : idx) {
      if (i >= shape[axis]) throw std::out_of_range("tensor index out of range");
      flat = flat * shape[axis] + i;
      ++axis;
    }
    return flat;
  }
};

// Round every value through IEEE binary32 and back. This is the exact
// rounding a 32-bit wire payload applies.
inline Tensor downcast_f32(const Tensor& t) {
  Tensor out(t.shape);
  for (size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<double>(static_cast<float>(t.data[i]));
  return out;
}

}  // namespace splitleak

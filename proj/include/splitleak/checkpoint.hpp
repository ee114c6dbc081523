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
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "splitleak/layers.hpp"
#include "splitleak/tensor.hpp"

// Parameter checkpoint file:
//   magic "NNCK", version byte 0x01, then one record per parameter:
//     name length  u16 LE
//     name bytes
//     ndim         u8
//     dims         u32 LE each
//     payload      64-bit LE floats, row-major
// Values are written bit for bit; a round-trip reproduces the exact bytes
// of every parameter.

namespace splitleak {

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const uint8_t* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

inline uint64_t double_bits(double d) {
  uint64_t u;
  std::memcpy(&u, &d, sizeof(u));
  return u;
}

inline double bits_double(uint64_t u) {
  double d;
  std::memcpy(&d, &u, sizeof(d));
  return d;
}

}  // namespace detail

inline std::string encode_checkpoint(const ParamSet& params) {
  std::string out = "NNCK";
  out.push_back(0x01);
  for (const auto& p : params) {
    if (p.name.size() > 0xFFFF)
      throw std::invalid_argument("checkpoint: parameter name too long: " + p.name);
    detail::put_le<uint16_t>(out, static_cast<uint16_t>(p.name.size()));
    out.append(p.name);
    const Tensor& t = *p.tensor;
    if (t.shape.size() > 0xFF) throw std::invalid_argument("checkpoint: too many dims");
    out.push_back(static_cast<char>(t.shape.size()));
    for (size_t d : t.shape) detail::put_le<uint32_t>(out, static_cast<uint32_t>(d));
    for (double v : t.data) detail::put_le<uint64_t>(out, detail::double_bits(v));
  }
  return out;
}

inline std::vector<std::pair<std::string, Tensor>> decode_checkpoint(const std::string& bytes) {
  const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data());
  const size_t n = bytes.size();
  if (n < 5 || std::memcmp(p, "NNCK", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  if (p[4] != 0x01)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(p[4]));
  size_t off = 5;
  std::vector<std::pair<std::string, Tensor>> out;
  while (off < n) {
    if (off + 2 > n) throw std::runtime_error("checkpoint: truncated record header");
    const uint16_t name_len = detail::get_le<uint16_t>(p + off);
    off += 2;
    if (off + name_len + 1 > n) throw std::runtime_error("checkpoint: truncated name");
    std::string name(bytes, off, name_len);
    off += name_len;
    const uint8_t ndim = p[off++];
    if (ndim == 0) throw std::runtime_error("checkpoint: zero-dimension tensor for " + name);
    if (off + 4ull * ndim > n) throw std::runtime_error("checkpoint: truncated dims");
    Shape shape(ndim);
    size_t numel = 1;
    for (size_t d = 0; d < ndim; ++d) {
      shape[d] = detail::get_le<uint32_t>(p + off);
      off += 4;
      if (shape[d] == 0) throw std::runtime_error("checkpoint: zero extent for " + name);
      numel *= shape[d];
    }
    if (off + 8ull * numel > n) throw std::runtime_error("checkpoint: truncated payload for " + name);
    Tensor t(shape);
    for (size_t i = 0; i < numel; ++i) {
      t.data[i] = detail::bits_double(detail::get_le<uint64_t>(p + off));
      off += 8;
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

// Copies loaded tensors into an existing parameter set, matching by name.
inline void apply_checkpoint(ParamSet& params,
                             const std::vector<std::pair<std::string, Tensor>>& loaded) {
  for (const auto& [name, tensor] : loaded) {
    Tensor* dst = params.find(name);
    if (!dst) throw std::runtime_error("checkpoint: no parameter named " + name);
    if (dst->shape != tensor.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": model has " +
                               shape_str(dst->shape) + ", file has " + shape_str(tensor.shape));
    dst->data = tensor.data;
  }
}

}  // namespace splitleak

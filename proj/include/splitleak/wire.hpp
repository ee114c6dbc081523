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
#include <string>
#include <vector>

#include "splitleak/tensor.hpp"

// Framed tensor messages, format version 1:
//
//   magic   "SPLT"        4 bytes
//   version 0x01          1 byte
//   type    1 byte        0x01 activation, 0x02 result, 0x03 gradient
//   dtype   1 byte        0x00 f32, 0x01 f64
//   ndim    1 byte
//   dims    u32 LE each
//   seq     u64 LE
//   payload prod(dims) * dtype-size bytes, little-endian floats
//   crc32   u32 LE over every preceding byte (IEEE polynomial)
//
// Decoding validates length, magic, version, type, dtype, shape and CRC;
// a corrupted message is rejected, never repaired. Serializing with dtype
// f32 is where the 64-bit compute values get rounded to the 32-bit wire
// representation.

namespace splitleak {

enum class MsgType : uint8_t { activation = 0x01, result = 0x02, gradient = 0x03 };
enum class WireDtype : uint8_t { f32 = 0x00, f64 = 0x01 };

enum class WireError {
  ok = 0,
  truncated,
  bad_magic,
  bad_version,
  bad_type,
  bad_dtype,
  bad_shape,
  crc_mismatch,
  trailing_bytes,
};

inline const char* to_string(WireError e) {
  switch (e) {
    case WireError::ok: return "ok";
    case WireError::truncated: return "truncated";
    case WireError::bad_magic: return "bad_magic";
    case WireError::bad_version: return "bad_version";
    case WireError::bad_type: return "bad_type";
    case WireError::bad_dtype: return "bad_dtype";
    case WireError::bad_shape: return "bad_shape";
    case WireError::crc_mismatch: return "crc_mismatch";
    case WireError::trailing_bytes: return "trailing_bytes";
  }
  return "unknown";
}

struct WireMessage {
  MsgType type = MsgType::activation;
  WireDtype dtype = WireDtype::f32;
  uint64_t seq = 0;
  Tensor tensor;

  bool operator==(const WireMessage& other) const {
    return type == other.type && dtype == other.dtype && seq == other.seq &&
           tensor.shape == other.tensor.shape &&
           std::memcmp(tensor.data.data(), other.tensor.data.data(),
                       tensor.data.size() * sizeof(double)) == 0;
  }
};

// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0) {
  static const auto table = [] {
    std::vector<uint32_t> t(256);
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int b = 0; b < 8; ++b) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = ~seed;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

namespace wire_detail {

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const uint8_t* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace wire_detail

constexpr size_t kWireMaxDims = 8;
constexpr size_t kWireMaxPayload = 1ull << 30;

inline std::vector<uint8_t> serialize(const WireMessage& msg) {
  if (msg.tensor.shape.empty() || msg.tensor.shape.size() > kWireMaxDims)
    throw std::invalid_argument("serialize: tensor rank must be in [1," +
                                std::to_string(kWireMaxDims) + "]");
  std::vector<uint8_t> out;
  const size_t elem = msg.dtype == WireDtype::f32 ? 4 : 8;
  out.reserve(19 + 4 * msg.tensor.shape.size() + elem * msg.tensor.size());
  out.push_back('S');
  out.push_back('P');
  out.push_back('L');
  out.push_back('T');
  out.push_back(0x01);
  out.push_back(static_cast<uint8_t>(msg.type));
  out.push_back(static_cast<uint8_t>(msg.dtype));
  out.push_back(static_cast<uint8_t>(msg.tensor.shape.size()));
  for (size_t d : msg.tensor.shape) wire_detail::put_le<uint32_t>(out, static_cast<uint32_t>(d));
  wire_detail::put_le<uint64_t>(out, msg.seq);
  if (msg.dtype == WireDtype::f32) {
    for (double v : msg.tensor.data) {
      const float f = static_cast<float>(v);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      wire_detail::put_le<uint32_t>(out, u);
    }
  } else {
    for (double v : msg.tensor.data) {
      uint64_t u;
      std::memcpy(&u, &v, 8);
      wire_detail::put_le<uint64_t>(out, u);
    }
  }
  wire_detail::put_le<uint32_t>(out, crc32(out.data(), out.size()));
  return out;
}

// Decodes one message occupying exactly [data, data+len). `consumed` (when
// given) is useful for parsing concatenated frames; the frame length is
// derived from the header, and with consumed == nullptr any extra bytes
// are rejected as trailing_bytes.
inline WireError deserialize(const uint8_t* data, size_t len, WireMessage& out,
                             size_t* consumed = nullptr) {
  constexpr size_t kFixedHeader = 8;  // magic + version + type + dtype + ndim
  if (len < kFixedHeader) return WireError::truncated;
  if (std::memcmp(data, "SPLT", 4) != 0) return WireError::bad_magic;
  if (data[4] != 0x01) return WireError::bad_version;
  const uint8_t type = data[5];
  if (type < 0x01 || type > 0x03) return WireError::bad_type;
  const uint8_t dtype = data[6];
  if (dtype > 0x01) return WireError::bad_dtype;
  const uint8_t ndim = data[7];
  if (ndim == 0 || ndim > kWireMaxDims) return WireError::bad_shape;
  size_t off = kFixedHeader;
  if (len < off + 4ull * ndim + 8) return WireError::truncated;
  Shape shape(ndim);
  size_t numel = 1;
  for (size_t i = 0; i < ndim; ++i) {
    shape[i] = wire_detail::get_le<uint32_t>(data + off);
    off += 4;
    if (shape[i] == 0) return WireError::bad_shape;
    if (numel > kWireMaxPayload / shape[i]) return WireError::bad_shape;
    numel *= shape[i];
  }
  const uint64_t seq = wire_detail::get_le<uint64_t>(data + off);
  off += 8;
  const size_t elem = dtype == 0x00 ? 4 : 8;
  const size_t total = off + numel * elem + 4;
  if (len < total) return WireError::truncated;
  if (consumed == nullptr && len > total) return WireError::trailing_bytes;
  const uint32_t want = wire_detail::get_le<uint32_t>(data + total - 4);
  if (crc32(data, total - 4) != want) return WireError::crc_mismatch;
  out.type = static_cast<MsgType>(type);
  out.dtype = static_cast<WireDtype>(dtype);
  out.seq = seq;
  out.tensor = Tensor(shape);
  if (dtype == 0x00) {
    for (size_t i = 0; i < numel; ++i) {
      const uint32_t u = wire_detail::get_le<uint32_t>(data + off + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      out.tensor.data[i] = static_cast<double>(f);
    }
  } else {
    for (size_t i = 0; i < numel; ++i) {
      const uint64_t u = wire_detail::get_le<uint64_t>(data + off + 8 * i);
      double d;
      std::memcpy(&d, &u, 8);
      out.tensor.data[i] = d;
    }
  }
  if (consumed) *consumed = total;
  return WireError::ok;
}

inline WireError deserialize(const std::vector<uint8_t>& bytes, WireMessage& out) {
  return deserialize(bytes.data(), bytes.size(), out);
}

}  // namespace splitleak

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

namespace splitleak {

namespace detail {

// splitmix64 output mixer.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic PRNG with hierarchical stream derivation. A generator is
// identified by a 64-bit key; fork(stream) derives a child key from the
// parent's key alone, so draws from the parent never shift the children.
// This is what lets a sweep add grid points without perturbing the
// randomness of existing ones.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : key_(seed), state_(detail::mix64(seed + kGamma)) {}

  // Child generator for a named substream. Independent of this generator's
  // draw position; fork(k) always yields the same child for the same parent.
  Rng fork(uint64_t stream) const {
    return Rng(detail::mix64(key_ ^ detail::mix64(stream + kGamma)));
  }

  uint64_t next_u64() {
    state_ += kGamma;
    return detail::mix64(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire multiply-shift; bias is O(2^-64).
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Marsaglia polar method. Avoids sin/cos so the
  // only libm calls are log and sqrt. The spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  uint64_t key() const { return key_; }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  uint64_t key_;
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace splitleak

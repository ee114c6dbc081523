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
#include <vector>

// Small dense kernels backing the layer implementations. All accumulate
// into C; callers zero C when they want a plain product. The inner loops
// are axpy-shaped so the compiler can vectorize them without reordering
// any floating-point reduction, which keeps results bit-stable across
// vector widths.

namespace splitleak {

// C (m x n) += A (m x k) * B (k x n)
inline void gemm_nn(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
  size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + (i + 0) * n;
    double* c1 = c + (i + 1) * n;
    double* c2 = c + (i + 2) * n;
    double* c3 = c + (i + 3) * n;
    for (size_t p = 0; p < k; ++p) {
      const double a0 = a[(i + 0) * k + p];
      const double a1 = a[(i + 1) * k + p];
      const double a2 = a[(i + 2) * k + p];
      const double a3 = a[(i + 3) * k + p];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) {
        c0[j] = std::fma(a0, bp[j], c0[j]);
        c1[j] = std::fma(a1, bp[j], c1[j]);
        c2[j] = std::fma(a2, bp[j], c2[j]);
        c3[j] = std::fma(a3, bp[j], c3[j]);
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double ai = a[i * k + p];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] = std::fma(ai, bp[j], ci[j]);
    }
  }
}

// C (m x n) += A^T * B where A is (k x m), B is (k x n)
inline void gemm_tn(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
  size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + (i + 0) * n;
    double* c1 = c + (i + 1) * n;
    double* c2 = c + (i + 2) * n;
    double* c3 = c + (i + 3) * n;
    for (size_t p = 0; p < k; ++p) {
      const double* ap = a + p * m + i;
      const double a0 = ap[0], a1 = ap[1], a2 = ap[2], a3 = ap[3];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) {
        c0[j] = std::fma(a0, bp[j], c0[j]);
        c1[j] = std::fma(a1, bp[j], c1[j]);
        c2[j] = std::fma(a2, bp[j], c2[j]);
        c3[j] = std::fma(a3, bp[j], c3[j]);
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double ai = a[p * m + i];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] = std::fma(ai, bp[j], ci[j]);
    }
  }
}

// C (m x n) += A (m x k) * B^T where B is (n x k). Dot-product shape; used
// only on small operands (dense-layer backward).
inline void gemm_nt(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s = std::fma(ai[p], bj[p], s);
      ci[j] += s;
    }
  }
}

// dst (c x r) = src (r x c) transposed.
inline void transpose(const double* src, double* dst, size_t r, size_t c) {
  constexpr size_t kTile = 32;
  for (size_t i0 = 0; i0 < r; i0 += kTile)
    for (size_t j0 = 0; j0 < c; j0 += kTile) {
      const size_t i1 = (i0 + kTile < r) ? i0 + kTile : r;
      const size_t j1 = (j0 + kTile < c) ? j0 + kTile : c;
      for (size_t i = i0; i < i1; ++i)
        for (size_t j = j0; j < j1; ++j) dst[j * r + i] = src[i * c + j];
    }
}

inline size_t conv_out_extent(size_t in, size_t k, size_t stride, size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Unfold src (C x H x W) into dst (C*k*k x Ho*Wo) for a k x k window with
// the given stride and zero padding. Out-of-image taps are zero-filled.
inline void im2col(const double* src, size_t C, size_t H, size_t W,
                   size_t k, size_t stride, size_t pad, double* dst) {
  const size_t ho = conv_out_extent(H, k, stride, pad);
  const size_t wo = conv_out_extent(W, k, stride, pad);
  const size_t plane = H * W;
  double* out = dst;
  for (size_t c = 0; c < C; ++c) {
    const double* img = src + c * plane;
    for (size_t ki = 0; ki < k; ++ki) {
      for (size_t kj = 0; kj < k; ++kj) {
        // Valid output column range for this tap: 0 <= ox*stride + kj - pad < W.
        size_t ox_lo = (kj >= pad) ? 0 : (pad - kj + stride - 1) / stride;
        size_t ox_hi = 0;  // exclusive
        if (W + pad > kj) {
          ox_hi = (W + pad - kj - 1) / stride + 1;
          if (ox_hi > wo) ox_hi = wo;
        }
        if (ox_lo > ox_hi) ox_lo = ox_hi;
        for (size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
          double* row = out + oy * wo;
          if (iy < 0 || iy >= static_cast<long>(H)) {
            for (size_t ox = 0; ox < wo; ++ox) row[ox] = 0.0;
            continue;
          }
          const double* line = img + static_cast<size_t>(iy) * W;
          for (size_t ox = 0; ox < ox_lo; ++ox) row[ox] = 0.0;
          size_t ix = ox_lo * stride + kj - pad;
          for (size_t ox = ox_lo; ox < ox_hi; ++ox, ix += stride) row[ox] = line[ix];
          for (size_t ox = ox_hi; ox < wo; ++ox) row[ox] = 0.0;
        }
        out += ho * wo;
      }
    }
  }
}

// Adjoint of im2col: scatter-add dst (C*k*k x Ho*Wo) columns back into
// img (C x H x W). img is accumulated into, not overwritten.
inline void col2im(const double* cols, size_t C, size_t H, size_t W,
                   size_t k, size_t stride, size_t pad, double* img) {
  const size_t ho = conv_out_extent(H, k, stride, pad);
  const size_t wo = conv_out_extent(W, k, stride, pad);
  const size_t plane = H * W;
  const double* in = cols;
  for (size_t c = 0; c < C; ++c) {
    double* out_img = img + c * plane;
    for (size_t ki = 0; ki < k; ++ki) {
      for (size_t kj = 0; kj < k; ++kj) {
        size_t ox_lo = (kj >= pad) ? 0 : (pad - kj + stride - 1) / stride;
        size_t ox_hi = 0;
        if (W + pad > kj) {
          ox_hi = (W + pad - kj - 1) / stride + 1;
          if (ox_hi > wo) ox_hi = wo;
        }
        if (ox_lo > ox_hi) ox_lo = ox_hi;
        for (size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          const double* row = in + oy * wo;
          double* line = out_img + static_cast<size_t>(iy) * W;
          size_t ix = ox_lo * stride + kj - pad;
          for (size_t ox = ox_lo; ox < ox_hi; ++ox, ix += stride) line[ix] += row[ox];
        }
        in += ho * wo;
      }
    }
  }
}

}  // namespace splitleak

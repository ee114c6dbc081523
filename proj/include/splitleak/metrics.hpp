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
#include <limits>
#include <stdexcept>
#include <vector>

#include "splitleak/models.hpp"
#include "splitleak/tensor.hpp"

// Image-reconstruction quality metrics. Inputs are unit-scale pixels; all
// three metrics are computed on the 8-bit 0..255 scale:
//   mse   mean squared difference
//   psnr  10 * log10(255^2 / mse), +inf when the images are identical
//   ssim  11x11 Gaussian window (sigma 1.5), C1 = (0.01*255)^2,
//         C2 = (0.03*255)^2, averaged over valid window positions
// Batch aggregation averages each metric per image (PSNR is averaged over
// per-image values, not recomputed from pooled MSE).

namespace splitleak {

constexpr double kPixelScale = 255.0;
constexpr size_t kSsimWindow = 11;

struct MetricsRecord {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  size_t n_images = 0;
};

inline double mse(const Tensor& x, const Tensor& y) {
  if (x.shape != y.shape)
    throw std::invalid_argument("mse: shape mismatch " + shape_str(x.shape) + " vs " +
                                shape_str(y.shape));
  double total = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = (x.data[i] - y.data[i]) * kPixelScale;
    total += d * d;
  }
  return total / static_cast<double>(x.size());
}

inline double psnr_from_mse(double mse_value) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPixelScale * kPixelScale / mse_value);
}

inline double psnr(const Tensor& x, const Tensor& y) { return psnr_from_mse(mse(x, y)); }

namespace detail {

inline const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> win(kSsimWindow * kSsimWindow);
    const double sigma = 1.5;
    const double c = (kSsimWindow - 1) / 2.0;
    double sum = 0.0;
    for (size_t i = 0; i < kSsimWindow; ++i)
      for (size_t j = 0; j < kSsimWindow; ++j) {
        const double dy = static_cast<double>(i) - c, dx = static_cast<double>(j) - c;
        win[i * kSsimWindow + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        sum += win[i * kSsimWindow + j];
      }
    for (double& v : win) v /= sum;
    return win;
  }();
  return w;
}

}  // namespace detail

inline double ssim(const Tensor& x, const Tensor& y) {
  if (x.shape != y.shape)
    throw std::invalid_argument("ssim: shape mismatch " + shape_str(x.shape) + " vs " +
                                shape_str(y.shape));
  if (x.shape.size() != 3 || x.shape[0] != 1)
    throw std::invalid_argument("ssim: expected (1,H,W) images, got " + shape_str(x.shape));
  const size_t h = x.shape[1], w = x.shape[2];
  if (h < kSsimWindow || w < kSsimWindow)
    throw std::invalid_argument("ssim: image " + shape_str(x.shape) + " smaller than the " +
                                std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) +
                                " window");
  const std::vector<double>& win = detail::ssim_window();
  constexpr double kC1 = (0.01 * kPixelScale) * (0.01 * kPixelScale);
  constexpr double kC2 = (0.03 * kPixelScale) * (0.03 * kPixelScale);
  double total = 0.0;
  size_t count = 0;
  for (size_t oy = 0; oy + kSsimWindow <= h; ++oy)
    for (size_t ox = 0; ox + kSsimWindow <= w; ++ox) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (size_t i = 0; i < kSsimWindow; ++i) {
        const double* rx = x.data.data() + (oy + i) * w + ox;
        const double* ry = y.data.data() + (oy + i) * w + ox;
        const double* wr = win.data() + i * kSsimWindow;
        for (size_t j = 0; j < kSsimWindow; ++j) {
          const double a = rx[j] * kPixelScale, b = ry[j] * kPixelScale;
          mx += wr[j] * a;
          my += wr[j] * b;
          sxx += wr[j] * a * a;
          syy += wr[j] * b * b;
          sxy += wr[j] * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total += num / den;
      ++count;
    }
  return total / static_cast<double>(count);
}

// Per-image metrics averaged over a batch of image pairs.
inline MetricsRecord batch_metrics(const std::vector<Tensor>& originals,
                                   const std::vector<Tensor>& recovered) {
  if (originals.size() != recovered.size())
    throw std::invalid_argument("batch_metrics: count mismatch: " +
                                std::to_string(originals.size()) + " vs " +
                                std::to_string(recovered.size()));
  if (originals.empty()) throw std::invalid_argument("batch_metrics: empty batch");
  MetricsRecord rec;
  rec.n_images = originals.size();
  for (size_t i = 0; i < originals.size(); ++i) {
    const double m = mse(originals[i], recovered[i]);
    rec.mse += m;
    rec.psnr += psnr_from_mse(m);
    rec.ssim += ssim(originals[i], recovered[i]);
  }
  const double n = static_cast<double>(rec.n_images);
  rec.mse /= n;
  rec.psnr /= n;
  rec.ssim /= n;
  return rec;
}

// Top-1 accuracy of a softmax classifier over a batched input.
inline double accuracy(StackSlice model, const Tensor& x, const std::vector<int>& labels) {
  const size_t n = x.shape.empty() ? 0 : x.shape[0];
  if (n == 0 || labels.size() != n)
    throw std::invalid_argument("accuracy: empty input or label count mismatch");
  Tensor probs = predict(model, x);
  const size_t c = probs.shape[1];
  size_t correct = 0;
  for (size_t r = 0; r < n; ++r)
    if (argmax_row(probs.data.data() + r * c, c) == static_cast<size_t>(labels[r])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Mean and sample standard deviation (n - 1 denominator; 0 for n = 1).
inline std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: empty input");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace splitleak

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
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitleak/data.hpp"
#include "splitleak/tensor.hpp"

// Binary PGM (P5, maxval 255) image interchange. Pixels are scaled to
// [0, 1] on load by dividing by 255 and quantized back on save, so a
// save/load round-trip of quantized data is exact.

namespace splitleak {

struct PgmImage {
  size_t width = 0, height = 0;
  std::vector<uint8_t> pixels;  // row-major
};

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {  // comment to end of line
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) return 0;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok.empty() ? -1 : 0;
}

}  // namespace detail

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string tok;
  if (detail::pgm_next_token(f, tok) != 0 || tok != "P5")
    throw std::runtime_error("read_pgm: " + path + " is not binary PGM (P5)");
  auto read_uint = [&](const char* what) -> size_t {
    if (detail::pgm_next_token(f, tok) != 0)
      throw std::runtime_error("read_pgm: " + path + " truncated header (" + what + ")");
    try {
      return static_cast<size_t>(std::stoul(tok));
    } catch (...) {
      throw std::runtime_error("read_pgm: " + path + " bad " + std::string(what) + " '" + tok + "'");
    }
  };
  PgmImage img;
  img.width = read_uint("width");
  img.height = read_uint("height");
  const size_t maxval = read_uint("maxval");
  if (maxval != 255)
    throw std::runtime_error("read_pgm: " + path + " has unsupported maxval " +
                             std::to_string(maxval) + " (only 255)");
  img.pixels.resize(img.width * img.height);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<size_t>(f.gcount()) != img.pixels.size())
    throw std::runtime_error("read_pgm: " + path + " truncated pixel data");
  return img;
}

inline void write_pgm(const std::string& path, size_t width, size_t height,
                      const std::vector<uint8_t>& pixels) {
  if (pixels.size() != width * height) throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
  f << "P5\n" << width << " " << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline uint8_t to_byte_pixel(double v) {
  const double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

// Writes a (1, side, side) tensor of unit-scale pixels.
inline void write_pgm(const std::string& path, const Tensor& image) {
  if (image.shape.size() != 3 || image.shape[0] != 1)
    throw std::invalid_argument("write_pgm: expected a (1,H,W) image, got " + shape_str(image.shape));
  std::vector<uint8_t> px(image.size());
  for (size_t i = 0; i < image.size(); ++i) px[i] = to_byte_pixel(image.data[i]);
  write_pgm(path, image.shape[2], image.shape[1], px);
}

// Loads a directory of PGM files listed in a `filename,label` CSV. All
// images must share one size.
inline ImageDataset load_pgm(const std::string& dir_path, const std::string& labels_csv) {
  std::ifstream f(labels_csv);
  if (!f) throw std::runtime_error("load_pgm: cannot open " + labels_csv);
  ImageDataset ds;
  std::string line;
  size_t row = 0;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw std::runtime_error("load_pgm: " + labels_csv + " row " + std::to_string(row) +
                               ": expected 'filename,label'");
    if (row == 1 && detail::trim(cells[0]) == "filename") continue;  // optional header
    const std::string name = detail::trim(cells[0]);
    int label;
    try {
      label = std::stoi(detail::trim(cells[1]));
    } catch (...) {
      throw std::runtime_error("load_pgm: " + labels_csv + " row " + std::to_string(row) +
                               ": bad label '" + cells[1] + "'");
    }
    const PgmImage img = read_pgm(dir_path + "/" + name);
    if (!ds.images.empty() &&
        (img.height != ds.images[0].shape[1] || img.width != ds.images[0].shape[2]))
      throw std::runtime_error("load_pgm: " + name + " is " + std::to_string(img.width) + "x" +
                               std::to_string(img.height) + " but earlier images are " +
                               std::to_string(ds.images[0].shape[2]) + "x" +
                               std::to_string(ds.images[0].shape[1]));
    Tensor t({1, img.height, img.width});
    for (size_t i = 0; i < img.pixels.size(); ++i)
      t.data[i] = static_cast<double>(img.pixels[i]) / 255.0;
    ds.images.push_back(std::move(t));
    ds.labels.push_back(label);
  }
  return ds;
}

// Tiles (original, recovered) image pairs into one grid image: each row is
// original | recovered.
inline void write_pgm_pair_grid(const std::string& path, const std::vector<Tensor>& originals,
                                const std::vector<Tensor>& recovered) {
  if (originals.size() != recovered.size() || originals.empty())
    throw std::invalid_argument("write_pgm_pair_grid: count mismatch or empty");
  const size_t side = originals[0].shape[1];
  const size_t rows = originals.size();
  std::vector<uint8_t> px(rows * side * 2 * side);
  for (size_t r = 0; r < rows; ++r)
    for (size_t y = 0; y < side; ++y)
      for (size_t x = 0; x < side; ++x) {
        px[(r * side + y) * 2 * side + x] = to_byte_pixel(originals[r].data[y * side + x]);
        px[(r * side + y) * 2 * side + side + x] = to_byte_pixel(recovered[r].data[y * side + x]);
      }
  write_pgm(path, 2 * side, rows * side, px);
}

}  // namespace splitleak

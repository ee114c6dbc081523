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
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitleak/rng.hpp"
#include "splitleak/tensor.hpp"

namespace splitleak {

// Describes one column of a tabular dataset. Categorical attributes carry
// an explicit level list; numeric ones are discretized by half-open bins
// [edge_i, edge_{i+1}).
struct AttributeDesc {
  std::string name;
  bool categorical = true;
  std::vector<std::string> levels;  // categorical
  std::vector<double> bin_edges;    // numeric; strictly increasing
  bool sensitive = false;

  size_t level_count() const {
    return categorical ? levels.size() : (bin_edges.size() - 1);
  }
};

struct AttributeSchema {
  std::vector<AttributeDesc> attributes;
  std::string label_column;
  size_t classes = 2;

  size_t attribute_index(const std::string& name) const {
    for (size_t i = 0; i < attributes.size(); ++i)
      if (attributes[i].name == name) return i;
    throw std::invalid_argument("schema: no attribute named " + name);
  }
};

struct TabularDataset {
  std::vector<std::vector<int>> records;  // level indices, schema order
  std::vector<int> labels;
  AttributeSchema schema;

  size_t size() const { return records.size(); }
};

struct ImageDataset {
  std::vector<Tensor> images;  // each (1, side, side), values in [0,1]
  std::vector<int> labels;

  size_t size() const { return images.size(); }
  size_t side() const { return images.empty() ? 0 : images[0].shape[1]; }

  // Stacks images [first, last) into an (N,1,side,side) tensor.
  Tensor batch(size_t first, size_t last) const {
    const size_t s = side();
    Tensor out({last - first, 1, s, s});
    for (size_t i = first; i < last; ++i)
      std::copy(images[i].data.begin(), images[i].data.end(),
                out.data.begin() + static_cast<long>((i - first) * s * s));
    return out;
  }
};

// Per-attribute marginal distributions over levels, all entries positive.
struct PriorTable {
  std::vector<std::vector<double>> by_attribute;
};

// ---------------------------------------------------------------------------
// Schema files

inline AttributeSchema parse_schema(const nlohmann::json& j) {
  AttributeSchema schema;
  if (!j.contains("attributes") || !j["attributes"].is_array() || j["attributes"].empty())
    throw std::runtime_error("schema: needs a non-empty attributes array");
  for (const auto& a : j["attributes"]) {
    AttributeDesc d;
    d.name = a.at("name").get<std::string>();
    const std::string kind = a.at("kind").get<std::string>();
    if (kind == "categorical") {
      d.categorical = true;
      d.levels = a.at("levels").get<std::vector<std::string>>();
      if (d.levels.size() < 2)
        throw std::runtime_error("schema: attribute " + d.name + " needs >= 2 levels");
    } else if (kind == "numeric") {
      d.categorical = false;
      d.bin_edges = a.at("bin_edges").get<std::vector<double>>();
      if (d.bin_edges.size() < 2)
        throw std::runtime_error("schema: attribute " + d.name + " needs >= 2 bin edges");
      for (size_t i = 1; i < d.bin_edges.size(); ++i)
        if (!(d.bin_edges[i - 1] < d.bin_edges[i]))
          throw std::runtime_error("schema: bin edges for " + d.name +
                                   " must be strictly increasing");
    } else {
      throw std::runtime_error("schema: attribute " + d.name + " has unknown kind '" + kind +
                               "' (expected categorical or numeric)");
    }
    d.sensitive = a.value("sensitive", false);
    schema.attributes.push_back(std::move(d));
  }
  schema.label_column = j.at("label").get<std::string>();
  schema.classes = j.at("classes").get<size_t>();
  if (schema.classes < 2) throw std::runtime_error("schema: classes must be >= 2");
  return schema;
}

inline AttributeSchema load_schema(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("schema: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("schema: invalid JSON in " + path + ": " + e.what());
  }
  return parse_schema(j);
}

inline nlohmann::json schema_to_json(const AttributeSchema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : schema.attributes) {
    nlohmann::json ja;
    ja["name"] = a.name;
    ja["kind"] = a.categorical ? "categorical" : "numeric";
    if (a.categorical)
      ja["levels"] = a.levels;
    else
      ja["bin_edges"] = a.bin_edges;
    ja["sensitive"] = a.sensitive;
    attrs.push_back(std::move(ja));
  }
  return {{"attributes", std::move(attrs)},
          {"label", schema.label_column},
          {"classes", schema.classes}};
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Loads a CSV whose header row names every schema column. Categorical cells
// map to their level index, numeric cells to their bin index. Any
// unmappable cell fails the load; the error lists every offending
// row/column coordinate.
inline TabularDataset load_tabular(const std::string& csv_path, const std::string& schema_path) {
  AttributeSchema schema = load_schema(schema_path);
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("load_tabular: cannot open " + csv_path);
  std::string header_line;
  if (!std::getline(f, header_line))
    throw std::runtime_error("load_tabular: " + csv_path + " is empty (missing header)");
  const std::vector<std::string> header = detail::split_csv_line(header_line);
  auto column_of = [&](const std::string& name) -> size_t {
    for (size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw std::runtime_error("load_tabular: missing column '" + name + "' in " + csv_path);
  };
  std::vector<size_t> attr_col(schema.attributes.size());
  for (size_t a = 0; a < schema.attributes.size(); ++a)
    attr_col[a] = column_of(schema.attributes[a].name);
  const size_t label_col = column_of(schema.label_column);

  TabularDataset ds;
  ds.schema = schema;
  std::vector<std::string> problems;
  std::string line;
  size_t row = 1;  // header is row 0
  while (std::getline(f, line)) {
    if (line.empty()) {
      ++row;
      continue;
    }
    const std::vector<std::string> cells = detail::split_csv_line(line);
    std::vector<int> rec(schema.attributes.size());
    bool ok = true;
    for (size_t a = 0; a < schema.attributes.size(); ++a) {
      const AttributeDesc& d = schema.attributes[a];
      if (attr_col[a] >= cells.size()) {
        problems.push_back("row " + std::to_string(row) + ", column " + d.name + ": missing cell");
        ok = false;
        continue;
      }
      const std::string cell = detail::trim(cells[attr_col[a]]);
      if (d.categorical) {
        auto it = std::find(d.levels.begin(), d.levels.end(), cell);
        if (it == d.levels.end()) {
          problems.push_back("row " + std::to_string(row) + ", column " + d.name +
                             ": unknown level '" + cell + "'");
          ok = false;
          continue;
        }
        rec[a] = static_cast<int>(it - d.levels.begin());
      } else {
        double v;
        try {
          v = std::stod(cell);
        } catch (...) {
          problems.push_back("row " + std::to_string(row) + ", column " + d.name +
                             ": not a number '" + cell + "'");
          ok = false;
          continue;
        }
        if (v < d.bin_edges.front() || v >= d.bin_edges.back()) {
          problems.push_back("row " + std::to_string(row) + ", column " + d.name + ": value " +
                             cell + " outside all bins");
          ok = false;
          continue;
        }
        size_t bin = 0;
        while (bin + 2 < d.bin_edges.size() && v >= d.bin_edges[bin + 1]) ++bin;
        rec[a] = static_cast<int>(bin);
      }
    }
    int label = -1;
    if (label_col >= cells.size()) {
      problems.push_back("row " + std::to_string(row) + ", column " + schema.label_column +
                         ": missing cell");
      ok = false;
    } else {
      const std::string cell = detail::trim(cells[label_col]);
      try {
        label = std::stoi(cell);
      } catch (...) {
        problems.push_back("row " + std::to_string(row) + ", column " + schema.label_column +
                           ": not an integer '" + cell + "'");
        ok = false;
      }
      if (ok && (label < 0 || static_cast<size_t>(label) >= schema.classes)) {
        problems.push_back("row " + std::to_string(row) + ", column " + schema.label_column +
                           ": label " + cell + " outside [0," + std::to_string(schema.classes) +
                           ")");
        ok = false;
      }
    }
    if (ok) {
      ds.records.push_back(std::move(rec));
      ds.labels.push_back(label);
    }
    ++row;
  }
  if (!problems.empty()) {
    std::string msg = "load_tabular: " + std::to_string(problems.size()) + " bad cell(s) in " +
                      csv_path + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  return ds;
}

inline void save_tabular(const std::string& csv_path, const TabularDataset& ds) {
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_tabular: cannot open " + csv_path);
  for (size_t a = 0; a < ds.schema.attributes.size(); ++a)
    f << (a ? "," : "") << ds.schema.attributes[a].name;
  f << "," << ds.schema.label_column << "\n";
  for (size_t r = 0; r < ds.size(); ++r) {
    for (size_t a = 0; a < ds.schema.attributes.size(); ++a) {
      const AttributeDesc& d = ds.schema.attributes[a];
      const int idx = ds.records[r][a];
      if (d.categorical)
        f << (a ? "," : "") << d.levels[static_cast<size_t>(idx)];
      else
        f << (a ? "," : "") << 0.5 * (d.bin_edges[idx] + d.bin_edges[idx + 1]);
    }
    f << "," << ds.labels[r] << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic generators

// Tabular generator with planted signal: the label is a fair coin, one
// sensitive binary attribute agrees with the label with probability 0.85,
// two more attributes agree with probability 0.7 each, and six attributes
// are uniform noise.
inline TabularDataset synth_tabular(size_t n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_tabular: n must be >= 1");
  AttributeSchema schema;
  auto binary = [](std::string name, bool sensitive) {
    AttributeDesc d;
    d.name = std::move(name);
    d.categorical = true;
    d.levels = {"0", "1"};
    d.sensitive = sensitive;
    return d;
  };
  schema.attributes.push_back(binary("sensitive", true));
  schema.attributes.push_back(binary("corr1", false));
  schema.attributes.push_back(binary("corr2", false));
  for (int i = 1; i <= 6; ++i) schema.attributes.push_back(binary("noise" + std::to_string(i), false));
  schema.label_column = "label";
  schema.classes = 2;

  Rng rng = Rng(seed).fork(0x746162);  // "tab"
  TabularDataset ds;
  ds.schema = schema;
  ds.records.reserve(n);
  ds.labels.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    std::vector<int> rec(9);
    rec[0] = rng.bernoulli(0.85) ? y : 1 - y;
    rec[1] = rng.bernoulli(0.7) ? y : 1 - y;
    rec[2] = rng.bernoulli(0.7) ? y : 1 - y;
    for (int a = 3; a < 9; ++a) rec[a] = rng.bernoulli(0.5) ? 1 : 0;
    ds.records.push_back(std::move(rec));
    ds.labels.push_back(y);
  }
  return ds;
}

// Grayscale image generator. Class 0 is a smooth low-frequency background
// with mild pixel noise; class 1 adds one bright soft-edged ellipse of
// random center, axes, orientation and intensity. The ellipse is bright
// against a dim background so the class margin survives parameter-noise
// deployments. Labels alternate so the classes stay balanced. All pixels
// are clipped to [0, 1].
inline ImageDataset synth_images(size_t n, size_t side, uint64_t seed) {
  if (side % 8 != 0) throw std::invalid_argument("synth_images: side must be divisible by 8");
  Rng rng = Rng(seed).fork(0x696D67);  // "img"
  ImageDataset ds;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  const double s = static_cast<double>(side);
  for (size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double f1x = rng.uniform(0.6, 1.8), f1y = rng.uniform(0.6, 1.8);
    const double f2x = rng.uniform(0.6, 1.8), f2y = rng.uniform(0.6, 1.8);
    const double ph1 = rng.uniform(0.0, 6.283185307179586);
    const double ph2 = rng.uniform(0.0, 6.283185307179586);
    const double a1 = rng.uniform(0.04, 0.10), a2 = rng.uniform(0.04, 0.10);
    double cx = 0, cy = 0, ax = 0, ay = 0, ang = 0, intensity = 0;
    if (label == 1) {
      cx = rng.uniform(0.3, 0.7) * s;
      cy = rng.uniform(0.3, 0.7) * s;
      ax = rng.uniform(0.20, 0.30) * s;
      ay = rng.uniform(0.20, 0.30) * s;
      ang = rng.uniform(0.0, 3.141592653589793);
      intensity = rng.uniform(0.70, 0.90);
    }
    const double ca = std::cos(ang), sa = std::sin(ang);
    Tensor img({1, side, side});
    for (size_t y = 0; y < side; ++y)
      for (size_t x = 0; x < side; ++x) {
        const double xf = static_cast<double>(x) / s, yf = static_cast<double>(y) / s;
        double v = 0.20 + a1 * std::sin(6.283185307179586 * (f1x * xf + f1y * yf) + ph1) +
                   a2 * std::sin(6.283185307179586 * (f2x * xf + f2y * yf) + ph2);
        v += rng.uniform(-0.02, 0.02);
        if (label == 1) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          const double u = (ca * dx + sa * dy) / ax;
          const double w = (-sa * dx + ca * dy) / ay;
          const double r2 = u * u + w * w;
          if (r2 < 1.0) v += intensity * (1.0 - r2);
        }
        img.data[y * side + x] = std::clamp(v, 0.0, 1.0);
      }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting and priors

// Deterministic shuffled partition; |train| = round(fraction * n).
template <typename Dataset>
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double fraction, uint64_t seed) {
  const size_t n = ds.size();
  if (n < 2) throw std::invalid_argument("split_train_test: need at least 2 examples");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_train_test: fraction must be in (0,1)");
  Rng rng = Rng(seed).fork(0x73706C69);  // "spli"
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  size_t n_train = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0) n_train = 1;
  if (n_train == n) n_train = n - 1;
  Dataset train, test;
  if constexpr (std::is_same_v<Dataset, TabularDataset>) {
    train.schema = ds.schema;
    test.schema = ds.schema;
  }
  for (size_t i = 0; i < n; ++i) {
    Dataset& dst = (i < n_train) ? train : test;
    if constexpr (std::is_same_v<Dataset, TabularDataset>)
      dst.records.push_back(ds.records[idx[i]]);
    else
      dst.images.push_back(ds.images[idx[i]]);
    dst.labels.push_back(ds.labels[idx[i]]);
  }
  return {std::move(train), std::move(test)};
}

// Add-one smoothed level frequencies of one attribute.
inline std::vector<double> estimate_priors(const TabularDataset& train, size_t attr) {
  if (attr >= train.schema.attributes.size())
    throw std::invalid_argument("estimate_priors: attribute index out of range");
  const size_t levels = train.schema.attributes[attr].level_count();
  std::vector<double> counts(levels, 1.0);
  for (const auto& rec : train.records) counts[static_cast<size_t>(rec[attr])] += 1.0;
  const double total = static_cast<double>(train.size()) + static_cast<double>(levels);
  for (double& c : counts) c /= total;
  return counts;
}

inline PriorTable estimate_prior_table(const TabularDataset& train) {
  PriorTable table;
  table.by_attribute.reserve(train.schema.attributes.size());
  for (size_t a = 0; a < train.schema.attributes.size(); ++a)
    table.by_attribute.push_back(estimate_priors(train, a));
  return table;
}

// ---------------------------------------------------------------------------
// Feature preparation for the MLP

// Per-attribute z-scoring of level indices, fit on the training split.
struct Standardizer {
  std::vector<double> mean, stdev;

  void fit(const TabularDataset& train) {
    const size_t d = train.schema.attributes.size();
    mean.assign(d, 0.0);
    stdev.assign(d, 0.0);
    const double n = static_cast<double>(train.size());
    for (const auto& rec : train.records)
      for (size_t a = 0; a < d; ++a) mean[a] += rec[a];
    for (size_t a = 0; a < d; ++a) mean[a] /= n;
    for (const auto& rec : train.records)
      for (size_t a = 0; a < d; ++a) {
        const double dv = rec[a] - mean[a];
        stdev[a] += dv * dv;
      }
    for (size_t a = 0; a < d; ++a) {
      stdev[a] = std::sqrt(stdev[a] / n);
      if (stdev[a] < 1e-12) stdev[a] = 1.0;  // constant column
    }
  }

  Tensor transform(const std::vector<std::vector<int>>& records) const {
    const size_t d = mean.size();
    Tensor x({records.size(), d});
    for (size_t r = 0; r < records.size(); ++r)
      for (size_t a = 0; a < d; ++a)
        x.data[r * d + a] = (records[r][a] - mean[a]) / stdev[a];
    return x;
  }

  Tensor transform_one(const std::vector<int>& record) const {
    return transform(std::vector<std::vector<int>>{record});
  }
};

}  // namespace splitleak

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

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "splitleak/attacks.hpp"
#include "splitleak/checkpoint.hpp"
#include "splitleak/data.hpp"
#include "splitleak/defenses.hpp"
#include "splitleak/metrics.hpp"
#include "splitleak/models.hpp"
#include "splitleak/pgm.hpp"
#include "splitleak/protocol.hpp"
#include "splitleak/svg.hpp"

// JSON-configured experiment pipelines. Both experiment kinds write
// deterministic CSV detail/aggregate tables, an SVG trend plot, and a
// JSON summary; the inversion pipeline also dumps PGM grids of
// (original, recovered) image pairs. Seeds fan out hierarchically
// (master -> repetition -> component), so adding a sweep point never
// shifts the randomness of the others.

namespace splitleak {

enum class ExperimentKind { attr_attack, inversion_attack };

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | files
  size_t n = 0;                      // synthetic pool size (pre-split)
  double split_fraction = 0.8;
  size_t image_side = 32;
  std::string csv, schema;           // tabular files
  std::string images_dir, labels_csv;  // image files
};

struct ModelConfig {
  size_t classes = 2;
  size_t hidden_width = 128;
};

struct InversionAttackSettings {
  size_t query_set_size = 512;
  size_t eval_set_size = 64;
  size_t epochs = 15;
  size_t batch_size = 16;
  double learning_rate = 1e-3;
  size_t recon_pairs = 8;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::attr_attack;
  uint64_t seed = 42;
  std::string out_dir = "out";
  size_t repetitions = 10;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  std::vector<double> flip_probabilities{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> sigmas{0.0, 0.02, 0.05};
  std::vector<int> cut_points{2, 4, 6};
  std::vector<std::string> target_attributes;  // empty = every sensitive attribute
  AttrScoring scoring = AttrScoring::soft_confidence;
  InversionAttackSettings attack;
};

struct ConfigError {
  std::string pointer;  // JSON pointer of the offending field
  std::string message;
};

// Seed substream tags.
namespace streams {
constexpr uint64_t kData = 1;
constexpr uint64_t kRep = 2;
constexpr uint64_t kSplit = 3;
constexpr uint64_t kModel = 4;
constexpr uint64_t kTrain = 5;
constexpr uint64_t kDefense = 6;
constexpr uint64_t kPerturb = 7;
constexpr uint64_t kDecoder = 8;
constexpr uint64_t kAttackTrain = 9;
}  // namespace streams

// ---------------------------------------------------------------------------
// Formatting and small file helpers

// Locale-independent decimal formatting, 9 significant digits.
inline std::string fmt9(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline std::string fmt_short(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs fn(0..count) across up to `threads` workers. Tasks must be
// independent; outputs keyed by index stay deterministic regardless of
// scheduling. The first exception is rethrown after all workers join.
inline void parallel_for(size_t count, unsigned threads,
                         const std::function<void(size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<size_t>(threads, count));
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Config parsing and validation

namespace detail {

inline void check_known_keys(const nlohmann::json& j, const std::string& pointer,
                             std::initializer_list<const char*> known,
                             std::vector<ConfigError>& errors) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) errors.push_back({pointer + "/" + it.key(), "unknown field"});
  }
}

template <typename T>
std::optional<T> take(const nlohmann::json& j, const char* key, const std::string& pointer,
                      std::vector<ConfigError>& errors) {
  if (!j.contains(key)) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    errors.push_back({pointer + "/" + key, "wrong type"});
    return std::nullopt;
  }
}

}  // namespace detail

// Fills defaults and collects every problem instead of stopping at the
// first. An empty error list means `config` is ready to run.
inline std::vector<ConfigError> validate_config(const nlohmann::json& j, ExperimentConfig& config) {
  std::vector<ConfigError> errors;
  if (!j.is_object()) {
    errors.push_back({"", "config must be a JSON object"});
    return errors;
  }
  detail::check_known_keys(j, "",
                           {"kind", "seed", "out_dir", "repetitions", "dataset", "model", "train",
                            "defense", "cut_points", "target_attributes", "scoring", "attack"},
                           errors);

  const auto kind = detail::take<std::string>(j, "kind", "", errors);
  if (!kind.has_value()) {
    if (!j.contains("kind")) errors.push_back({"/kind", "required field is missing"});
  } else if (*kind == "attr-attack") {
    config.kind = ExperimentKind::attr_attack;
  } else if (*kind == "inversion-attack") {
    config.kind = ExperimentKind::inversion_attack;
  } else {
    errors.push_back({"/kind", "unknown experiment kind '" + *kind +
                              "' (valid kinds: attr-attack, inversion-attack)"});
  }
  const bool attr = config.kind == ExperimentKind::attr_attack;

  config.seed = detail::take<uint64_t>(j, "seed", "", errors).value_or(42);
  config.out_dir = detail::take<std::string>(j, "out_dir", "", errors).value_or("out");
  config.repetitions = detail::take<size_t>(j, "repetitions", "", errors).value_or(10);
  if (config.repetitions < 1) errors.push_back({"/repetitions", "must be >= 1"});

  // Defaults that differ by kind.
  config.dataset.n = attr ? 5000 : 2500;
  config.train.epochs = attr ? 40 : 2;
  config.train.batch_size = 32;

  if (j.contains("dataset")) {
    const nlohmann::json& d = j["dataset"];
    if (!d.is_object()) {
      errors.push_back({"/dataset", "must be an object"});
    } else {
      detail::check_known_keys(
          d, "/dataset",
          {"source", "n", "split_fraction", "image_side", "csv", "schema", "images_dir",
           "labels_csv"},
          errors);
      config.dataset.source = detail::take<std::string>(d, "source", "/dataset", errors)
                                  .value_or(config.dataset.source);
      if (config.dataset.source != "synthetic" && config.dataset.source != "files")
        errors.push_back({"/dataset/source", "must be 'synthetic' or 'files'"});
      config.dataset.n = detail::take<size_t>(d, "n", "/dataset", errors).value_or(config.dataset.n);
      config.dataset.split_fraction =
          detail::take<double>(d, "split_fraction", "/dataset", errors)
              .value_or(config.dataset.split_fraction);
      config.dataset.image_side =
          detail::take<size_t>(d, "image_side", "/dataset", errors).value_or(config.dataset.image_side);
      config.dataset.csv = detail::take<std::string>(d, "csv", "/dataset", errors).value_or("");
      config.dataset.schema = detail::take<std::string>(d, "schema", "/dataset", errors).value_or("");
      config.dataset.images_dir =
          detail::take<std::string>(d, "images_dir", "/dataset", errors).value_or("");
      config.dataset.labels_csv =
          detail::take<std::string>(d, "labels_csv", "/dataset", errors).value_or("");
    }
  }
  if (config.dataset.source == "synthetic" && config.dataset.n < 2)
    errors.push_back({"/dataset/n", "must be >= 2"});
  if (!(config.dataset.split_fraction > 0.0 && config.dataset.split_fraction < 1.0))
    errors.push_back({"/dataset/split_fraction", "must be in (0,1)"});
  if (!attr && config.dataset.image_side % 8 != 0)
    errors.push_back({"/dataset/image_side", "must be divisible by 8"});
  if (config.dataset.source == "files") {
    auto need = [&](const std::string& value, const char* field) {
      if (value.empty())
        errors.push_back({std::string("/dataset/") + field, "required when source is 'files'"});
      else if (!std::filesystem::exists(value))
        errors.push_back({std::string("/dataset/") + field, "path does not exist: " + value});
    };
    if (attr) {
      need(config.dataset.csv, "csv");
      need(config.dataset.schema, "schema");
    } else {
      need(config.dataset.images_dir, "images_dir");
      need(config.dataset.labels_csv, "labels_csv");
    }
  }

  if (j.contains("model")) {
    const nlohmann::json& m = j["model"];
    if (!m.is_object()) {
      errors.push_back({"/model", "must be an object"});
    } else {
      detail::check_known_keys(m, "/model", {"classes", "hidden_width"}, errors);
      config.model.classes =
          detail::take<size_t>(m, "classes", "/model", errors).value_or(config.model.classes);
      config.model.hidden_width = detail::take<size_t>(m, "hidden_width", "/model", errors)
                                      .value_or(config.model.hidden_width);
    }
  }
  if (config.model.classes < 2) errors.push_back({"/model/classes", "must be >= 2"});
  if (config.model.hidden_width < 1) errors.push_back({"/model/hidden_width", "must be >= 1"});

  if (j.contains("train")) {
    const nlohmann::json& t = j["train"];
    if (!t.is_object()) {
      errors.push_back({"/train", "must be an object"});
    } else {
      detail::check_known_keys(t, "/train",
                               {"batch_size", "epochs", "learning_rate", "optimizer"}, errors);
      config.train.batch_size =
          detail::take<size_t>(t, "batch_size", "/train", errors).value_or(config.train.batch_size);
      config.train.epochs =
          detail::take<size_t>(t, "epochs", "/train", errors).value_or(config.train.epochs);
      config.train.learning_rate = detail::take<double>(t, "learning_rate", "/train", errors)
                                       .value_or(config.train.learning_rate);
      const auto opt = detail::take<std::string>(t, "optimizer", "/train", errors);
      if (opt.has_value()) {
        if (*opt == "adam")
          config.train.optimizer = OptimizerKind::adam;
        else if (*opt == "sgd")
          config.train.optimizer = OptimizerKind::sgd;
        else
          errors.push_back({"/train/optimizer", "must be 'adam' or 'sgd'"});
      }
    }
  }
  if (config.train.batch_size < 1) errors.push_back({"/train/batch_size", "must be >= 1"});
  if (!(config.train.learning_rate > 0.0))
    errors.push_back({"/train/learning_rate", "must be positive"});

  if (j.contains("defense")) {
    const nlohmann::json& d = j["defense"];
    if (!d.is_object()) {
      errors.push_back({"/defense", "must be an object"});
    } else {
      detail::check_known_keys(d, "/defense", {"flip_probabilities", "sigmas"}, errors);
      if (d.contains("flip_probabilities")) {
        const auto ps =
            detail::take<std::vector<double>>(d, "flip_probabilities", "/defense", errors);
        if (ps.has_value()) config.flip_probabilities = *ps;
      }
      if (d.contains("sigmas")) {
        const auto ss = detail::take<std::vector<double>>(d, "sigmas", "/defense", errors);
        if (ss.has_value()) config.sigmas = *ss;
      }
    }
  }
  if (config.flip_probabilities.empty())
    errors.push_back({"/defense/flip_probabilities", "sweep list must be non-empty"});
  for (size_t i = 0; i < config.flip_probabilities.size(); ++i)
    if (!(config.flip_probabilities[i] >= 0.0 && config.flip_probabilities[i] <= 1.0))
      errors.push_back({"/defense/flip_probabilities/" + std::to_string(i), "must be in [0,1]"});
  if (config.sigmas.empty()) errors.push_back({"/defense/sigmas", "sweep list must be non-empty"});
  for (size_t i = 0; i < config.sigmas.size(); ++i)
    if (!(config.sigmas[i] >= 0.0))
      errors.push_back({"/defense/sigmas/" + std::to_string(i), "must be >= 0"});

  if (j.contains("cut_points")) {
    const auto cuts = detail::take<std::vector<int>>(j, "cut_points", "", errors);
    if (cuts.has_value()) config.cut_points = *cuts;
  }
  if (config.cut_points.empty()) errors.push_back({"/cut_points", "sweep list must be non-empty"});
  for (size_t i = 0; i < config.cut_points.size(); ++i)
    if (config.cut_points[i] != 2 && config.cut_points[i] != 4 && config.cut_points[i] != 6)
      errors.push_back({"/cut_points/" + std::to_string(i), "must be one of {2, 4, 6}"});

  if (j.contains("target_attributes")) {
    const auto t = detail::take<std::vector<std::string>>(j, "target_attributes", "", errors);
    if (t.has_value()) config.target_attributes = *t;
  }

  const auto scoring = detail::take<std::string>(j, "scoring", "", errors);
  if (scoring.has_value()) {
    if (*scoring == "soft")
      config.scoring = AttrScoring::soft_confidence;
    else if (*scoring == "hard")
      config.scoring = AttrScoring::hard_label;
    else
      errors.push_back({"/scoring", "must be 'soft' or 'hard'"});
  }

  if (j.contains("attack")) {
    const nlohmann::json& a = j["attack"];
    if (!a.is_object()) {
      errors.push_back({"/attack", "must be an object"});
    } else {
      detail::check_known_keys(a, "/attack",
                               {"query_set_size", "eval_set_size", "epochs", "batch_size",
                                "learning_rate", "recon_pairs"},
                               errors);
      config.attack.query_set_size = detail::take<size_t>(a, "query_set_size", "/attack", errors)
                                         .value_or(config.attack.query_set_size);
      config.attack.eval_set_size = detail::take<size_t>(a, "eval_set_size", "/attack", errors)
                                        .value_or(config.attack.eval_set_size);
      config.attack.epochs =
          detail::take<size_t>(a, "epochs", "/attack", errors).value_or(config.attack.epochs);
      config.attack.batch_size = detail::take<size_t>(a, "batch_size", "/attack", errors)
                                     .value_or(config.attack.batch_size);
      config.attack.learning_rate = detail::take<double>(a, "learning_rate", "/attack", errors)
                                        .value_or(config.attack.learning_rate);
      config.attack.recon_pairs = detail::take<size_t>(a, "recon_pairs", "/attack", errors)
                                      .value_or(config.attack.recon_pairs);
    }
  }
  if (config.attack.batch_size < 1) errors.push_back({"/attack/batch_size", "must be >= 1"});
  if (config.attack.query_set_size < config.attack.batch_size)
    errors.push_back({"/attack/query_set_size", "must be >= attack batch_size"});
  if (config.attack.eval_set_size < 1) errors.push_back({"/attack/eval_set_size", "must be >= 1"});
  if (!(config.attack.learning_rate > 0.0))
    errors.push_back({"/attack/learning_rate", "must be positive"});
  return errors;
}

inline std::vector<ConfigError> validate_config_file(const std::string& path,
                                                     ExperimentConfig& config) {
  std::ifstream f(path);
  if (!f) return {{"", "cannot open config file " + path}};
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    return {{"", std::string("invalid JSON: ") + e.what()}};
  }
  return validate_config(j, config);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = c.kind == ExperimentKind::attr_attack ? "attr-attack" : "inversion-attack";
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["repetitions"] = c.repetitions;
  j["dataset"] = {{"source", c.dataset.source},
                  {"n", c.dataset.n},
                  {"split_fraction", c.dataset.split_fraction},
                  {"image_side", c.dataset.image_side}};
  if (c.dataset.source == "files") {
    if (c.kind == ExperimentKind::attr_attack) {
      j["dataset"]["csv"] = c.dataset.csv;
      j["dataset"]["schema"] = c.dataset.schema;
    } else {
      j["dataset"]["images_dir"] = c.dataset.images_dir;
      j["dataset"]["labels_csv"] = c.dataset.labels_csv;
    }
  }
  j["model"] = {{"classes", c.model.classes}, {"hidden_width", c.model.hidden_width}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"optimizer", to_string(c.train.optimizer)}};
  j["defense"] = {{"flip_probabilities", c.flip_probabilities}, {"sigmas", c.sigmas}};
  j["cut_points"] = c.cut_points;
  j["target_attributes"] = c.target_attributes;
  j["scoring"] = c.scoring == AttrScoring::soft_confidence ? "soft" : "hard";
  j["attack"] = {{"query_set_size", c.attack.query_set_size},
                 {"eval_set_size", c.attack.eval_set_size},
                 {"epochs", c.attack.epochs},
                 {"batch_size", c.attack.batch_size},
                 {"learning_rate", c.attack.learning_rate},
                 {"recon_pairs", c.attack.recon_pairs}};
  return j;
}

// ---------------------------------------------------------------------------
// Attribute-attack experiment

struct AttrDetailRow {
  std::string target;
  double flip_p = 0.0;
  size_t rep = 0;
  double attack_acc = 0.0;
  double test_acc = 0.0;
};

struct AttrExperimentResult {
  std::vector<AttrDetailRow> rows;
  std::vector<double> baselines;  // majority-prior baseline per target, mean over reps
  std::vector<std::string> targets;
};

namespace detail {

inline std::string attr_detail_csv(const std::vector<AttrDetailRow>& rows) {
  std::string out = "target_attr,flip_p,rep,attack_acc,test_acc\n";
  for (const auto& r : rows)
    out += r.target + "," + fmt9(r.flip_p) + "," + std::to_string(r.rep) + "," +
           fmt9(r.attack_acc) + "," + fmt9(r.test_acc) + "\n";
  return out;
}

inline std::string attr_aggregate_csv(const AttrExperimentResult& result,
                                      const std::vector<double>& flip_ps, size_t reps) {
  std::string out =
      "target_attr,flip_p,attack_acc_mean,attack_acc_std,test_acc_mean,test_acc_std\n";
  for (const auto& target : result.targets)
    for (double p : flip_ps) {
      std::vector<double> attack, test;
      for (const auto& r : result.rows)
        if (r.target == target && r.flip_p == p) {
          attack.push_back(r.attack_acc);
          test.push_back(r.test_acc);
        }
      (void)reps;
      auto [am, as] = mean_std(attack);
      auto [tm, ts] = mean_std(test);
      out += target + "," + fmt9(p) + "," + fmt9(am) + "," + fmt9(as) + "," + fmt9(tm) + "," +
             fmt9(ts) + "\n";
    }
  return out;
}

inline void attr_plot(const std::string& path, const AttrExperimentResult& result,
                      const std::vector<double>& flip_ps) {
  std::vector<PlotSeries> series;
  for (const auto& target : result.targets) {
    PlotSeries attack{"attack: " + target, {}, {}, {}};
    for (double p : flip_ps) {
      std::vector<double> vals;
      for (const auto& r : result.rows)
        if (r.target == target && r.flip_p == p) vals.push_back(r.attack_acc);
      auto [m, s] = mean_std(vals);
      attack.x.push_back(p);
      attack.y.push_back(m);
      attack.yerr.push_back(s);
    }
    series.push_back(std::move(attack));
  }
  PlotSeries test{"test accuracy", {}, {}, {}};
  for (double p : flip_ps) {
    std::vector<double> vals;
    for (const auto& r : result.rows)
      if (r.target == result.targets.front() && r.flip_p == p) vals.push_back(r.test_acc);
    auto [m, s] = mean_std(vals);
    test.x.push_back(p);
    test.y.push_back(m);
    test.yerr.push_back(s);
  }
  series.push_back(std::move(test));
  write_line_plot(path, "Label perturbation sweep", "flip probability", "accuracy", series);
}

}  // namespace detail

inline AttrExperimentResult run_attr_experiment(const ExperimentConfig& config,
                                                unsigned threads = 1) {
  if (config.kind != ExperimentKind::attr_attack)
    throw std::invalid_argument("run_attr_experiment: config kind is not attr-attack");
  std::filesystem::create_directories(config.out_dir);
  const Rng master(config.seed);

  TabularDataset pool = config.dataset.source == "synthetic"
                            ? synth_tabular(config.dataset.n, master.fork(streams::kData).key())
                            : load_tabular(config.dataset.csv, config.dataset.schema);
  if (pool.size() < 2) throw std::runtime_error("run_attr_experiment: dataset has fewer than 2 rows");

  // Resolve target attributes; default is every sensitive one.
  std::vector<std::string> targets = config.target_attributes;
  if (targets.empty())
    for (const auto& a : pool.schema.attributes)
      if (a.sensitive) targets.push_back(a.name);
  if (targets.empty())
    throw std::runtime_error("run_attr_experiment: schema has no sensitive attribute to target");
  std::vector<size_t> target_idx;
  for (const auto& t : targets) {
    const size_t idx = pool.schema.attribute_index(t);
    if (!pool.schema.attributes[idx].sensitive)
      throw std::runtime_error("run_attr_experiment: target attribute '" + t +
                               "' is not flagged sensitive in the schema");
    target_idx.push_back(idx);
  }

  struct RepOutput {
    std::vector<std::vector<double>> attack_acc;  // [target][p]
    std::vector<std::vector<double>> test_acc;
    std::vector<double> baseline;  // [target]
  };
  std::vector<RepOutput> reps(config.repetitions);

  parallel_for(config.repetitions, threads, [&](size_t rep) {
    const Rng rep_rng = master.fork(streams::kRep).fork(rep);
    auto [train, test] =
        split_train_test(pool, config.dataset.split_fraction, rep_rng.fork(streams::kSplit).key());
    Standardizer scaler;
    scaler.fit(train);
    LayerStack mlp = build_mlp(pool.schema.attributes.size(), config.model.classes,
                               rep_rng.fork(streams::kModel).key());
    TrainConfig tc = config.train;
    tc.rng_seed = rep_rng.fork(streams::kTrain).key();
    train_classifier(mlp.full(), scaler.transform(train.records), train.labels, tc);
    const PriorTable priors = estimate_prior_table(train);

    TabularOracle oracle = [&scaler, &mlp](const std::vector<int>& record) {
      Tensor probs = mlp.forward(scaler.transform_one(record), false);
      return probs.data;
    };

    RepOutput& out = reps[rep];
    out.attack_acc.assign(targets.size(), std::vector<double>(config.flip_probabilities.size()));
    out.test_acc.assign(targets.size(), std::vector<double>(config.flip_probabilities.size()));
    out.baseline.resize(targets.size());
    for (size_t ti = 0; ti < targets.size(); ++ti) {
      out.baseline[ti] = majority_prior_baseline(test, target_idx[ti]);
      for (size_t pi = 0; pi < config.flip_probabilities.size(); ++pi) {
        LabelPerturbConfig defense;
        defense.flip_probability = config.flip_probabilities[pi];
        defense.classes = config.model.classes;
        const Rng eval_rng = rep_rng.fork(streams::kDefense).fork(ti * 1000 + pi);
        const AttackReport report = eval_attr_attack(oracle, test, target_idx[ti], priors,
                                                     &defense, 1, eval_rng, config.scoring);
        out.attack_acc[ti][pi] = report.trial_attack_accuracy[0];
        out.test_acc[ti][pi] = report.trial_test_accuracy[0];
      }
    }
  });

  AttrExperimentResult result;
  result.targets = targets;
  result.baselines.assign(targets.size(), 0.0);
  for (size_t ti = 0; ti < targets.size(); ++ti) {
    for (size_t pi = 0; pi < config.flip_probabilities.size(); ++pi)
      for (size_t rep = 0; rep < config.repetitions; ++rep)
        result.rows.push_back({targets[ti], config.flip_probabilities[pi], rep,
                               reps[rep].attack_acc[ti][pi], reps[rep].test_acc[ti][pi]});
    for (size_t rep = 0; rep < config.repetitions; ++rep)
      result.baselines[ti] += reps[rep].baseline[ti];
    result.baselines[ti] /= static_cast<double>(config.repetitions);
  }

  write_file_atomic(config.out_dir + "/attr_report.csv", detail::attr_detail_csv(result.rows));
  write_file_atomic(config.out_dir + "/attr_aggregate.csv",
                    detail::attr_aggregate_csv(result, config.flip_probabilities,
                                               config.repetitions));
  detail::attr_plot(config.out_dir + "/attr_plot.svg", result, config.flip_probabilities);

  nlohmann::json summary;
  summary["config"] = config_to_json(config);
  summary["targets"] = targets;
  summary["baselines"] = result.baselines;
  nlohmann::json sweep = nlohmann::json::array();
  for (size_t ti = 0; ti < targets.size(); ++ti)
    for (double p : config.flip_probabilities) {
      std::vector<double> attack, test;
      for (const auto& r : result.rows)
        if (r.target == targets[ti] && r.flip_p == p) {
          attack.push_back(r.attack_acc);
          test.push_back(r.test_acc);
        }
      auto [am, as] = mean_std(attack);
      auto [tm, ts] = mean_std(test);
      sweep.push_back({{"target", targets[ti]},
                       {"flip_p", p},
                       {"attack_acc_mean", am},
                       {"attack_acc_std", as},
                       {"test_acc_mean", tm},
                       {"test_acc_std", ts}});
    }
  summary["sweep"] = std::move(sweep);
  write_file_atomic(config.out_dir + "/attr_summary.json", summary.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Inversion experiment

struct InvDetailRow {
  int cut_layer = 2;
  double sigma = 0.0;
  size_t rep = 0;
  double accuracy = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct InvCellRow {
  int cut_layer = 2;
  double sigma = 0.0;
  double accuracy = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct InvExperimentResult {
  std::vector<InvDetailRow> detail;
  std::vector<InvCellRow> cells;  // per (cut, sigma), medians over repetitions
};

namespace detail {

inline std::string inv_detail_csv(const std::vector<InvDetailRow>& rows) {
  std::string out = "cut_layer,sigma,rep,accuracy,mse,psnr,ssim\n";
  for (const auto& r : rows)
    out += std::to_string(r.cut_layer) + "," + fmt9(r.sigma) + "," + std::to_string(r.rep) + "," +
           fmt9(r.accuracy) + "," + fmt9(r.mse) + "," + fmt9(r.psnr) + "," + fmt9(r.ssim) + "\n";
  return out;
}

inline std::string inv_report_csv(const std::vector<InvCellRow>& rows) {
  std::string out = "cut_layer,sigma,accuracy,mse,psnr,ssim\n";
  for (const auto& r : rows)
    out += std::to_string(r.cut_layer) + "," + fmt9(r.sigma) + "," + fmt9(r.accuracy) + "," +
           fmt9(r.mse) + "," + fmt9(r.psnr) + "," + fmt9(r.ssim) + "\n";
  return out;
}

inline void inv_plot(const std::string& path, const std::vector<InvCellRow>& cells,
                     const std::vector<int>& cuts, const std::vector<double>& sigmas) {
  std::vector<PlotSeries> series;
  for (int cut : cuts) {
    PlotSeries s{"cut " + std::to_string(cut), {}, {}, {}};
    for (double sigma : sigmas)
      for (const auto& c : cells)
        if (c.cut_layer == cut && c.sigma == sigma) {
          s.x.push_back(sigma);
          s.y.push_back(c.ssim);
        }
    series.push_back(std::move(s));
  }
  write_line_plot(path, "Reconstruction quality vs parameter noise", "sigma", "SSIM", series);
}

}  // namespace detail

// Index of the first party-B layer for a cut point, in the stack built by
// build_split_cnn (each block is conv, relu, conv, relu, pool).
inline size_t split_cut_index(int cut_point) {
  if (cut_point != 2 && cut_point != 4 && cut_point != 6)
    throw std::invalid_argument("split_cut_index: cut point must be one of {2, 4, 6}");
  return static_cast<size_t>(cut_point / 2) * 5;
}

inline InvExperimentResult run_inversion_experiment(const ExperimentConfig& config,
                                                    unsigned threads = 1) {
  if (config.kind != ExperimentKind::inversion_attack)
    throw std::invalid_argument("run_inversion_experiment: config kind is not inversion-attack");
  std::filesystem::create_directories(config.out_dir);
  const Rng master(config.seed);

  // Victim pool plus adversary query/eval images, disjoint by construction:
  // the tail of one generator stream never enters the victim's splits.
  ImageDataset all;
  if (config.dataset.source == "synthetic") {
    all = synth_images(config.dataset.n + config.attack.query_set_size + config.attack.eval_set_size,
                       config.dataset.image_side, master.fork(streams::kData).key());
  } else {
    all = load_pgm(config.dataset.images_dir, config.dataset.labels_csv);
    if (all.size() < config.dataset.n + config.attack.query_set_size + config.attack.eval_set_size)
      throw std::runtime_error(
          "run_inversion_experiment: needs n + query_set_size + eval_set_size = " +
          std::to_string(config.dataset.n + config.attack.query_set_size +
                         config.attack.eval_set_size) +
          " images, got " + std::to_string(all.size()));
    if (all.side() % 8 != 0)
      throw std::runtime_error("run_inversion_experiment: image side must be divisible by 8");
  }
  const size_t side = all.side();
  ImageDataset victim_pool, query_set, eval_set;
  for (size_t i = 0; i < config.dataset.n; ++i) {
    victim_pool.images.push_back(all.images[i]);
    victim_pool.labels.push_back(all.labels[i]);
  }
  for (size_t i = 0; i < config.attack.query_set_size; ++i)
    query_set.images.push_back(all.images[config.dataset.n + i]);
  for (size_t i = 0; i < config.attack.eval_set_size; ++i)
    eval_set.images.push_back(all.images[config.dataset.n + config.attack.query_set_size + i]);

  // Phase 1: one trained victim per repetition (the full stack is the same
  // model for every cut point).
  std::vector<SplitCnn> victims;
  victims.reserve(config.repetitions);
  std::vector<ImageDataset> tests(config.repetitions);
  for (size_t rep = 0; rep < config.repetitions; ++rep)
    victims.push_back(build_split_cnn(side, config.model.classes, 2, config.model.hidden_width,
                                      master.fork(streams::kRep).fork(rep)
                                          .fork(streams::kModel).key()));
  parallel_for(config.repetitions, threads, [&](size_t rep) {
    const Rng rep_rng = master.fork(streams::kRep).fork(rep);
    auto [train, test] = split_train_test(victim_pool, config.dataset.split_fraction,
                                          rep_rng.fork(streams::kSplit).key());
    TrainConfig tc = config.train;
    tc.rng_seed = rep_rng.fork(streams::kTrain).key();
    train_classifier(victims[rep].full(), train.batch(0, train.size()), train.labels, tc);
    tests[rep] = std::move(test);
  });

  // Phase 2: one decoder per (repetition, cut), trained against the clean
  // deployment, then evaluated against every noise level. The adversary's
  // query phase happened before the defense redrew the deployment noise,
  // so the learned inverse mapping mismatches the perturbed model more and
  // more as sigma grows; that mismatch is what the defense buys.
  const size_t cells_per_rep = config.cut_points.size() * config.sigmas.size();
  const size_t n_tasks = config.repetitions * config.cut_points.size();
  std::vector<InvDetailRow> detail_rows(config.repetitions * cells_per_rep);
  parallel_for(n_tasks, threads, [&](size_t task) {
    const size_t rep = task / config.cut_points.size();
    const size_t cut_i = task % config.cut_points.size();
    const int cut = config.cut_points[cut_i];
    const Rng rep_rng = master.fork(streams::kRep).fork(rep);
    const size_t cut_idx = split_cut_index(cut);
    // Task-local copy: forward passes write layer scratch, and several
    // tasks may share one repetition's victim.
    LayerStack clean = victims[rep].stack.clone();
    StackSlice clean_a = clean.slice(0, cut_idx);

    // Observation phase: query the serving front half. The oracle returns
    // what the wire carries, i.e. 32-bit-rounded activations.
    ActivationOracle oracle = [&clean_a](const Tensor& img) {
      Tensor batched({1, img.shape[0], img.shape[1], img.shape[2]}, img.data);
      Tensor act = clean_a.forward(batched, false);
      return downcast_f32(Tensor(Shape(act.shape.begin() + 1, act.shape.end()), act.data));
    };
    const std::vector<Tensor> activations = collect_queries(oracle, query_set.images);

    // Training phase: fit the decoder on (activation, image) pairs.
    SplitCnn shape_helper;
    shape_helper.cut_point = cut;
    shape_helper.image_side = side;
    InverseNet decoder = build_inverse_net(shape_helper.activation_shape(), side,
                                           rep_rng.fork(streams::kDecoder).fork(cut_i).key());
    InversionAttackConfig icfg;
    icfg.query_set_size = config.attack.query_set_size;
    icfg.train.batch_size = config.attack.batch_size;
    icfg.train.epochs = config.attack.epochs;
    icfg.train.learning_rate = config.attack.learning_rate;
    icfg.train.optimizer = OptimizerKind::adam;
    icfg.train.rng_seed = rep_rng.fork(streams::kAttackTrain).fork(cut_i).key();
    train_inverse(decoder, activations, query_set.images, icfg);

    for (size_t sig_i = 0; sig_i < config.sigmas.size(); ++sig_i) {
      const double sigma = config.sigmas[sig_i];
      // Deploy: clone the trained victim and add parameter noise once.
      LayerStack deployed = victims[rep].stack.clone();
      ParamSet deployed_params = deployed.params();
      ModelPerturbConfig noise;
      noise.sigma = sigma;
      Rng noise_rng = rep_rng.fork(streams::kPerturb).fork(sig_i);
      perturb_model(deployed_params, noise, noise_rng);
      StackSlice party_a = deployed.slice(0, cut_idx);
      StackSlice party_b = deployed.slice(cut_idx, deployed.layer_count());

      const double acc = accuracy(deployed.full(), tests[rep].batch(0, tests[rep].size()),
                                  tests[rep].labels);

      // Recovery phase: tap the victim's collaborative inferences through
      // the perturbed deployment and invert each intercepted activation.
      std::vector<Tensor> recovered;
      recovered.reserve(eval_set.size());
      for (const Tensor& target : eval_set.images) {
        Transcript tap;
        collaborative_infer(party_a, party_b, target, &tap);
        recovered.push_back(invert(decoder, tap.entries.front().msg.tensor));
      }
      const MetricsRecord m = batch_metrics(eval_set.images, recovered);

      const size_t pairs = std::min(config.attack.recon_pairs, eval_set.size());
      std::vector<Tensor> orig_head(eval_set.images.begin(),
                                    eval_set.images.begin() + static_cast<long>(pairs));
      std::vector<Tensor> rec_head(recovered.begin(),
                                   recovered.begin() + static_cast<long>(pairs));
      const std::string grid = config.out_dir + "/recon_cut" + std::to_string(cut) + "_sigma" +
                               fmt_short(sigma) + "_rep" + std::to_string(rep) + ".pgm";
      write_pgm_pair_grid(grid + ".tmp", orig_head, rec_head);
      std::filesystem::rename(grid + ".tmp", grid);

      detail_rows[rep * cells_per_rep + cut_i * config.sigmas.size() + sig_i] = {
          cut, sigma, rep, acc, m.mse, m.psnr, m.ssim};
    }
  });

  InvExperimentResult result;
  // Detail rows ordered by (cut, sigma, rep).
  for (size_t cut_i = 0; cut_i < config.cut_points.size(); ++cut_i)
    for (size_t sig_i = 0; sig_i < config.sigmas.size(); ++sig_i)
      for (size_t rep = 0; rep < config.repetitions; ++rep)
        result.detail.push_back(
            detail_rows[rep * cells_per_rep + cut_i * config.sigmas.size() + sig_i]);
  for (size_t cut_i = 0; cut_i < config.cut_points.size(); ++cut_i)
    for (size_t sig_i = 0; sig_i < config.sigmas.size(); ++sig_i) {
      std::vector<double> acc, mses, psnrs, ssims;
      for (size_t rep = 0; rep < config.repetitions; ++rep) {
        const InvDetailRow& r = detail_rows[rep * cells_per_rep + cut_i * config.sigmas.size() + sig_i];
        acc.push_back(r.accuracy);
        mses.push_back(r.mse);
        psnrs.push_back(r.psnr);
        ssims.push_back(r.ssim);
      }
      result.cells.push_back({config.cut_points[cut_i], config.sigmas[sig_i], median(acc),
                              median(mses), median(psnrs), median(ssims)});
    }

  write_file_atomic(config.out_dir + "/inv_detail.csv", detail::inv_detail_csv(result.detail));
  write_file_atomic(config.out_dir + "/inv_report.csv", detail::inv_report_csv(result.cells));
  detail::inv_plot(config.out_dir + "/inv_plot.svg", result.cells, config.cut_points,
                   config.sigmas);

  nlohmann::json summary;
  summary["config"] = config_to_json(config);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : result.cells)
    cells.push_back({{"cut_layer", c.cut_layer},
                     {"sigma", c.sigma},
                     {"accuracy", c.accuracy},
                     {"mse", c.mse},
                     {"psnr", c.psnr},
                     {"ssim", c.ssim}});
  summary["cells"] = std::move(cells);
  write_file_atomic(config.out_dir + "/inv_summary.json", summary.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Report regeneration from detail CSVs

inline void regenerate_reports(const std::string& out_dir) {
  namespace fs = std::filesystem;
  bool found = false;
  if (fs::exists(out_dir + "/attr_report.csv")) {
    found = true;
    std::ifstream f(out_dir + "/attr_report.csv");
    std::string line;
    std::getline(f, line);  // header
    AttrExperimentResult result;
    std::vector<double> flip_ps;
    size_t reps = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_csv_line(line);
      if (cells.size() != 5)
        throw std::runtime_error("regenerate_reports: malformed row in attr_report.csv: " + line);
      AttrDetailRow row;
      row.target = cells[0];
      row.flip_p = std::stod(cells[1]);
      row.rep = static_cast<size_t>(std::stoul(cells[2]));
      row.attack_acc = std::stod(cells[3]);
      row.test_acc = std::stod(cells[4]);
      if (std::find(result.targets.begin(), result.targets.end(), row.target) ==
          result.targets.end())
        result.targets.push_back(row.target);
      if (std::find(flip_ps.begin(), flip_ps.end(), row.flip_p) == flip_ps.end())
        flip_ps.push_back(row.flip_p);
      reps = std::max(reps, row.rep + 1);
      result.rows.push_back(std::move(row));
    }
    if (result.rows.empty()) throw std::runtime_error("regenerate_reports: attr_report.csv is empty");
    write_file_atomic(out_dir + "/attr_aggregate.csv",
                      detail::attr_aggregate_csv(result, flip_ps, reps));
    detail::attr_plot(out_dir + "/attr_plot.svg", result, flip_ps);
  }
  if (fs::exists(out_dir + "/inv_detail.csv")) {
    found = true;
    std::ifstream f(out_dir + "/inv_detail.csv");
    std::string line;
    std::getline(f, line);
    std::vector<InvDetailRow> detail_rows;
    std::vector<int> cuts;
    std::vector<double> sigmas;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_csv_line(line);
      if (cells.size() != 7)
        throw std::runtime_error("regenerate_reports: malformed row in inv_detail.csv: " + line);
      InvDetailRow row;
      row.cut_layer = std::stoi(cells[0]);
      row.sigma = std::stod(cells[1]);
      row.rep = static_cast<size_t>(std::stoul(cells[2]));
      row.accuracy = std::stod(cells[3]);
      row.mse = std::stod(cells[4]);
      row.psnr = std::stod(cells[5]);
      row.ssim = std::stod(cells[6]);
      if (std::find(cuts.begin(), cuts.end(), row.cut_layer) == cuts.end())
        cuts.push_back(row.cut_layer);
      if (std::find(sigmas.begin(), sigmas.end(), row.sigma) == sigmas.end())
        sigmas.push_back(row.sigma);
      detail_rows.push_back(row);
    }
    if (detail_rows.empty()) throw std::runtime_error("regenerate_reports: inv_detail.csv is empty");
    std::vector<InvCellRow> cells_out;
    for (int cut : cuts)
      for (double sigma : sigmas) {
        std::vector<double> acc, mses, psnrs, ssims;
        for (const auto& r : detail_rows)
          if (r.cut_layer == cut && r.sigma == sigma) {
            acc.push_back(r.accuracy);
            mses.push_back(r.mse);
            psnrs.push_back(r.psnr);
            ssims.push_back(r.ssim);
          }
        if (acc.empty()) continue;
        cells_out.push_back(
            {cut, sigma, median(acc), median(mses), median(psnrs), median(ssims)});
      }
    write_file_atomic(out_dir + "/inv_report.csv", detail::inv_report_csv(cells_out));
    detail::inv_plot(out_dir + "/inv_plot.svg", cells_out, cuts, sigmas);
  }
  if (!found)
    throw std::runtime_error("regenerate_reports: no attr_report.csv or inv_detail.csv in " +
                             out_dir);
}

// ---------------------------------------------------------------------------
// Model training entry point (CLI `train` verb)

// Trains the configured model once with the master seed's first repetition
// streams and writes a checkpoint plus a JSON sidecar of the architecture.
inline void train_and_save(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  const Rng master(config.seed);
  const Rng rep_rng = master.fork(streams::kRep).fork(0);
  nlohmann::json sidecar;
  sidecar["classes"] = config.model.classes;
  if (config.kind == ExperimentKind::attr_attack) {
    TabularDataset pool = config.dataset.source == "synthetic"
                              ? synth_tabular(config.dataset.n, master.fork(streams::kData).key())
                              : load_tabular(config.dataset.csv, config.dataset.schema);
    auto [train, test] = split_train_test(pool, config.dataset.split_fraction,
                                          rep_rng.fork(streams::kSplit).key());
    Standardizer scaler;
    scaler.fit(train);
    LayerStack mlp = build_mlp(pool.schema.attributes.size(), config.model.classes,
                               rep_rng.fork(streams::kModel).key());
    TrainConfig tc = config.train;
    tc.rng_seed = rep_rng.fork(streams::kTrain).key();
    const auto trace = train_classifier(mlp.full(), scaler.transform(train.records),
                                        train.labels, tc);
    ParamSet params = mlp.params();
    save_checkpoint(config.out_dir + "/model.nnck", params);
    sidecar["architecture"] = "mlp";
    sidecar["d_in"] = pool.schema.attributes.size();
    sidecar["train_accuracy"] = trace.empty() ? 0.0 : trace.back().accuracy;
    sidecar["test_accuracy"] =
        accuracy(mlp.full(), scaler.transform(test.records), test.labels);
    sidecar["standardizer"] = {{"mean", scaler.mean}, {"stdev", scaler.stdev}};
  } else {
    ImageDataset pool = config.dataset.source == "synthetic"
                            ? synth_images(config.dataset.n, config.dataset.image_side,
                                           master.fork(streams::kData).key())
                            : load_pgm(config.dataset.images_dir, config.dataset.labels_csv);
    auto [train, test] = split_train_test(pool, config.dataset.split_fraction,
                                          rep_rng.fork(streams::kSplit).key());
    SplitCnn model = build_split_cnn(pool.side(), config.model.classes, config.cut_points.front(),
                                     config.model.hidden_width,
                                     rep_rng.fork(streams::kModel).key());
    TrainConfig tc = config.train;
    tc.rng_seed = rep_rng.fork(streams::kTrain).key();
    const auto trace =
        train_classifier(model.full(), train.batch(0, train.size()), train.labels, tc);
    ParamSet params = model.stack.params();
    save_checkpoint(config.out_dir + "/model.nnck", params);
    sidecar["architecture"] = "split_cnn";
    sidecar["image_side"] = pool.side();
    sidecar["cut_point"] = model.cut_point;
    sidecar["hidden_width"] = config.model.hidden_width;
    sidecar["train_accuracy"] = trace.empty() ? 0.0 : trace.back().accuracy;
    sidecar["test_accuracy"] =
        accuracy(model.full(), test.batch(0, test.size()), test.labels);
  }
  write_file_atomic(config.out_dir + "/model.json", sidecar.dump(2) + "\n");
}

}  // namespace splitleak

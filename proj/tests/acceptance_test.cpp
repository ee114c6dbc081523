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

// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Thresholds are fixed here, not configurable.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "splitleak/splitleak.hpp"
#include "test_util.hpp"

namespace {

using namespace splitleak;
using testutil::TempDir;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Gradient suite: every layer kind vs central finite differences.

Check criterion1() {
  Check c;
  constexpr double kTol = 1e-4;
  constexpr int kInstances = 20;
  double worst = 0.0;

  auto check_worst = [&](const char* kind, double rel) {
    worst = std::max(worst, rel);
    c.require(rel < kTol, std::string(kind) + " rel err " + fmt(rel));
  };

  Rng rng(9001);
  for (int t = 0; t < kInstances; ++t) {
    Rng r = rng.fork(t);
    {
      LayerStack s;
      auto& d = s.emplace<Dense>("d", 3 + r.below(4), 2 + r.below(4), r);
      Tensor x = testutil::random_tensor({1 + r.below(3), d.in_features()}, r);
      check_worst("dense",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
    {
      LayerStack s;
      const size_t cin = 1 + r.below(3), cout = 1 + r.below(3);
      s.emplace<Conv2d>("c", cin, cout, 3, r);
      Tensor x = testutil::random_tensor({1, cin, 4, 4}, r);
      check_worst("conv3x3",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
    {
      LayerStack s;
      s.emplace<MaxPool2d>("p");
      Tensor x({1, 1 + r.below(3), 4, 4});
      for (size_t i = 0; i < x.size(); ++i)
        x.data[i] = 0.05 * static_cast<double>((i * 131 + 17 * static_cast<size_t>(t)) % 97);
      check_worst("maxpool2x2",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
    {
      LayerStack s;
      s.emplace<ReLU>("r");
      Tensor x = testutil::random_tensor_no_kinks({2, 6}, r);
      check_worst("relu",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
    {
      LayerStack s;
      s.emplace<Sigmoid>("s");
      Tensor x = testutil::random_tensor({2, 5}, r, -3.0, 3.0);
      check_worst("sigmoid",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
    {
      LayerStack s;
      const size_t classes = 2 + r.below(4);
      s.emplace<Dense>("d", 4, classes, r);
      s.emplace<Softmax>("sm");
      Tensor x = testutil::random_tensor({2, 4}, r);
      std::vector<int> labels{static_cast<int>(r.below(classes)),
                              static_cast<int>(r.below(classes))};
      check_worst("softmax+ce",
                  testutil::finite_difference_check(
                      s, x, [labels](const Tensor& out) { return cross_entropy(out, labels); })
                      .worst_rel);
    }
    {
      LayerStack s;
      const size_t cin = 1 + r.below(3), cout = 1 + r.below(2);
      s.emplace<ConvTranspose2d>("t", cin, cout, r);
      Tensor x = testutil::random_tensor({1, cin, 3, 3}, r);
      check_worst("transposed_conv",
                  testutil::finite_difference_check(s, x, testutil::l2_probe_loss()).worst_rel);
    }
  }
  c.detail = "worst rel err " + fmt(worst) + (c.detail.empty() ? "" : "; " + c.detail);
  return c;
}

// --------------------------------------------------------------------------
// 2. Randomized-response marginals within 3-sigma binomial bounds.

Check criterion2() {
  Check c;
  const int n = 100000;
  const struct {
    double p;
    size_t classes;
  } cases[] = {{0.3, 2}, {0.2, 4}, {0.5, 3}};
  Rng rng(9002);
  for (const auto& cs : cases) {
    LabelPerturbConfig cfg;
    cfg.flip_probability = cs.p;
    cfg.classes = cs.classes;
    Rng r = rng.fork(static_cast<uint64_t>(cs.classes * 100 + cs.p * 10));
    const int y = static_cast<int>(cs.classes - 1);
    std::vector<int> counts(cs.classes, 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(perturb_label(y, cfg, r))];
    for (size_t cls = 0; cls < cs.classes; ++cls) {
      const double expect = cls == static_cast<size_t>(y)
                                ? 1.0 - cs.p
                                : cs.p / static_cast<double>(cs.classes - 1);
      const double sigma = std::sqrt(expect * (1.0 - expect) / n);
      const double got = static_cast<double>(counts[cls]) / n;
      c.require(std::abs(got - expect) <= 3.0 * sigma,
                "p=" + fmt(cs.p) + " C=" + std::to_string(cs.classes) + " class " +
                    std::to_string(cls) + ": " + fmt(got) + " vs " + fmt(expect));
    }
  }
  if (c.ok) c.detail = "3 (p,C) settings x 100k draws within 3-sigma";
  return c;
}

// --------------------------------------------------------------------------
// 3. Attribute attack equals brute-force enumeration on a 3-bit model.

Check criterion3() {
  Check c;
  // Fixed enumerable model over (x0, x1, x2): confidence table indexed by
  // the record bits.
  const double table[8] = {0.9, 0.2, 0.35, 0.6, 0.75, 0.45, 0.15, 0.8};
  TabularOracle oracle = [&table](const std::vector<int>& rec) {
    const double p = table[rec[0] * 4 + rec[1] * 2 + rec[2]];
    return std::vector<double>{p, 1.0 - p};
  };
  const std::vector<double> priors{0.6, 0.4};
  size_t cases = 0;
  for (size_t target = 0; target < 3; ++target)
    for (int bits = 0; bits < 8; ++bits)
      for (int observed = 0; observed < 2; ++observed)
        for (bool soft : {true, false}) {
          std::vector<int> rec{(bits >> 2) & 1, (bits >> 1) & 1, bits & 1};
          AttrAttackConfig cfg;
          cfg.target_attribute = target;
          cfg.scoring = soft ? AttrScoring::soft_confidence : AttrScoring::hard_label;
          const AttrInference got = infer_attribute(oracle, rec, observed, priors, cfg);

          // Independent oracle: literal enumeration of prior(v) * L(v).
          int best = 0;
          double best_score = -1.0;
          for (size_t v = 0; v < priors.size(); ++v) {
            std::vector<int> probe = rec;
            probe[target] = static_cast<int>(v);
            const std::vector<double> probs = oracle(probe);
            double like;
            if (soft) {
              like = probs[static_cast<size_t>(observed)];
            } else {
              like = (probs[static_cast<size_t>(observed)] >=
                      probs[static_cast<size_t>(1 - observed)])
                         ? ((probs[0] == probs[1] && observed != 0) ? 0.0 : 1.0)
                         : 0.0;
            }
            const double score = priors[v] * like;
            if (score > best_score) {
              best_score = score;
              best = static_cast<int>(v);
            }
          }
          ++cases;
          c.require(got.level == best, "mismatch at target " + std::to_string(target) + " bits " +
                                           std::to_string(bits) + " obs " +
                                           std::to_string(observed));
        }
  if (c.ok) c.detail = std::to_string(cases) + " enumerated cases match";
  return c;
}

// --------------------------------------------------------------------------
// 4. Label-perturbation defense trend on the synthetic tabular workload.

ExperimentConfig attr_trend_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::attr_attack;
  cfg.seed = 42;
  cfg.out_dir = out_dir;
  cfg.repetitions = 10;
  cfg.dataset.n = 5000;
  cfg.train.epochs = 30;
  cfg.train.batch_size = 64;
  cfg.train.learning_rate = 1e-3;
  cfg.flip_probabilities = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  return cfg;
}

Check criterion4(const std::string& out_dir) {
  Check c;
  const ExperimentConfig cfg = attr_trend_config(out_dir);
  const AttrExperimentResult result = run_attr_experiment(cfg);
  const double baseline = result.baselines.at(0);

  std::vector<double> mean_attack;
  for (double p : cfg.flip_probabilities) {
    std::vector<double> vals;
    for (const auto& r : result.rows)
      if (r.flip_p == p) vals.push_back(r.attack_acc);
    mean_attack.push_back(mean_std(vals).first);
  }
  const double rho = testutil::spearman(cfg.flip_probabilities, mean_attack);
  c.require(mean_attack.front() >= baseline + 0.10,
            "p=0 attack acc " + fmt(mean_attack.front()) + " not >= baseline " + fmt(baseline) +
                " + 0.10");
  c.require(rho <= -0.8, "spearman " + fmt(rho) + " > -0.8");
  c.require(std::abs(mean_attack.back() - baseline) <= 0.05,
            "p=0.5 attack acc " + fmt(mean_attack.back()) + " not within 0.05 of baseline " +
                fmt(baseline));
  c.detail = "baseline " + fmt(baseline) + ", attack acc p=0 " + fmt(mean_attack.front()) +
             " -> p=0.5 " + fmt(mean_attack.back()) + ", spearman " + fmt(rho);
  return c;
}

// --------------------------------------------------------------------------
// 5. Inversion quality vs split depth (sigma = 0).

ExperimentConfig inversion_depth_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::inversion_attack;
  cfg.seed = 42;
  cfg.out_dir = out_dir;
  cfg.repetitions = 3;
  cfg.dataset.n = 2500;  // 0.8 split -> 2000 training images
  cfg.dataset.image_side = 32;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 32;
  cfg.cut_points = {2, 4, 6};
  cfg.sigmas = {0.0};
  cfg.attack.query_set_size = 512;
  cfg.attack.eval_set_size = 48;
  cfg.attack.epochs = 12;
  cfg.attack.batch_size = 16;
  return cfg;
}

Check criterion5(const std::string& out_dir) {
  Check c;
  const InvExperimentResult result = run_inversion_experiment(inversion_depth_config(out_dir));
  double ssim[3] = {0, 0, 0}, mse[3] = {0, 0, 0};
  for (const auto& cell : result.cells) {
    const int idx = cell.cut_layer / 2 - 1;
    ssim[idx] = cell.ssim;
    mse[idx] = cell.mse;
  }
  c.require(ssim[0] >= 0.90, "ssim(cut 2) " + fmt(ssim[0]) + " < 0.90");
  c.require(ssim[0] > ssim[1] && ssim[1] > ssim[2],
            "ssim not strictly decreasing: " + fmt(ssim[0]) + ", " + fmt(ssim[1]) + ", " +
                fmt(ssim[2]));
  c.require(mse[0] < mse[1] && mse[1] < mse[2],
            "mse not strictly increasing: " + fmt(mse[0]) + ", " + fmt(mse[1]) + ", " +
                fmt(mse[2]));
  c.detail = "median ssim " + fmt(ssim[0]) + " > " + fmt(ssim[1]) + " > " + fmt(ssim[2]) +
             "; mse " + fmt(mse[0]) + " < " + fmt(mse[1]) + " < " + fmt(mse[2]);
  return c;
}

// --------------------------------------------------------------------------
// 6. Model-perturbation defense trend at cut 4.

Check criterion6(const std::string& out_dir) {
  Check c;
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::inversion_attack;
  cfg.seed = 42;
  cfg.out_dir = out_dir;
  cfg.repetitions = 5;
  cfg.dataset.n = 2500;
  cfg.dataset.image_side = 32;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 32;
  cfg.cut_points = {4};
  cfg.sigmas = {0.0, 0.02, 0.05};
  cfg.attack.query_set_size = 512;
  cfg.attack.eval_set_size = 48;
  cfg.attack.epochs = 12;
  cfg.attack.batch_size = 16;
  const InvExperimentResult result = run_inversion_experiment(cfg);
  double ssim[3], mse[3], acc[3];
  for (size_t i = 0; i < 3; ++i) {
    ssim[i] = result.cells[i].ssim;
    mse[i] = result.cells[i].mse;
    acc[i] = result.cells[i].accuracy;
  }
  c.require(ssim[0] >= ssim[1] && ssim[1] >= ssim[2],
            "ssim not non-increasing: " + fmt(ssim[0]) + ", " + fmt(ssim[1]) + ", " +
                fmt(ssim[2]));
  c.require(mse[0] <= mse[1] && mse[1] <= mse[2],
            "mse not non-decreasing: " + fmt(mse[0]) + ", " + fmt(mse[1]) + ", " + fmt(mse[2]));
  c.require(std::abs(acc[2] - acc[0]) <= 0.15, "accuracy drop " + fmt(acc[0] - acc[2]) +
                                                   " exceeds 15 points (clean " + fmt(acc[0]) +
                                                   ", sigma 0.05 " + fmt(acc[2]) + ")");
  c.detail = "ssim " + fmt(ssim[0]) + " >= " + fmt(ssim[1]) + " >= " + fmt(ssim[2]) + "; acc " +
             fmt(acc[0]) + " -> " + fmt(acc[2]);
  return c;
}

// --------------------------------------------------------------------------
// 7. Protocol correctness: wire round-trips, corruption rejection, and
// split-vs-monolithic training equality.

Check criterion7() {
  Check c;
  Rng rng(9007);
  const Shape shapes[] = {{32, 16, 16}, {32, 8, 8}, {32, 4, 4}};

  // 1000 random tensors round-trip bit-exactly.
  size_t roundtrips = 0;
  for (int i = 0; i < 1000; ++i) {
    WireMessage m;
    m.type = static_cast<MsgType>(1 + i % 3);
    m.dtype = i % 2 ? WireDtype::f64 : WireDtype::f32;
    m.seq = static_cast<uint64_t>(i);
    m.tensor = testutil::random_tensor(shapes[i % 3], rng);
    if (m.dtype == WireDtype::f32) m.tensor = downcast_f32(m.tensor);
    WireMessage back;
    if (deserialize(serialize(m), back) != WireError::ok || !(back == m)) {
      c.require(false, "round-trip failed at message " + std::to_string(i));
      break;
    }
    ++roundtrips;
  }

  // Corrupted-byte rejection: every single-byte flip of a full frame is
  // rejected, for one message of each cut shape.
  size_t flips = 0, rejected = 0;
  for (const Shape& s : shapes) {
    WireMessage m;
    m.dtype = WireDtype::f32;
    m.tensor = downcast_f32(testutil::random_tensor(s, rng));
    const std::vector<uint8_t> bytes = serialize(m);
    const size_t stride = s[1] == 4 ? 1 : 7;  // exhaustive on the smallest
    for (size_t i = 0; i < bytes.size(); i += stride) {
      std::vector<uint8_t> bad = bytes;
      bad[i] ^= static_cast<uint8_t>(1 + rng.below(255));
      WireMessage out;
      ++flips;
      if (deserialize(bad, out) != WireError::ok) ++rejected;
    }
  }
  c.require(rejected == flips,
            std::to_string(flips - rejected) + " corrupted frames were accepted");

  // Split training equals monolithic training bit for bit after 3 epochs.
  ImageDataset ds = synth_images(48, 32, 424242);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 3;
  tc.rng_seed = 99;
  SplitCnn split_model = build_split_cnn(32, 2, 4, 64, 31);
  SplitCnn mono_model = build_split_cnn(32, 2, 4, 64, 31);
  SplitTrainSession session(split_model.party_a(), split_model.party_b(), tc);
  for (int epoch = 0; epoch < 3; ++epoch)
    collaborative_train_epoch(session, ds.batch(0, ds.size()), ds.labels, nullptr);
  train_classifier(mono_model.full(), ds.batch(0, ds.size()), ds.labels, tc);
  ParamSet ps = split_model.stack.params();
  ParamSet pm = mono_model.stack.params();
  bool identical = ps.size() == pm.size();
  for (size_t i = 0; identical && i < ps.size(); ++i)
    identical = ps[i].tensor->data == pm[i].tensor->data;
  c.require(identical, "split-trained parameters differ from monolithic training");

  if (c.ok)
    c.detail = std::to_string(roundtrips) + " round-trips, " + std::to_string(flips) +
               " corruptions rejected, 3-epoch split == monolithic";
  return c;
}

// --------------------------------------------------------------------------
// 8. Metric self-consistency.

Check criterion8() {
  Check c;
  Rng rng(9008);
  for (int i = 0; i < 100; ++i) {
    Tensor x = testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    Tensor y = testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    const double m = mse(x, y);
    const double p = psnr(x, y);
    const double want = 10.0 * std::log10(65025.0 / m);
    if (std::abs(p - want) > 1e-9 * std::abs(want)) {
      c.require(false, "psnr/mse relation violated at pair " + std::to_string(i));
      break;
    }
  }
  for (int i = 0; i < 10; ++i) {
    Tensor x = testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    c.require(ssim(x, x) == 1.0, "ssim(x,x) != 1");
  }
  std::vector<Tensor> xs, ys;
  for (int i = 0; i < 6; ++i) {
    xs.push_back(testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0));
    ys.push_back(testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0));
  }
  const MetricsRecord rec = batch_metrics(xs, ys);
  double m = 0, p = 0, s = 0;
  for (int i = 0; i < 6; ++i) {
    m += mse(xs[i], ys[i]);
    p += psnr(xs[i], ys[i]);
    s += ssim(xs[i], ys[i]);
  }
  c.require(std::abs(rec.mse - m / 6) <= 1e-12, "batch mse != mean of per-image mse");
  c.require(std::abs(rec.psnr - p / 6) <= 1e-12, "batch psnr != mean of per-image psnr");
  c.require(std::abs(rec.ssim - s / 6) <= 1e-12, "batch ssim != mean of per-image ssim");
  if (c.ok) c.detail = "psnr/mse relation on 100 pairs, ssim(x,x)=1, batch == per-image mean";
  return c;
}

// --------------------------------------------------------------------------
// 9. Determinism: criteria 4 and 5 configs rerun byte-identically.

Check criterion9(const std::string& attr_dir, const std::string& inv_dir) {
  Check c;
  TempDir attr_again("accept_attr_rerun"), inv_again("accept_inv_rerun");
  run_attr_experiment(attr_trend_config(attr_again.str()));
  run_inversion_experiment(inversion_depth_config(inv_again.str()));
  const char* attr_files[] = {"/attr_report.csv", "/attr_aggregate.csv"};
  for (const char* f : attr_files)
    c.require(testutil::read_file(attr_dir + f) == testutil::read_file(attr_again.str() + f),
              std::string(f + 1) + " differs between runs");
  const char* inv_files[] = {"/inv_detail.csv", "/inv_report.csv"};
  for (const char* f : inv_files)
    c.require(testutil::read_file(inv_dir + f) == testutil::read_file(inv_again.str() + f),
              std::string(f + 1) + " differs between runs");
  if (c.ok) c.detail = "reruns byte-identical (attr + inversion CSVs)";
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double time_limit;  // seconds; 0 = none stated
    std::function<Check()> run;
  };

  TempDir attr_dir("accept_attr"), inv_dir("accept_inv"), pert_dir("accept_pert");

  const std::vector<Criterion> criteria = {
      {1, "gradient finite-difference suite", 30.0, [] { return criterion1(); }},
      {2, "randomized-response statistics", 5.0, [] { return criterion2(); }},
      {3, "attribute-attack oracle equivalence", 1.0, [] { return criterion3(); }},
      {4, "attribute defense trend", 300.0, [&] { return criterion4(attr_dir.str()); }},
      {5, "inversion split-depth trend", 1200.0, [&] { return criterion5(inv_dir.str()); }},
      {6, "model-perturbation trend", 900.0, [&] { return criterion6(pert_dir.str()); }},
      {7, "protocol correctness", 0.0, [] { return criterion7(); }},
      {8, "metric self-consistency", 0.0, [] { return criterion8(); }},
      {9, "determinism of criteria 4 and 5", 0.0,
       [&] { return criterion9(attr_dir.str(), inv_dir.str()); }},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(t0);
    if (criterion.time_limit > 0.0 && elapsed >= criterion.time_limit) {
      check.ok = false;
      check.detail += (check.detail.empty() ? "" : "; ") + std::string("runtime ") +
                      fmt(elapsed) + "s exceeds " + fmt(criterion.time_limit) + "s";
    }
    std::printf("criterion %d [%s]: %s (%.1fs)%s%s\n", criterion.number, criterion.name,
                check.ok ? "PASS" : "FAIL", elapsed, check.detail.empty() ? "" : " -- ",
                check.detail.c_str());
    std::fflush(stdout);
    if (!check.ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}

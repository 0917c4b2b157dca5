// Copyright 2026 The med2vec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite. `acceptance <id>` runs one criterion, no argument runs
// all of them. Each criterion prints one PASS/FAIL line.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "med2vec/checkpoint.hpp"
#include "med2vec/cli.hpp"
#include "med2vec/evaluation.hpp"
#include "med2vec/interpret.hpp"
#include "med2vec/pipeline.hpp"
#include "med2vec/seed.hpp"
#include "med2vec/trainer.hpp"

namespace med2vec::acceptance {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradRelFloor = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kKinkMargin = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kObjectiveTol = 1e-10;
constexpr double kNormTol = 1e-9;
constexpr double kMinZeroFraction = 0.10;
constexpr double kMinNmi = 0.4;
constexpr double kShuffledNmiCeiling = 0.05;
constexpr double kClusterBudgetSeconds = 15 * 60.0;
constexpr double kRecallMargin = 0.05;
constexpr double kMinAuc = 0.70;
constexpr double kShuffledAucLow = 0.45;
constexpr double kShuffledAucHigh = 0.55;
constexpr double kScalingLow = 1.6;
constexpr double kScalingHigh = 2.6;
constexpr double kParityTol = 0.05;
constexpr double kMetricTol = 1e-12;

constexpr std::size_t kRecallK = 10;
constexpr std::size_t kShuffles = 20;
constexpr std::size_t kAucShuffles = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ModelDims dims_of(std::size_t C, std::size_t m, std::size_t n, std::size_t d, std::size_t G) {
  ModelDims dims;
  dims.num_codes = C;
  dims.code_dim = m;
  dims.visit_dim = n;
  dims.demo_dim = d;
  dims.num_groups = G;
  return dims;
}

// ------------------------------------------------------------------- 1

Outcome gradient_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  const auto dims = dims_of(20, 8, 6, 3, 5);
  std::vector<std::uint32_t> group_of(20);
  for (std::size_t c = 0; c < 20; ++c) group_of[c] = static_cast<std::uint32_t>(c % 5);
  std::array<double, 6> worst{};
  int resampled = 0;
  for (int instance = 0; instance < 20; ++instance) {
    std::vector<WindowExample> batch;
    ModelParams p;
    while (true) {
      batch = testing::random_batch(20, 3, group_of, 3, rng);
      p = testing::random_params(dims, 0.6, rng);
      if (!testing::near_kink(batch, p, kKinkMargin)) break;
      ++resampled;
    }
    const auto [loss, grads] = backward(batch, p, 1.0);
    const auto numeric = testing::numeric_gradients(
        p, [&](const ModelParams &q) { return unified_loss(batch, q, 1.0).total; }, kFdStep);
    const auto err = testing::relative_errors(grads, numeric, kGradRelFloor);
    for (std::size_t a = 0; a < 6; ++a) worst[a] = std::max(worst[a], err[a]);
  }
  const double elapsed = seconds_since(start);
  const double max_err = *std::max_element(worst.begin(), worst.end());
  std::string per_array;
  for (std::size_t a = 0; a < 6; ++a) per_array += std::string(a ? ", " : "") + std::string(kArrayNames[a]) + "=" + fmt(worst[a], 2);
  return {max_err < kGradRelTol && elapsed < kGradBudgetSeconds,
          "20 instances, max rel err " + fmt(max_err, 3) + " (" + per_array + "), " + std::to_string(resampled) +
              " resampled, " + fmt(elapsed, 3) + "s"};
}

// ------------------------------------------------------------------- 2

Outcome objective_equivalence() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> codes(2, 10), groups(2, 10), window(0, 2);
  double worst_code = 0.0, worst_visit = 0.0, worst_rep = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto C = codes(rng);
    const auto G = groups(rng);
    const auto p = testing::random_params(dims_of(C, 4, 3, 2, G), 1.2, rng);
    const auto visit = testing::random_visit(C, 1, 4, 2, rng);
    const auto targets = testing::random_targets(window(rng), G, rng);
    const auto naive = testing::naive_forward(visit, p);
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(naive.v.data(), static_cast<Eigen::Index>(naive.v.size()));
    worst_rep = std::max(worst_rep, (encode_visit(visit, p) - v).cwiseAbs().maxCoeff());
    worst_code = std::max(worst_code, std::abs(code_loss(visit.codes, p) - testing::naive_code_loss(visit, p)));
    worst_visit = std::max(worst_visit, std::abs(visit_loss(targets, v, p) - testing::naive_visit_loss(targets, naive.y)));
  }
  const double worst = std::max({worst_code, worst_visit, worst_rep});
  return {worst <= kObjectiveTol, "100 visits, |C|<=10: max |code diff| " + fmt(worst_code, 3) + ", max |visit diff| " +
                                      fmt(worst_visit, 3) + ", max |v diff| " + fmt(worst_rep, 3)};
}

// ------------------------------------------------------------------- 3

Outcome normalization() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> size(2, 30);
  double worst = 0.0;
  bool bounded = true;
  for (int draw = 0; draw < 1000; ++draw) {
    const bool extreme = draw % 2 == 1;
    const auto C = size(rng), G = size(rng);
    auto p = testing::random_params(dims_of(C, 4, 5, 0, G), extreme ? 5.0 : 1.0, rng);
    if (extreme) {
      std::uniform_real_distribution<double> big(-50.0, 50.0);
      for (Eigen::Index g = 0; g < p.softmax_bias.size(); ++g) p.softmax_bias(g) = big(rng);
      p.softmax_weights *= 5.0;
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(5);
    for (Eigen::Index i = 0; i < 5; ++i) v(i) = std::abs(p.visit_bias(i));
    const auto y = predict_neighbors(v, p);
    bounded = bounded && y.allFinite() && y.minCoeff() >= 0.0 && y.maxCoeff() <= 1.0;
    worst = std::max(worst, std::abs(y.sum() - 1.0));
    std::uniform_int_distribution<CodeIndex> code(0, static_cast<CodeIndex>(C - 1));
    const auto i = code(rng);
    double total = 0.0;
    for (CodeIndex j = 0; j < C; ++j) {
      const double q = code_pair_prob(i, j, p);
      bounded = bounded && std::isfinite(q) && q >= 0.0 && q <= 1.0;
      total += q;
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst <= kNormTol && bounded,
          "1000 draws (half with logits up to +-50 or more): max |sum - 1| " + fmt(worst, 3) +
              (bounded ? "" : ", entries outside [0,1]")};
}

// ------------------------------------------------------------------- 4

Outcome nonnegativity() {
  const auto start = Clock::now();
  const auto data = generate_synthetic(SynthConfig{});
  TrainConfig cfg;  // m = n = 200, 10 epochs, batch 1000
  const auto trained = train(data.corpus, &data.grouper, cfg);
  const auto &p = trained.params;
  const Eigen::MatrixXd relu_wc = p.code_weights.cwiseMax(0.0);
  double min_u = 0.0, min_v = 0.0;
  for (const auto &patient : data.corpus.patients()) {
    for (const auto &visit : patient.visits) {
      const auto u = intermediate_rep(visit.codes, p);
      min_u = std::min(min_u, u.minCoeff());
      min_v = std::min(min_v, visit_rep(u, visit.demographics, p).minCoeff());
    }
  }
  const double zero_fraction =
      static_cast<double>((relu_wc.array() == 0.0).count()) / static_cast<double>(relu_wc.size());
  const bool pass = relu_wc.minCoeff() >= 0.0 && min_u >= 0.0 && min_v >= 0.0 && zero_fraction >= kMinZeroFraction;
  return {pass, "min ReLU(W_c) " + fmt(relu_wc.minCoeff()) + ", min u " + fmt(min_u) + ", min v " + fmt(min_v) +
                    ", zero fraction " + fmt(zero_fraction) + " (>= " + fmt(kMinZeroFraction) + "), " +
                    fmt(seconds_since(start), 3) + "s"};
}

// ---------------------------------------------------------------- 5, 6, 8

struct Experiment {
  SyntheticData data;
  Corpus train_part, held;
  double train_seconds = 0.0;
};

SynthConfig cluster_config() {
  SynthConfig sc;
  sc.n_codes = 500;
  sc.n_groups = 20;
  sc.n_patients = 2000;
  return sc;
}

TrainConfig cluster_train_config() {
  TrainConfig cfg;
  cfg.code_dim = 40;
  cfg.visit_dim = 40;
  cfg.epochs = 10;
  return cfg;
}

Experiment make_experiment() {
  Experiment e;
  e.data = generate_synthetic(cluster_config());
  auto [a, b] = split_corpus(e.data.corpus, 0.8, derive_seed(7, "split"));
  e.train_part = std::move(a);
  e.held = std::move(b);
  return e;
}

ModelParams fit(const Experiment &e, bool grouped, double *seconds = nullptr) {
  const auto start = Clock::now();
  auto cfg = cluster_train_config();
  cfg.use_grouper = grouped;
  auto params = train(e.train_part, grouped ? &e.data.grouper : nullptr, cfg).params;
  if (seconds) *seconds = seconds_since(start);
  return params;
}

struct ClusterCheck {
  double nmi = 0.0;
  std::vector<double> shuffled;
  double mean_shuffled = 0.0;
  double seconds = 0.0;
};

ClusterCheck cluster_check() {
  const auto start = Clock::now();
  const auto e = make_experiment();
  const auto params = fit(e, true);
  ClusterCheck c;
  const auto detail = code_cluster_nmi_detail(CodeEmbeddings::from_params(params), e.data.grouper, 11);
  c.nmi = detail.nmi;
  c.shuffled = permuted_nmi(detail.assignment, detail.truth, kShuffles, 12);
  for (double x : c.shuffled) c.mean_shuffled += x / static_cast<double>(c.shuffled.size());
  c.seconds = seconds_since(start);
  return c;
}

Outcome cluster_recovery() {
  const auto c = cluster_check();
  const bool pass = c.nmi >= kMinNmi && c.nmi > c.mean_shuffled && c.seconds < kClusterBudgetSeconds;
  return {pass, "NMI " + fmt(c.nmi) + " (>= " + fmt(kMinNmi) + "), mean of " + std::to_string(kShuffles) +
                    " shuffled-label NMIs " + fmt(c.mean_shuffled) + ", " + fmt(c.seconds, 3) + "s"};
}

Outcome shuffled_nmi_ceiling() {
  const auto c = cluster_check();
  const double worst = *std::max_element(c.shuffled.begin(), c.shuffled.end());
  return {worst < kShuffledNmiCeiling, "shuffled-label NMIs in [" +
                                           fmt(*std::min_element(c.shuffled.begin(), c.shuffled.end())) + ", " +
                                           fmt(worst) + "], each required < " + fmt(kShuffledNmiCeiling)};
}

ProbeConfig probe_config() {
  ProbeConfig probe;
  probe.k = kRecallK;
  probe.seed = derive_seed(7, "probes");
  return probe;
}

Outcome probe_ordering() {
  const auto e = make_experiment();
  const auto params = fit(e, true);
  const auto probe = probe_config();
  const auto [fit_part, score_part] = probe_split(e.held, probe);
  const auto encode = med2vec_encoder(params);
  const double recall = recall_probe(fit_part, score_part, encode, e.data.grouper, probe).value;
  const double freq = frequency_recall(fit_part, score_part, e.data.grouper, kRecallK);
  const double a = auc_probe(fit_part, score_part, encode, probe).value;
  const double shuffled = shuffled_label_auc(fit_part, score_part, encode, probe, kAucShuffles);
  const bool pass = recall - freq >= kRecallMargin && a >= kMinAuc && shuffled >= kShuffledAucLow &&
                    shuffled <= kShuffledAucHigh;
  return {pass, "Recall@10 " + fmt(recall) + " vs frequency " + fmt(freq) + " (margin " + fmt(recall - freq) +
                    "), AUC " + fmt(a) + ", shuffled-label AUC " + fmt(shuffled) + " (mean of " +
                    std::to_string(kAucShuffles) + ")"};
}

Outcome grouped_parity() {
  const auto e = make_experiment();
  const auto probe = probe_config();
  const auto [fit_part, score_part] = probe_split(e.held, probe);
  const auto grouped = fit(e, true);
  const auto exact = fit(e, false);
  const double rg = recall_probe(fit_part, score_part, med2vec_encoder(grouped), e.data.grouper, probe).value;
  const double re = recall_probe(fit_part, score_part, med2vec_encoder(exact), e.data.grouper, probe).value;
  return {std::abs(rg - re) <= kParityTol,
          "Recall@10 grouped " + fmt(rg) + ", exact " + fmt(re) + ", |diff| " + fmt(std::abs(rg - re))};
}

// ------------------------------------------------------------------- 7

Outcome complexity_scaling() {
  auto epoch_seconds = [](std::size_t patients) {
    SynthConfig sc;
    sc.n_patients = patients;
    const auto data = generate_synthetic(sc);
    auto cfg = cluster_train_config();
    cfg.epochs = 1;
    std::vector<double> times;
    for (int rep = 0; rep < 3; ++rep) times.push_back(train(data.corpus, &data.grouper, cfg).log.epochs[0].seconds);
    std::sort(times.begin(), times.end());
    return std::make_pair(times[1], data.corpus.total_visits());
  };
  const auto [t1, n1] = epoch_seconds(1000);
  const auto [t2, n2] = epoch_seconds(2000);
  const double ratio = t2 / t1;
  return {ratio >= kScalingLow && ratio <= kScalingHigh,
          "T=" + std::to_string(n1) + ": " + fmt(t1) + "s, T=" + std::to_string(n2) + ": " + fmt(t2) +
              "s (median of 3), ratio " + fmt(ratio) + " in [" + fmt(kScalingLow) + ", " + fmt(kScalingHigh) + "]"};
}

// ------------------------------------------------------------------- 9

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome interpretation_determinism() {
  const auto dir = fs::temp_directory_path() / ("med2vec_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  SynthConfig sc;
  sc.n_patients = 300;
  sc.n_codes = 80;
  sc.n_groups = 8;
  const auto data = generate_synthetic(sc);
  TrainConfig cfg;
  cfg.code_dim = 12;
  cfg.visit_dim = 10;
  cfg.epochs = 3;
  const auto params = train(data.corpus, &data.grouper, cfg).params;
  const auto ckpt = dir / "model.m2v";
  save_checkpoint(ckpt, params, data.corpus.vocabulary());

  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  Eigen::VectorXd w(10);
  for (Eigen::Index i = 0; i < 10; ++i) w(i) = g(rng);
  write_vector(w, dir / "lr.txt");

  bool identical = true;
  int runs = 0;
  const std::vector<std::vector<std::string>> modes = {
      {"--mode", "code-coord", "--coord", "3"},
      {"--mode", "visit-coord", "--coord", "4"},
      {"--mode", "influence", "--lr-weights", (dir / "lr.txt").string()}};
  for (const auto &mode : modes) {
    std::string outputs[2], files[2];
    for (int r = 0; r < 2; ++r) {
      std::vector<std::string> args = {"med2vec", "interpret", "--checkpoint", ckpt.string(), "--k", "8"};
      args.insert(args.end(), mode.begin(), mode.end());
      const auto out_path = dir / ("report" + std::to_string(r) + ".txt");
      args.insert(args.end(), {"--out", out_path.string()});
      std::vector<const char *> argv;
      for (const auto &a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      if (run_cli(static_cast<int>(argv.size()), argv.data(), out, err) != kExitOk) identical = false;
      outputs[r] = out.str();
      files[r] = read_file(out_path);
      ++runs;
    }
    identical = identical && outputs[0] == outputs[1] && files[0] == files[1] && !files[0].empty();
  }

  std::uniform_real_distribution<double> log_scale(-6.0, 6.0);
  int stable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(10);
    for (Eigen::Index i = 0; i < 10; ++i) v(i) = g(rng);
    const double c = std::exp(log_scale(rng));
    stable += classifier_influence(params, v).argmax() == classifier_influence(params, c * v).argmax();
  }
  fs::remove_all(dir);
  return {identical && stable == 100, std::to_string(runs) + " interpret runs " +
                                          (identical ? "byte-identical" : "DIFFER") + ", argmax stable in " +
                                          std::to_string(stable) + "/100 rescalings"};
}

// ------------------------------------------------------------------ 10

Outcome metric_oracles() {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> size(1, 50);
  double worst_nmi = 0.0, worst_auc = 0.0, worst_recall = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = size(rng);
    std::uniform_int_distribution<int> labels(0, 1 + trial % 7);
    std::vector<int> a(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = labels(rng);
      t[i] = labels(rng);
    }
    worst_nmi = std::max(worst_nmi, std::abs(nmi(a, t) - testing::naive_nmi(a, t)));

    const auto m = std::max<std::size_t>(n, 2);
    std::uniform_int_distribution<int> coarse(0, 5);
    std::vector<double> s(m);
    std::vector<int> y(m);
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = trial % 2 ? coarse(rng) : std::generate_canonical<double, 53>(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    worst_auc = std::max(worst_auc, std::abs(auc(s, y) - testing::naive_auc(s, y)));

    Eigen::VectorXd scores(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) scores(static_cast<Eigen::Index>(i)) = s[i];
    std::vector<std::uint32_t> truth;
    for (std::uint32_t g = 0; g < m; ++g) {
      if (rng() % 3 == 0) truth.push_back(g);
    }
    if (truth.empty()) truth.push_back(static_cast<std::uint32_t>(m - 1));
    const auto k = 1 + rng() % m;
    worst_recall = std::max(worst_recall, std::abs(recall_at_k(scores, truth, k) - testing::naive_recall(s, truth, k)));
  }
  const double worst = std::max({worst_nmi, worst_auc, worst_recall});
  return {worst <= kMetricTol, "200 trials, sizes <= 50: max |diff| nmi " + fmt(worst_nmi, 3) + ", auc " +
                                   fmt(worst_auc, 3) + ", recall " + fmt(worst_recall, 3)};
}

struct Criterion {
  std::string id;
  std::string name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> &criteria() {
  static const std::vector<Criterion> all = {
      {"1", "gradient oracle", gradient_oracle},
      {"2", "objective equivalence", objective_equivalence},
      {"3", "normalization", normalization},
      {"4", "non-negativity and sparsity", nonnegativity},
      {"5a", "synthetic cluster recovery", cluster_recovery},
      {"5b", "shuffled-label NMI baselines below ceiling", shuffled_nmi_ceiling},
      {"6", "probe ordering", probe_ordering},
      {"7", "complexity scaling", complexity_scaling},
      {"8", "grouped-vs-exact parity", grouped_parity},
      {"9", "interpretation determinism", interpretation_determinism},
      {"10", "metric oracles", metric_oracles},
  };
  return all;
}

bool run(const Criterion &c) {
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail
            << std::endl;
  return o.pass;
}

}  // namespace
}  // namespace med2vec::acceptance

int main(int argc, char **argv) {
  using med2vec::acceptance::criteria;
  bool ok = true;
  bool matched = argc < 2;
  for (const auto &c : criteria()) {
    if (argc >= 2 && c.id != argv[1]) continue;
    matched = true;
    ok = med2vec::acceptance::run(c) && ok;
  }
  if (!matched) {
    std::cerr << "unknown criterion '" << argv[1] << "'\n";
    return 2;
  }
  return ok ? 0 : 1;
}

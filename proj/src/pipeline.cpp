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

#include "med2vec/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "med2vec/checkpoint.hpp"
#include "med2vec/interpret.hpp"
#include "med2vec/seed.hpp"

namespace med2vec {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string &key, const std::string &value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) {
    throw std::invalid_argument("config key '" + key + "': bad value '" + value + "'");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) {
      throw std::invalid_argument("config key '" + key + "': must be non-negative");
    }
  }
  return out;
}

bool parse_bool(const std::string &key, const std::string &value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config key '" + key + "': bad boolean '" + value + "'");
}

template <typename T>
std::string str(const T &value) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(value);
  } else {
    return std::to_string(value);
  }
}

template <typename F>
auto stage(const std::string &name, std::ostream *progress, F &&body) {
  if (progress) *progress << "[" << name << "]\n";
  try {
    return body();
  } catch (const std::exception &e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what());
  }
}

}  // namespace

TrainConfig PipelineConfig::default_train() {
  TrainConfig t;
  t.code_dim = 40;
  t.visit_dim = 40;
  return t;
}

void PipelineConfig::set(const std::string &key, const std::string &value) {
  using Setter = std::function<void(const std::string &)>;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](const auto &v) { seed = parse_number<std::uint64_t>(key, v); }},
      {"patients", [&](const auto &v) { synth.n_patients = parse_number<std::size_t>(key, v); }},
      {"codes", [&](const auto &v) { synth.n_codes = parse_number<std::size_t>(key, v); }},
      {"groups", [&](const auto &v) { synth.n_groups = parse_number<std::size_t>(key, v); }},
      {"visits_mean", [&](const auto &v) { synth.mean_visits_per_patient = parse_number<double>(key, v); }},
      {"codes_mean", [&](const auto &v) { synth.mean_codes_per_visit = parse_number<double>(key, v); }},
      {"sharpness", [&](const auto &v) { synth.transition_sharpness = parse_number<double>(key, v); }},
      {"affinity", [&](const auto &v) { synth.within_group_affinity = parse_number<double>(key, v); }},
      {"demographics", [&](const auto &v) { synth.with_demographics = parse_bool(key, v); }},
      {"split", [&](const auto &v) { split_ratio = parse_number<double>(key, v); }},
      {"m", [&](const auto &v) { train.code_dim = parse_number<std::size_t>(key, v); }},
      {"n", [&](const auto &v) { train.visit_dim = parse_number<std::size_t>(key, v); }},
      {"window", [&](const auto &v) { train.window = parse_number<std::size_t>(key, v); }},
      {"epochs", [&](const auto &v) { train.epochs = parse_number<std::size_t>(key, v); }},
      {"batch_size", [&](const auto &v) { train.batch_size = parse_number<std::size_t>(key, v); }},
      {"alpha", [&](const auto &v) { train.alpha = parse_number<double>(key, v); }},
      {"grouped", [&](const auto &v) { train.use_grouper = parse_bool(key, v); }},
      {"threads", [&](const auto &v) { train.threads = parse_number<unsigned>(key, v); }},
      {"recall_k", [&](const auto &v) { recall_k = parse_number<std::size_t>(key, v); }},
      {"probe_epochs", [&](const auto &v) { probe_epochs = parse_number<std::size_t>(key, v); }},
      {"nmi_trials", [&](const auto &v) { nmi_trials = parse_number<std::size_t>(key, v); }},
      {"auc_trials", [&](const auto &v) { auc_trials = parse_number<std::size_t>(key, v); }},
      {"interpret_k", [&](const auto &v) { interpret_k = parse_number<std::size_t>(key, v); }},
      {"neighbor_top", [&](const auto &v) { neighbor_top = parse_number<std::size_t>(key, v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(value);
}

std::map<std::string, std::string> PipelineConfig::entries() const {
  return {
      {"seed", str(seed)},
      {"patients", str(synth.n_patients)},
      {"codes", str(synth.n_codes)},
      {"groups", str(synth.n_groups)},
      {"visits_mean", str(synth.mean_visits_per_patient)},
      {"codes_mean", str(synth.mean_codes_per_visit)},
      {"sharpness", str(synth.transition_sharpness)},
      {"affinity", str(synth.within_group_affinity)},
      {"demographics", synth.with_demographics ? "true" : "false"},
      {"split", str(split_ratio)},
      {"m", str(train.code_dim)},
      {"n", str(train.visit_dim)},
      {"window", str(train.window)},
      {"epochs", str(train.epochs)},
      {"batch_size", str(train.batch_size)},
      {"alpha", str(train.alpha)},
      {"grouped", train.use_grouper ? "true" : "false"},
      {"threads", str(train.threads)},
      {"recall_k", str(recall_k)},
      {"probe_epochs", str(probe_epochs)},
      {"nmi_trials", str(nmi_trials)},
      {"auc_trials", str(auc_trials)},
      {"interpret_k", str(interpret_k)},
      {"neighbor_top", str(neighbor_top)},
  };
}

ProbeConfig PipelineConfig::probe_config() const {
  ProbeConfig p;
  p.k = recall_k;
  p.epochs = probe_epochs;
  p.seed = derive_seed(seed, "probes");
  return p;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value", lineno);
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument &e) {
      throw FormatError(e.what(), lineno);
    }
  }
  return base;
}

std::vector<std::string> write_corpus_files(const Corpus &corpus, const std::filesystem::path &dir,
                                            const std::string &prefix) {
  std::vector<std::string> paths = {(dir / (prefix + "visits.txt")).string()};
  std::optional<std::filesystem::path> demo, labels;
  if (corpus.demographic_size() > 0) {
    demo = dir / (prefix + "demo.txt");
    paths.push_back(demo->string());
  }
  if (corpus.has_labels()) {
    labels = dir / (prefix + "labels.txt");
    paths.push_back(labels->string());
  }
  write_corpus(corpus, paths.front(), demo, labels);
  return paths;
}

std::pair<Corpus, Corpus> probe_split(const Corpus &held, const ProbeConfig &config) {
  return split_corpus(held, config.train_ratio, derive_seed(config.seed, "split"));
}

PipelineResult run_pipeline(const PipelineConfig &config, const std::filesystem::path &out_dir,
                            std::ostream *progress) {
  namespace fs = std::filesystem;
  PipelineResult result;
  fs::create_directories(out_dir);
  auto artifact = [&](const std::string &name) {
    result.artifacts.push_back((out_dir / name).string());
    return out_dir / name;
  };
  auto corpus_artifacts = [&](const Corpus &corpus, const std::string &prefix) {
    const auto paths = write_corpus_files(corpus, out_dir, prefix);
    result.artifacts.insert(result.artifacts.end(), paths.begin(), paths.end());
  };

  const auto data = stage("synth", progress, [&] {
    SynthConfig sc = config.synth;
    sc.seed = derive_seed(config.seed, "corpus");
    auto d = generate_synthetic(sc);
    corpus_artifacts(d.corpus, "");
    write_grouper(d.grouper, d.corpus.vocabulary(), artifact("grouper.tsv"));
    return d;
  });

  const auto parts = stage("split", progress, [&] {
    auto halves = split_corpus(data.corpus, config.split_ratio, derive_seed(config.seed, "split"));
    corpus_artifacts(halves.first, "train_");
    corpus_artifacts(halves.second, "test_");
    return halves;
  });
  const Corpus &train_set = parts.first;
  const Corpus &held = parts.second;

  const auto params = stage("train", progress, [&] {
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    tc.progress = progress;
    auto trained = train(train_set, &data.grouper, tc);
    save_checkpoint(artifact("model.m2v"), trained.params, train_set.vocabulary());
    write_train_log(trained.log, artifact("train_log.csv"));
    result.log = trained.log;
    return trained.params;
  });

  const auto probe = config.probe_config();
  const auto lr_weights = stage("eval", progress, [&] {
    auto &report = result.report;
    const auto embeddings = CodeEmbeddings::from_params(params);
    const auto nmi_seed = derive_seed(config.seed, "kmeans");
    const auto detail = code_cluster_nmi_detail(embeddings, data.grouper, nmi_seed);
    report.add("nmi", detail.nmi, "k=" + std::to_string(data.grouper.num_groups()));
    const auto shuffled =
        permuted_nmi(detail.assignment, detail.truth, config.nmi_trials, derive_seed(config.seed, "nmi_shuffle"));
    double mean = 0.0;
    for (double x : shuffled) mean += x;
    report.add("nmi_shuffled_mean", mean / static_cast<double>(shuffled.size()),
               "trials=" + std::to_string(config.nmi_trials));

    const auto [probe_train, probe_test] = probe_split(held, probe);
    const std::string kcfg = "k=" + std::to_string(probe.k);
    const std::vector<std::pair<std::string, VisitEncoder>> reps = {
        {"med2vec", med2vec_encoder(params)},
        {"multihot", multihot_encoder(train_set.num_codes())},
        {"sumcode", sumcode_encoder(params)},
    };
    for (const auto &[name, encode] : reps) {
      const auto r = recall_probe(probe_train, probe_test, encode, data.grouper, probe);
      report.add("recall_" + name, r.value, kcfg + ";l2=" + str(r.l2));
    }
    report.add("recall_frequency", frequency_recall(probe_train, probe_test, data.grouper, probe.k), kcfg);
    Eigen::VectorXd weights;
    for (const auto &[name, encode] : reps) {
      const auto r = auc_probe(probe_train, probe_test, encode, probe);
      report.add("auc_" + name, r.value, "l2=" + str(r.l2));
      if (name == "med2vec") weights = r.weights;
    }
    report.add("auc_shuffled", shuffled_label_auc(probe_train, probe_test, reps[0].second, probe, config.auc_trials),
               "trials=" + std::to_string(config.auc_trials));
    report.write_csv(artifact("eval.csv"));
    write_vector(weights, artifact("lr_weights.txt"));
    if (progress) *progress << report.table();
    return weights;
  });

  stage("interpret", progress, [&] {
    const auto &vocab = train_set.vocabulary();
    const auto influence = classifier_influence(params, lr_weights);
    const auto top = influence.argmax();
    const auto k = std::min<std::size_t>(config.interpret_k, vocab.size());
    std::ostringstream text;
    text << render_report(influence) << '\n'
         << render_report(top_codes_for_coordinate(params, top, k), vocab);
    std::ofstream(artifact("influence.txt")) << text.str();

    std::ostringstream coords;
    for (std::size_t i = 0; i < static_cast<std::size_t>(params.code_weights.rows()); ++i) {
      coords << render_report(top_codes_for_coordinate(params, i, k), vocab) << '\n';
    }
    std::ofstream(artifact("code_coordinates.txt")) << coords.str();

    const auto embeddings = CodeEmbeddings::from_params(params);
    std::ostringstream nn;
    const auto top_n = std::min<std::size_t>(config.neighbor_top, vocab.size() - 1);
    for (CodeIndex q = 0; q < std::min<std::size_t>(vocab.size(), 10); ++q) {
      nn << vocab.token(q) << ':';
      for (const auto &n : nearest_codes(embeddings, q, top_n)) {
        nn << ' ' << vocab.token(n.code) << '(' << std::fixed << std::setprecision(4) << n.similarity << ')';
      }
      nn << '\n';
    }
    std::ofstream(artifact("neighbors.txt")) << nn.str();
    return 0;
  });
  return result;
}

}  // namespace med2vec

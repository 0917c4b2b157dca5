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

#include "med2vec/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "med2vec/checkpoint.hpp"
#include "med2vec/interpret.hpp"
#include "med2vec/manifest.hpp"
#include "med2vec/pipeline.hpp"
#include "med2vec/seed.hpp"

namespace med2vec {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::map<std::string, std::string> collect_flags(const CLI::App &sub) {
  std::map<std::string, std::string> flags;
  for (const CLI::Option *opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name.rfind("--help", 0) == 0) continue;
    if (opt->count() > 0) {
      std::string joined;
      for (const auto &r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      flags[name] = joined;
    } else if (opt->get_expected_min() == 0) {
      flags[name] = "false";
    } else {
      flags[name] = opt->get_default_str();
    }
  }
  return flags;
}

fs::path with_suffix(const fs::path &base, const std::string &suffix) {
  auto p = base;
  p += suffix;
  return p;
}

std::optional<fs::path> optional_path(const std::string &s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

LoadResult load_with_report(const std::string &corpus, const std::string &demo, const std::string &labels,
                            const Vocabulary *fixed, RunManifest &manifest, std::ostream &err) {
  manifest.add_input(corpus);
  if (!demo.empty()) manifest.add_input(demo);
  if (!labels.empty()) manifest.add_input(labels);
  auto loaded = load_corpus(corpus, optional_path(demo), optional_path(labels), fixed);
  if (loaded.dropped_tokens > 0) {
    err << "warning: dropped " << loaded.dropped_tokens << " codes unknown to the checkpoint vocabulary\n";
  }
  return loaded;
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
  std::uint64_t seed = 7;
  std::string out;
  SynthConfig config;
  bool no_demographics = false;
  double split = 0.8;
};

void add_synth(CLI::App &app, SynthArgs &a) {
  app.add_option("--seed", a.seed, "Run seed");
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--patients", a.config.n_patients, "Number of patients");
  app.add_option("--codes", a.config.n_codes, "Vocabulary size");
  app.add_option("--groups", a.config.n_groups, "Number of latent groups");
  app.add_option("--visits-mean", a.config.mean_visits_per_patient, "Mean visits per patient");
  app.add_option("--codes-mean", a.config.mean_codes_per_visit, "Mean codes per visit");
  app.add_option("--sharpness", a.config.transition_sharpness, "Group transition sharpness");
  app.add_option("--affinity", a.config.within_group_affinity, "Within-group affinity");
  app.add_flag("--no-demographics", a.no_demographics, "Omit demographic vectors");
  app.add_option("--split", a.split, "Fraction of patients in the training split");
}

void run_synth(const SynthArgs &a, RunManifest &manifest, std::ostream &out) {
  SynthConfig config = a.config;
  config.with_demographics = !a.no_demographics;
  config.seed = derive_seed(a.seed, "corpus");
  manifest.seeds = {{"seed", a.seed}, {"corpus", config.seed}, {"split", derive_seed(a.seed, "split")}};
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const auto data = generate_synthetic(config);
  auto add = [&](const std::vector<std::string> &paths) {
    manifest.artifacts.insert(manifest.artifacts.end(), paths.begin(), paths.end());
  };
  add(write_corpus_files(data.corpus, dir, ""));
  write_grouper(data.grouper, data.corpus.vocabulary(), dir / "grouper.tsv");
  manifest.artifacts.push_back((dir / "grouper.tsv").string());
  const auto [train_part, test_part] = split_corpus(data.corpus, a.split, derive_seed(a.seed, "split"));
  add(write_corpus_files(train_part, dir, "train_"));
  add(write_corpus_files(test_part, dir, "test_"));
  out << "wrote " << data.corpus.patients().size() << " patients, " << data.corpus.total_visits()
      << " visits, " << data.corpus.num_codes() << " codes, " << data.grouper.num_groups() << " groups to "
      << dir.string() << "\n";
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, demo, grouper, labels, out, log;
  bool no_grouper = false;
  bool quiet = false;
  TrainConfig config;
};

void add_train(CLI::App &app, TrainArgs &a) {
  app.add_option("--corpus", a.corpus, "Visit sequence file")->required();
  app.add_option("--demo", a.demo, "Demographics file");
  app.add_option("--grouper", a.grouper, "Code to group map");
  app.add_option("--labels", a.labels, "Visit labels file");
  app.add_option("--m", a.config.code_dim, "Code representation size");
  app.add_option("--n", a.config.visit_dim, "Visit representation size");
  app.add_option("--window", a.config.window, "Context window");
  app.add_option("--epochs", a.config.epochs, "Training epochs");
  app.add_option("--batch-size", a.config.batch_size, "Visits per mini-batch");
  app.add_option("--alpha", a.config.alpha, "Weight of the code-level objective");
  app.add_option("--seed", a.config.seed, "Run seed");
  app.add_flag("--no-grouper", a.no_grouper, "Predict exact codes even when a grouper is given");
  app.add_option("--out", a.out, "Checkpoint path")->required();
  app.add_option("--log", a.log, "Training log CSV (default <out>.log.csv)");
  app.add_option("--threads", a.config.threads, "Worker threads for gradients");
  app.add_flag("--quiet", a.quiet, "Suppress epoch logging");
}

void run_train(TrainArgs a, RunManifest &manifest, std::ostream &out, std::ostream &err) {
  const auto loaded = load_with_report(a.corpus, a.demo, a.labels, nullptr, manifest, err);
  const auto &corpus = loaded.corpus;
  std::optional<GrouperMap> grouper;
  if (!a.grouper.empty()) {
    manifest.add_input(a.grouper);
    grouper = load_grouper(a.grouper, corpus.vocabulary());
  }
  a.config.use_grouper = grouper.has_value() && !a.no_grouper;
  a.config.progress = a.quiet ? nullptr : &out;
  manifest.seeds = {{"seed", a.config.seed},
                    {"init", derive_seed(a.config.seed, "init")},
                    {"shuffle", derive_seed(a.config.seed, "shuffle")}};
  const auto result = train(corpus, grouper ? &*grouper : nullptr, a.config);
  save_checkpoint(a.out, result.params, corpus.vocabulary());
  const fs::path log = a.log.empty() ? with_suffix(a.out, ".log.csv") : fs::path(a.log);
  write_train_log(result.log, log);
  manifest.artifacts = {a.out, log.string()};
  manifest.extra = result.log.metadata;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, corpus, demo, grouper, labels, task, rep = "med2vec", out, lr_out;
  std::vector<std::string> queries;
  std::size_t k = 30;
  std::size_t top = 10;
  std::uint64_t seed = 7;
};

void add_eval(CLI::App &app, EvalArgs &a) {
  app.add_option("--checkpoint", a.checkpoint, "Trained model")->required();
  app.add_option("--corpus", a.corpus, "Visit sequence file")->required();
  app.add_option("--demo", a.demo, "Demographics file");
  app.add_option("--grouper", a.grouper, "Code to group map");
  app.add_option("--labels", a.labels, "Visit labels file");
  app.add_option("--task", a.task, "Evaluation task")
      ->required()
      ->check(CLI::IsMember({"nmi", "recall", "auc", "neighbors"}));
  app.add_option("--k", a.k, "Top-k for recall");
  app.add_option("--seed", a.seed, "Evaluation seed");
  app.add_option("--rep", a.rep, "Visit representation for probes")
      ->check(CLI::IsMember({"med2vec", "multihot", "sumcode"}));
  app.add_option("--out", a.out, "Report CSV (default <checkpoint>.<task>.csv)");
  app.add_option("--query", a.queries, "Query code tokens for neighbors");
  app.add_option("--top", a.top, "Neighbors per query");
  app.add_option("--lr-out", a.lr_out, "Write the severity classifier weights here (auc task)");
}

VisitEncoder encoder_for(const std::string &rep, const ModelParams &params, std::size_t num_codes) {
  if (rep == "multihot") return multihot_encoder(num_codes);
  if (rep == "sumcode") return sumcode_encoder(params);
  return med2vec_encoder(params);
}

void run_eval(const EvalArgs &a, RunManifest &manifest, std::ostream &out, std::ostream &err) {
  manifest.add_input(a.checkpoint);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto &vocab = ckpt.vocabulary;
  const auto &params = ckpt.params;
  const auto loaded = load_with_report(a.corpus, a.demo, a.labels, &vocab, manifest, err);
  const auto &corpus = loaded.corpus;
  if (corpus.patients().empty()) throw std::runtime_error("no patients left after loading the corpus");
  if (corpus.demographic_size() != params.dims().demo_dim && a.rep != "multihot" && a.task != "nmi" &&
      a.task != "neighbors") {
    throw UsageError("corpus demographics have width " + std::to_string(corpus.demographic_size()) +
                     ", the checkpoint expects " + std::to_string(params.dims().demo_dim));
  }
  std::optional<GrouperMap> grouper;
  if (!a.grouper.empty()) {
    manifest.add_input(a.grouper);
    grouper = load_grouper(a.grouper, vocab);
  }

  ProbeConfig probe;
  probe.k = a.k;
  probe.seed = derive_seed(a.seed, "probes");
  manifest.seeds = {{"seed", a.seed}, {"kmeans", derive_seed(a.seed, "kmeans")}, {"probes", probe.seed}};

  EvalReport report;
  const auto embeddings = CodeEmbeddings::from_params(params);
  if (a.task == "nmi") {
    if (!grouper) throw UsageError("--task nmi needs --grouper");
    const auto detail = code_cluster_nmi_detail(embeddings, *grouper, derive_seed(a.seed, "kmeans"));
    report.add("nmi", detail.nmi, "k=" + std::to_string(grouper->num_groups()));
    const auto shuffled = permuted_nmi(detail.assignment, detail.truth, 20, derive_seed(a.seed, "nmi_shuffle"));
    double mean = 0.0;
    for (double x : shuffled) mean += x;
    report.add("nmi_shuffled_mean", mean / static_cast<double>(shuffled.size()), "trials=20");
  } else if (a.task == "recall") {
    const GrouperMap groups = grouper ? *grouper : GrouperMap::identity(vocab);
    const auto [fit, score] = probe_split(corpus, probe);
    const auto r = recall_probe(fit, score, encoder_for(a.rep, params, vocab.size()), groups, probe);
    std::ostringstream cfg;
    cfg << "k=" << a.k << ";rep=" << a.rep << ";l2=" << r.l2 << ";pairs=" << r.test_size;
    report.add("recall", r.value, cfg.str());
    report.add("recall_frequency", frequency_recall(fit, score, groups, a.k), "k=" + std::to_string(a.k));
  } else if (a.task == "auc") {
    if (!corpus.has_labels()) throw UsageError("--task auc needs --labels");
    const auto [fit, score] = probe_split(corpus, probe);
    const auto encode = encoder_for(a.rep, params, vocab.size());
    const auto r = auc_probe(fit, score, encode, probe);
    std::ostringstream cfg;
    cfg << "rep=" << a.rep << ";l2=" << r.l2 << ";visits=" << r.test_size;
    report.add("auc", r.value, cfg.str());
    report.add("auc_shuffled", shuffled_label_auc(fit, score, encode, probe, 10), "trials=10");
    if (!a.lr_out.empty()) {
      write_vector(r.weights, a.lr_out);
      manifest.artifacts.push_back(a.lr_out);
    }
  } else {
    std::vector<CodeIndex> queries;
    for (const auto &q : a.queries) {
      const auto idx = vocab.find(q);
      if (!idx) throw UsageError("unknown query code '" + q + "'");
      queries.push_back(*idx);
    }
    if (queries.empty()) {
      for (CodeIndex c = 0; c < std::min<std::size_t>(vocab.size(), 10); ++c) queries.push_back(c);
    }
    if (a.top >= vocab.size()) throw UsageError("--top must be smaller than the vocabulary");
    for (auto q : queries) {
      const auto neighbors = nearest_codes(embeddings, q, a.top);
      for (std::size_t r = 0; r < neighbors.size(); ++r) {
        report.add("cosine", neighbors[r].similarity,
                   "query=" + vocab.token(q) + ";code=" + vocab.token(neighbors[r].code) +
                       ";rank=" + std::to_string(r + 1));
      }
    }
  }
  const fs::path csv = a.out.empty() ? with_suffix(a.checkpoint, "." + a.task + ".csv") : fs::path(a.out);
  report.write_csv(csv);
  manifest.artifacts.insert(manifest.artifacts.begin(), csv.string());
  out << report.table();
}

// --------------------------------------------------------------- interpret

struct InterpretArgs {
  std::string checkpoint, mode, lr_weights, out;
  std::size_t coord = 0;
  std::size_t k = 10;
  bool include_demographics = false;
};

void add_interpret(CLI::App &app, InterpretArgs &a) {
  app.add_option("--checkpoint", a.checkpoint, "Trained model")->required();
  app.add_option("--mode", a.mode, "Report kind")
      ->required()
      ->check(CLI::IsMember({"code-coord", "visit-coord", "influence"}));
  app.add_option("--coord", a.coord, "Coordinate to explain");
  app.add_option("--k", a.k, "Items per report");
  app.add_option("--lr-weights", a.lr_weights, "Classifier weights over visit coordinates");
  app.add_option("--out", a.out, "Report path (default <checkpoint>.<mode>.txt)");
  app.add_flag("--include-demographics", a.include_demographics, "Rank demographic columns too");
}

void run_interpret(const InterpretArgs &a, RunManifest &manifest, std::ostream &out) {
  manifest.add_input(a.checkpoint);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto &params = ckpt.params;
  std::string text;
  if (a.mode == "code-coord") {
    text = render_report(top_codes_for_coordinate(params, a.coord, a.k), ckpt.vocabulary);
  } else if (a.mode == "visit-coord") {
    const auto report = top_coords_for_visit_coordinate(params, a.coord, a.k, a.include_demographics);
    text = render_report(report, ckpt.vocabulary);
    // Codes behind the strongest code coordinate of this visit coordinate.
    if (!report.items.empty() && report.items.front().index < params.dims().code_dim) {
      const auto k = std::min<std::size_t>(a.k, ckpt.vocabulary.size());
      text += "\n" + render_report(top_codes_for_coordinate(params, report.items.front().index, k),
                                   ckpt.vocabulary);
    }
  } else {
    if (a.lr_weights.empty()) throw UsageError("--mode influence needs --lr-weights");
    manifest.add_input(a.lr_weights);
    const auto influence = classifier_influence(params, load_vector(a.lr_weights));
    const auto top = influence.argmax();
    const auto k = std::min<std::size_t>(a.k, ckpt.vocabulary.size());
    text = render_report(influence) + "\nargmax coordinate " + std::to_string(top) + "\n\n" +
           render_report(top_codes_for_coordinate(params, top, k), ckpt.vocabulary);
  }
  const fs::path path = a.out.empty() ? with_suffix(a.checkpoint, "." + a.mode + ".txt") : fs::path(a.out);
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
  file << text;
  manifest.artifacts = {path.string()};
  out << text;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
  std::string config, out = "pipeline_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
};

void add_pipeline(CLI::App &app, PipelineArgs &a) {
  app.add_option("--config", a.config, "key=value configuration file");
  app.add_option("--seed", a.seed, "Run seed");
  app.add_option("--epochs", a.epochs, "Training epochs");
  app.add_option("--threads", a.threads, "Worker threads for gradients");
  app.add_option("--set", a.overrides, "Extra key=value overrides");
  app.add_option("--out", a.out, "Output directory");
}

void run_pipeline_command(const PipelineArgs &a, RunManifest &manifest, std::ostream &out) {
  PipelineConfig config;
  if (!a.config.empty()) {
    manifest.add_input(a.config);
    config = load_pipeline_config(a.config);
  }
  try {
    if (a.seed) config.seed = *a.seed;
    if (a.epochs) config.train.epochs = *a.epochs;
    if (a.threads) config.train.threads = *a.threads;
    for (const auto &kv : a.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
  manifest.seeds = {{"seed", config.seed},
                    {"corpus", derive_seed(config.seed, "corpus")},
                    {"init", derive_seed(config.seed, "init")},
                    {"shuffle", derive_seed(config.seed, "shuffle")},
                    {"probes", derive_seed(config.seed, "probes")}};
  manifest.extra = config.entries();
  const auto result = run_pipeline(config, a.out, &out);
  manifest.artifacts = result.artifacts;
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app("Med2Vec: code and visit representations from visit sequences", "med2vec");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthArgs synth;
  TrainArgs train_args;
  EvalArgs eval;
  InterpretArgs interp;
  PipelineArgs pipe;
  auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with a grouper and labels");
  auto *train_cmd = app.add_subcommand("train", "Train a model on a visit corpus");
  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto *interp_cmd = app.add_subcommand("interpret", "Explain code and visit coordinates");
  auto *pipe_cmd = app.add_subcommand("pipeline", "Run synth, split, train, eval and interpret");
  add_synth(*synth_cmd, synth);
  add_train(*train_cmd, train_args);
  add_eval(*eval_cmd, eval);
  add_interpret(*interp_cmd, interp);
  add_pipeline(*pipe_cmd, pipe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  const CLI::App *active = app.get_subcommands().front();
  RunManifest manifest;
  manifest.subcommand = active->get_name();
  manifest.flags = collect_flags(*active);
  fs::path manifest_at;
  try {
    if (active == synth_cmd) {
      run_synth(synth, manifest, out);
      manifest_at = fs::path(synth.out) / "manifest.json";
    } else if (active == train_cmd) {
      run_train(train_args, manifest, out, err);
      manifest_at = manifest_path_for(train_args.out);
    } else if (active == eval_cmd) {
      run_eval(eval, manifest, out, err);
      manifest_at = manifest_path_for(manifest.artifacts.front());
    } else if (active == interp_cmd) {
      run_interpret(interp, manifest, out);
      manifest_at = manifest_path_for(manifest.artifacts.front());
    } else {
      run_pipeline_command(pipe, manifest, out);
      manifest_at = fs::path(pipe.out) / "manifest.json";
    }
    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.write(manifest_at);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace med2vec

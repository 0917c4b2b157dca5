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

#ifndef MED2VEC_PIPELINE_HPP
#define MED2VEC_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "med2vec/corpus.hpp"
#include "med2vec/evaluation.hpp"
#include "med2vec/trainer.hpp"

namespace med2vec {

// End-to-end experiment settings. Every key has a default; a config file of
// `key = value` lines overrides them, and CLI flags override the file.
struct PipelineConfig {
  std::uint64_t seed = 7;
  SynthConfig synth;
  double split_ratio = 0.8;
  TrainConfig train = default_train();
  std::size_t recall_k = 10;
  std::size_t probe_epochs = 10;
  std::size_t nmi_trials = 20;
  std::size_t auc_trials = 10;
  std::size_t interpret_k = 10;
  std::size_t neighbor_top = 5;

  // Throws std::invalid_argument for unknown keys or unparsable values.
  void set(const std::string &key, const std::string &value);
  std::map<std::string, std::string> entries() const;
  ProbeConfig probe_config() const;

  static TrainConfig default_train();
};

// Applies a key=value file on top of `base`. '#' starts a comment.
PipelineConfig load_pipeline_config(const std::filesystem::path &path, PipelineConfig base = {});

// Writes <prefix>visits.txt plus demo.txt and labels.txt when the corpus
// carries them. Returns the paths written.
std::vector<std::string> write_corpus_files(const Corpus &corpus, const std::filesystem::path &dir,
                                            const std::string &prefix);

// Seeded 4:1 split of `held` for fitting and scoring the probes.
std::pair<Corpus, Corpus> probe_split(const Corpus &held, const ProbeConfig &config);

struct PipelineResult {
  EvalReport report;
  TrainLog log;
  std::vector<std::string> artifacts;
};

// synth -> split -> train -> eval -> interpret, writing every artifact to
// out_dir. A failing stage is reported as "stage '<name>' failed: ...".
PipelineResult run_pipeline(const PipelineConfig &config, const std::filesystem::path &out_dir,
                            std::ostream *progress = nullptr);

}  // namespace med2vec

#endif

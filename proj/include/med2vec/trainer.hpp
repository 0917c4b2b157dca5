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

#ifndef MED2VEC_TRAINER_HPP
#define MED2VEC_TRAINER_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "med2vec/corpus.hpp"
#include "med2vec/model.hpp"

namespace med2vec {

struct TrainConfig {
  std::size_t code_dim = 200;   // m
  std::size_t visit_dim = 200;  // n
  std::size_t window = 1;       // w
  std::size_t epochs = 10;
  std::size_t batch_size = 1000;
  double alpha = 1.0;
  std::uint64_t seed = 7;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  bool use_grouper = true;
  unsigned threads = 1;
  // Per-epoch progress lines go here when set.
  std::ostream *progress = nullptr;

  void validate() const;
};

// Adadelta running averages E[g^2] and E[dx^2], one per parameter array.
struct OptimizerState {
  Gradients mean_sq_grad;
  Gradients mean_sq_update;

  OptimizerState() = default;
  explicit OptimizerState(const ModelDims &dims) : mean_sq_grad(dims), mean_sq_update(dims) {}
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double visit = 0.0;
  double code = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  // Hyperparameters not visible in the per-epoch rows (optimizer and
  // initialization choices), kept for reproducibility.
  std::map<std::string, std::string> metadata;
};

// CSV with header `epoch,total,visit,code,seconds`.
void write_train_log(const TrainLog &log, const std::filesystem::path &path);

// Target sets of every visit in corpus order: grouped codes when a grouper
// is given, raw code indices otherwise.
std::vector<std::vector<TargetSet>> visit_target_sets(const Corpus &corpus,
                                                      const GrouperMap *grouper);

// Shuffles patients with seed ^ epoch, walks their visits in order and pairs
// each visit with the targets at offsets -window..window (excluding 0)
// inside the same patient. The last batch may be short.
std::vector<std::vector<WindowExample>> make_batches(
    const Corpus &corpus, const std::vector<std::vector<TargetSet>> &targets,
    std::size_t window, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

// One elementwise Adadelta update of params and state.
void adadelta_step(ModelParams &params, const Gradients &grads, OptimizerState &state,
                   double rho, double eps);

// Shortest text that parses back to the same double.
std::string format_double(double x);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// grouper is required iff config.use_grouper.
TrainResult train(const Corpus &corpus, const GrouperMap *grouper, const TrainConfig &config);

}  // namespace med2vec

#endif

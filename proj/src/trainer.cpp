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

#include "med2vec/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "med2vec/seed.hpp"

namespace med2vec {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void TrainConfig::validate() const {
  if (code_dim < 1 || visit_dim < 1) throw std::invalid_argument("m and n must be positive");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  if (!(adadelta_eps > 0.0)) throw std::invalid_argument("adadelta eps must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

void write_train_log(const TrainLog &log, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "epoch,total,visit,code,seconds\n" << std::setprecision(10);
  for (const auto &r : log.epochs) {
    out << r.epoch << ',' << r.total << ',' << r.visit << ',' << r.code << ',' << r.seconds << '\n';
  }
}

std::vector<std::vector<TargetSet>> visit_target_sets(const Corpus &corpus,
                                                      const GrouperMap *grouper) {
  std::vector<std::vector<TargetSet>> out;
  out.reserve(corpus.patients().size());
  for (const auto &p : corpus.patients()) {
    std::vector<TargetSet> sets;
    sets.reserve(p.visits.size());
    for (const auto &v : p.visits) {
      if (grouper) {
        sets.push_back(visit_groups(v, *grouper));
      } else {
        sets.emplace_back(v.codes.begin(), v.codes.end());
      }
    }
    out.push_back(std::move(sets));
  }
  return out;
}

std::vector<std::vector<WindowExample>> make_batches(
    const Corpus &corpus, const std::vector<std::vector<TargetSet>> &targets,
    std::size_t window, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const auto &patients = corpus.patients();
  if (targets.size() != patients.size()) throw std::invalid_argument("target sets do not match corpus");
  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ epoch);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<WindowExample>> batches;
  std::vector<WindowExample> current;
  current.reserve(std::min(batch_size, corpus.total_visits()));
  for (auto p : order) {
    const auto &visits = patients[p].visits;
    const auto T = visits.size();
    for (std::size_t t = 0; t < T; ++t) {
      WindowExample ex;
      ex.center = visits[t];
      const std::size_t lo = t >= window ? t - window : 0;
      const std::size_t hi = std::min(T - 1, t + window);
      for (std::size_t s = lo; s <= hi; ++s) {
        if (s != t) ex.context.push_back(targets[p][s]);
      }
      current.push_back(std::move(ex));
      if (current.size() == batch_size) {
        batches.push_back(std::move(current));
        current.clear();
      }
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

void adadelta_step(ModelParams &params, const Gradients &grads, OptimizerState &state,
                   double rho, double eps) {
  if (params.dims() != grads.dims() || params.dims() != state.mean_sq_grad.dims() ||
      params.dims() != state.mean_sq_update.dims()) {
    throw std::invalid_argument("adadelta: shape mismatch");
  }
  if (!grads.all_finite()) throw NumericError("adadelta: non-finite gradient");
  auto theta = params.flat();
  auto g = grads.flat();
  auto eg2 = state.mean_sq_grad.flat();
  auto edx2 = state.mean_sq_update.flat();
  for (std::size_t a = 0; a < theta.size(); ++a) {
    eg2[a] = rho * eg2[a] + (1.0 - rho) * g[a].cwiseAbs2();
    const Eigen::VectorXd delta =
        -((edx2[a].array() + eps).sqrt() / (eg2[a].array() + eps).sqrt() * g[a].array()).matrix();
    edx2[a] = rho * edx2[a] + (1.0 - rho) * delta.cwiseAbs2();
    theta[a] += delta;
  }
}

TrainResult train(const Corpus &corpus, const GrouperMap *grouper, const TrainConfig &config) {
  config.validate();
  if (config.use_grouper && !grouper) throw std::invalid_argument("grouped targets need a grouper");
  if (!config.use_grouper) grouper = nullptr;
  if (grouper && grouper->num_codes() != corpus.num_codes()) {
    throw std::invalid_argument("grouper does not cover the corpus vocabulary");
  }

  ModelDims dims;
  dims.num_codes = corpus.num_codes();
  dims.code_dim = config.code_dim;
  dims.visit_dim = config.visit_dim;
  dims.demo_dim = corpus.demographic_size();
  dims.num_groups = grouper ? grouper->num_groups() : corpus.num_codes();

  TrainResult result{ModelParams::glorot(dims, derive_seed(config.seed, "init")), {}};
  OptimizerState state(dims);
  const auto targets = visit_target_sets(corpus, grouper);
  const auto shuffle_seed = derive_seed(config.seed, "shuffle");

  auto &meta = result.log.metadata;
  meta["optimizer"] = "adadelta";
  meta["adadelta_rho"] = format_double(config.adadelta_rho);
  meta["adadelta_eps"] = format_double(config.adadelta_eps);
  meta["init"] = "glorot_uniform_sqrt6_over_fan_in_plus_fan_out;bias_zero";
  meta["targets"] = grouper ? "grouped" : "exact";
  meta["num_targets"] = std::to_string(dims.num_groups);
  meta["batch_size"] = std::to_string(config.batch_size);
  meta["window"] = std::to_string(config.window);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches =
        make_batches(corpus, targets, config.window, config.batch_size, shuffle_seed, epoch);
    double visit_sum = 0.0, code_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        auto [loss, grads] = backward(batches[b], result.params, config.alpha, config.threads);
        adadelta_step(result.params, grads, state, config.adadelta_rho, config.adadelta_eps);
        const auto size = static_cast<double>(batches[b].size());
        visit_sum += loss.visit_loss * size;
        code_sum += loss.code_loss * size;
        seen += batches[b].size();
      } catch (const NumericError &e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.visit = visit_sum / static_cast<double>(seen);
    rec.code = code_sum / static_cast<double>(seen);
    rec.total = rec.visit + config.alpha * rec.code;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    if (config.progress) {
      *config.progress << "epoch " << epoch << "  total " << std::fixed << std::setprecision(4)
                       << rec.total << "  visit " << rec.visit << "  code " << rec.code << "  ("
                       << std::setprecision(2) << rec.seconds << "s)\n"
                       << std::defaultfloat;
    }
  }
  return result;
}

}  // namespace med2vec

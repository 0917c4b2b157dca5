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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "med2vec/evaluation.hpp"

namespace med2vec {

CodeEmbeddings::CodeEmbeddings(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (!matrix_.allFinite()) throw std::invalid_argument("code embeddings must be finite");
  if (matrix_.size() > 0 && matrix_.minCoeff() < 0.0) {
    throw std::invalid_argument("code embeddings must be non-negative");
  }
}

CodeEmbeddings CodeEmbeddings::from_params(const ModelParams &params) {
  return CodeEmbeddings(params.code_weights.cwiseMax(0.0));
}

namespace {

// Entropy in nats of a count table with the given total.
template <typename Counts>
double entropy(const Counts &counts, double total) {
  double h = 0.0;
  for (const auto &[key, count] : counts) {
    const double p = static_cast<double>(count) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double nmi(std::span<const int> assignment, std::span<const int> truth) {
  if (assignment.size() != truth.size()) throw std::invalid_argument("nmi: length mismatch");
  if (assignment.empty()) throw std::invalid_argument("nmi: empty labelings");
  std::unordered_map<int, std::size_t> ca, ct;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++ca[assignment[i]];
    ++ct[truth[i]];
    ++joint[{assignment[i], truth[i]}];
  }
  const auto n = static_cast<double>(truth.size());
  const double ha = entropy(ca, n);
  const double ht = entropy(ct, n);
  if (ha + ht == 0.0) return 1.0;
  const double mi = std::max(0.0, ha + ht - entropy(joint, n));
  return std::clamp(mi / (0.5 * (ha + ht)), 0.0, 1.0);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives (Mann-Whitney U).
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      } else if (labels[order[t]] != 0) {
        throw std::invalid_argument("auc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  const std::size_t negatives = order.size() - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("auc: both classes are required");
  const auto np = static_cast<double>(positives);
  const auto nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double recall_at_k(const Eigen::VectorXd &scores, std::span<const std::uint32_t> truth,
                   std::size_t k) {
  if (truth.empty()) throw std::invalid_argument("recall: empty truth set");
  const auto G = static_cast<std::size_t>(scores.size());
  if (k >= G) return 1.0;
  std::vector<std::uint32_t> order(G);
  std::iota(order.begin(), order.end(), std::uint32_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](auto a, auto b) { return scores(a) > scores(b) || (scores(a) == scores(b) && a < b); });
  std::size_t hits = 0;
  for (auto g : truth) {
    if (g >= G) throw std::out_of_range("recall: truth class out of range");
    if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), g) !=
        order.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

ClusterNmi code_cluster_nmi_detail(const CodeEmbeddings &embeddings, const GrouperMap &grouper,
                                   std::uint64_t seed) {
  if (grouper.num_codes() != embeddings.num_codes()) {
    throw std::invalid_argument("grouper does not cover the embedded codes");
  }
  ClusterNmi out;
  out.assignment = kmeans(embeddings.matrix(), grouper.num_groups(), seed).assignment;
  out.truth.assign(grouper.groups().begin(), grouper.groups().end());
  out.nmi = nmi(out.assignment, out.truth);
  return out;
}

double code_cluster_nmi(const CodeEmbeddings &embeddings, const GrouperMap &grouper,
                        std::uint64_t seed) {
  return code_cluster_nmi_detail(embeddings, grouper, seed).nmi;
}

std::vector<double> permuted_nmi(std::span<const int> assignment, std::span<const int> truth,
                                 std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> shuffled(truth.begin(), truth.end());
  std::vector<double> out;
  out.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    out.push_back(nmi(assignment, shuffled));
  }
  return out;
}

std::vector<Neighbor> nearest_codes(const CodeEmbeddings &embeddings, CodeIndex query,
                                    std::size_t top) {
  const auto C = embeddings.num_codes();
  if (query >= C) throw std::out_of_range("query code out of range");
  if (top >= C) throw std::invalid_argument("top must be smaller than the vocabulary");
  const auto &E = embeddings.matrix();
  const double qn = E.col(query).norm();
  std::vector<Neighbor> all;
  all.reserve(C - 1);
  for (CodeIndex c = 0; c < C; ++c) {
    if (c == query) continue;
    const double cn = E.col(c).norm();
    const double sim = (qn > 0.0 && cn > 0.0) ? E.col(c).dot(E.col(query)) / (qn * cn) : 0.0;
    all.push_back({c, sim});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor &a, const Neighbor &b) { return a.similarity > b.similarity; });
  all.resize(top);
  return all;
}

void EvalReport::add(std::string name, double value, std::string config) {
  if (!std::isfinite(value)) throw std::invalid_argument("metric '" + name + "' is not finite");
  records.push_back({std::move(name), value, std::move(config)});
}

void EvalReport::write_csv(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "metric,value,config\n" << std::setprecision(10);
  for (const auto &r : records) out << r.name << ',' << r.value << ',' << r.config << '\n';
}

std::string EvalReport::table() const {
  std::size_t w = 6;
  for (const auto &r : records) w = std::max(w, r.name.size());
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(w)) << "metric" << "  " << std::setw(10) << "value"
    << "  config\n";
  for (const auto &r : records) {
    s << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << std::setw(10) << std::fixed
      << std::setprecision(4) << r.value << "  " << r.config << '\n';
  }
  return s.str();
}

}  // namespace med2vec

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

#ifndef MED2VEC_EVALUATION_HPP
#define MED2VEC_EVALUATION_HPP

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "med2vec/corpus.hpp"
#include "med2vec/model.hpp"

namespace med2vec {

// Non-negative code embedding matrix, one column per code.
class CodeEmbeddings {
 public:
  // Throws std::invalid_argument on negative or non-finite entries.
  explicit CodeEmbeddings(Eigen::MatrixXd matrix);
  // ReLU(W_c).
  static CodeEmbeddings from_params(const ModelParams &params);

  const Eigen::MatrixXd &matrix() const { return matrix_; }
  std::size_t num_codes() const { return static_cast<std::size_t>(matrix_.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }

 private:
  Eigen::MatrixXd matrix_;
};

// ------------------------------------------------------------------ k-means

struct KMeansResult {
  std::vector<int> assignment;
  Eigen::MatrixXd centroids;  // dim x k
  // Within-cluster sum of squares after each Lloyd iteration.
  std::vector<double> sse_history;
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKMeansMaxIterations = 300;

// Lloyd's algorithm from k-means++ seeding over the columns of `points`.
// Runs to an assignment fixpoint or max_iterations. An empty cluster claims
// the point farthest from its own centroid, provided that distance is
// positive. Ties in the nearest-centroid rule go to the lower index.
KMeansResult kmeans(const Eigen::MatrixXd &points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = kKMeansMaxIterations);

// ------------------------------------------------------------------ metrics

// I(A;B) / ((H(A) + H(B)) / 2); 1 when both entropies are zero.
double nmi(std::span<const int> assignment, std::span<const int> truth);

// Rank-statistic AUC with ties counted one half. Throws unless both classes
// are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// |top-k(scores) ∩ truth| / |truth|. Ties in scores go to the lower index.
double recall_at_k(const Eigen::VectorXd &scores, std::span<const std::uint32_t> truth,
                   std::size_t k);

// k-means over code columns with k = number of groups, scored by nmi against
// the group labels.
struct ClusterNmi {
  double nmi = 0.0;
  std::vector<int> assignment;
  std::vector<int> truth;
};
ClusterNmi code_cluster_nmi_detail(const CodeEmbeddings &embeddings, const GrouperMap &grouper,
                                   std::uint64_t seed);
double code_cluster_nmi(const CodeEmbeddings &embeddings, const GrouperMap &grouper,
                        std::uint64_t seed);

// nmi of `assignment` against `trials` seeded permutations of `truth`.
std::vector<double> permuted_nmi(std::span<const int> assignment, std::span<const int> truth,
                                 std::size_t trials, std::uint64_t seed);

struct Neighbor {
  CodeIndex code;
  double similarity;
};

// Cosine neighbors of `query`, descending, query excluded, ties by index.
// Zero-norm columns have similarity 0 with everything.
std::vector<Neighbor> nearest_codes(const CodeEmbeddings &embeddings, CodeIndex query,
                                    std::size_t top);

// ------------------------------------------------------------------- probes

using VisitEncoder = std::function<Eigen::VectorXd(const Visit &)>;

// v_t of the trained model.
VisitEncoder med2vec_encoder(const ModelParams &params);
// Multi-hot codes followed by the demographics.
VisitEncoder multihot_encoder(std::size_t num_codes);
// Sum of ReLU(W_c) columns over the visit's codes, followed by demographics.
VisitEncoder sumcode_encoder(const ModelParams &params);

struct ProbeConfig {
  std::size_t k = 30;
  std::size_t epochs = 10;
  double train_ratio = 0.8;  // held-off patients used to fit the probe
  std::uint64_t seed = 7;
  std::vector<double> l2_grid = {0.0, 1e-4, 1e-3, 1e-2};
  std::size_t folds = 5;
  double learning_rate = 0.01;
  std::size_t batch_size = 64;

  void validate() const;
};

struct ProbeResult {
  double value = 0.0;
  double l2 = 0.0;            // chosen by cross-validation
  std::size_t test_size = 0;  // pairs or visits scored
};

// Next-visit probe: fits a softmax classifier from encode(V_t) to the grouped
// codes of V_{t+1} on `train` pairs and reports mean Recall@k on `test` pairs.
ProbeResult recall_probe(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                         const GrouperMap &grouper, const ProbeConfig &config);

// Recall@k of always predicting the k groups most frequent among the
// next-visit targets of `train`.
double frequency_recall(const Corpus &train, const Corpus &test, const GrouperMap &grouper,
                        std::size_t k);

struct AucProbeResult : ProbeResult {
  // Logistic-regression weights expressed on the raw (unstandardized)
  // representation, so they can be fed to classifier_influence.
  Eigen::VectorXd weights;
  double bias = 0.0;
};

// Severity probe: logistic regression on encode(V_t) against visit labels.
AucProbeResult auc_probe(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                         const ProbeConfig &config);

// Same, with the labels given explicitly in corpus visit order.
AucProbeResult auc_probe(const Corpus &train, std::span<const int> train_labels,
                         const Corpus &test, std::span<const int> test_labels,
                         const VisitEncoder &encode, const ProbeConfig &config);

// Mean AUC of auc_probe over `trials` runs with the visit labels of both
// sides permuted by seeded shuffles. Chance level is 0.5.
double shuffled_label_auc(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                          const ProbeConfig &config, std::size_t trials);

// ------------------------------------------------------------------- report

struct MetricRecord {
  std::string name;
  double value = 0.0;
  std::string config;
};

struct EvalReport {
  std::vector<MetricRecord> records;

  void add(std::string name, double value, std::string config);
  // CSV with header `metric,value,config`.
  void write_csv(const std::filesystem::path &path) const;
  std::string table() const;
};

}  // namespace med2vec

#endif

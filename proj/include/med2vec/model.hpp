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

#ifndef MED2VEC_MODEL_HPP
#define MED2VEC_MODEL_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "med2vec/corpus.hpp"

namespace med2vec {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs in
// the visit objective.
inline constexpr double kProbClamp = 1e-8;

// Raised when a loss or gradient turns non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelDims {
  std::size_t num_codes = 0;   // |C|
  std::size_t code_dim = 0;    // m
  std::size_t visit_dim = 0;   // n
  std::size_t demo_dim = 0;    // d
  std::size_t num_groups = 0;  // G, equals |C| for exact-code targets

  bool operator==(const ModelDims &) const = default;
};

inline constexpr std::array<std::string_view, 6> kArrayNames = {
    "code_weights", "code_bias", "visit_weights", "visit_bias", "softmax_weights", "softmax_bias"};

// The six trainable arrays. Matrices follow the usual (out x in) layout:
//   code_weights    m x |C|      code_bias    m
//   visit_weights   n x (m + d)  visit_bias   n
//   softmax_weights G x n        softmax_bias G
struct ParamArrays {
  Eigen::MatrixXd code_weights;
  Eigen::VectorXd code_bias;
  Eigen::MatrixXd visit_weights;
  Eigen::VectorXd visit_bias;
  Eigen::MatrixXd softmax_weights;
  Eigen::VectorXd softmax_bias;

  ModelDims dims() const;
  // Throws std::invalid_argument if shapes are inconsistent.
  void check_shapes() const;
  bool all_finite() const;

  // Flat views over each array in kArrayNames order.
  std::array<Eigen::Map<Eigen::VectorXd>, 6> flat();
  std::array<Eigen::Map<const Eigen::VectorXd>, 6> flat() const;

  void set_zero();
  std::size_t size() const;

 protected:
  explicit ParamArrays(const ModelDims &dims);
  ParamArrays() = default;
};

struct ModelParams : ParamArrays {
  ModelParams() = default;
  explicit ModelParams(const ModelDims &dims) : ParamArrays(dims) {}

  // Uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out)), biases zero.
  static ModelParams glorot(const ModelDims &dims, std::uint64_t seed);

  bool operator==(const ModelParams &other) const;
};

struct Gradients : ParamArrays {
  Gradients() = default;
  explicit Gradients(const ModelDims &dims) : ParamArrays(dims) {}

  Gradients &operator+=(const Gradients &other);
  Gradients &operator*=(double scale);
};

struct LossBreakdown {
  double visit_loss = 0.0;
  double code_loss = 0.0;
  double total = 0.0;
};

// Sorted distinct target classes of one context visit (groups, or raw codes
// in exact-target mode).
using TargetSet = std::vector<std::uint32_t>;

// One center visit and the target sets of the visits in its window.
struct WindowExample {
  Visit center;
  std::vector<TargetSet> context;
};

// ReLU(W_c x + b_c) for a dense 0/1 vector x of length |C|.
Eigen::VectorXd intermediate_rep(const Eigen::VectorXd &x, const ModelParams &params);
// Same, for the sparse code list of a visit.
Eigen::VectorXd intermediate_rep(std::span<const CodeIndex> codes, const ModelParams &params);

// ReLU(W_v [u ; demo] + b_v). demo may be empty when d = 0.
Eigen::VectorXd visit_rep(const Eigen::VectorXd &u, std::span<const double> demo,
                          const ModelParams &params);

// Visit representation v_t of a whole visit.
Eigen::VectorXd encode_visit(const Visit &visit, const ModelParams &params);

// Stabilized softmax(W_s v + b_s).
Eigen::VectorXd predict_neighbors(const Eigen::VectorXd &v, const ModelParams &params);

Eigen::VectorXd softmax(const Eigen::VectorXd &logits);

// Sum over context targets of the binary cross entropy between each target
// and the softmax prediction from v.
double visit_loss(std::span<const TargetSet> targets, const Eigen::VectorXd &v,
                  const ModelParams &params);

// p(c_j | c_i) under the softmax over inner products of ReLU(W_c) columns.
double code_pair_prob(CodeIndex i, CodeIndex j, const ModelParams &params);

// -sum over ordered pairs i != j in the visit of log p(c_j | c_i).
double code_loss(std::span<const CodeIndex> codes, const ModelParams &params);

// Batch means of both objectives; total = visit + alpha * code.
LossBreakdown unified_loss(std::span<const WindowExample> batch, const ModelParams &params,
                           double alpha);

// Loss and exact gradients of unified_loss. With threads > 1 the batch is
// cut into contiguous chunks whose gradients are summed in chunk order.
std::pair<LossBreakdown, Gradients> backward(std::span<const WindowExample> batch,
                                             const ModelParams &params, double alpha,
                                             unsigned threads = 1);

}  // namespace med2vec

#endif

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

#ifndef MED2VEC_INTERPRET_HPP
#define MED2VEC_INTERPRET_HPP

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "med2vec/corpus.hpp"
#include "med2vec/model.hpp"

namespace med2vec {

enum class ItemKind { kCode, kCodeCoordinate };

struct RankedItem {
  std::size_t index = 0;
  double value = 0.0;

  bool operator==(const RankedItem &) const = default;
};

struct CoordinateReport {
  std::size_t coordinate = 0;
  // Descending by value, ascending index on ties.
  std::vector<RankedItem> items;
  ItemKind kind = ItemKind::kCode;
};

// Non-negative, one entry per code coordinate.
struct InfluenceVector {
  Eigen::VectorXd values;

  std::size_t argmax() const;
};

// Top k codes of row i of W_c.
CoordinateReport top_codes_for_coordinate(const ModelParams &params, std::size_t i, std::size_t k);

// Top k code coordinates of row i of W_v. Columns past m belong to the
// demographic block and are ranked only when include_demographics is set.
CoordinateReport top_coords_for_visit_coordinate(const ModelParams &params, std::size_t i,
                                                 std::size_t k, bool include_demographics = false);

// (W_v[:, :m]^T w)_+ scaled to unit norm, times the largest attainable value
// of each u coordinate, max(0, max_j W_c[i,j] + b_c[i]).
InfluenceVector classifier_influence(const ModelParams &params, const Eigen::VectorXd &w_lr);

// Per-coordinate ceiling used by classifier_influence.
Eigen::VectorXd max_activation(const ModelParams &params);

std::string render_report(const CoordinateReport &report, const Vocabulary &vocabulary);
std::string render_report(const InfluenceVector &influence);

// Reads whitespace-separated reals; throws FormatError on junk.
Eigen::VectorXd load_vector(const std::filesystem::path &path);
void write_vector(const Eigen::VectorXd &values, const std::filesystem::path &path);

}  // namespace med2vec

#endif

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

#include "med2vec/interpret.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace med2vec {

namespace {

std::vector<RankedItem> rank(const Eigen::VectorXd &row, std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(row.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
  });
  std::vector<RankedItem> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({order[r], row(static_cast<Eigen::Index>(order[r]))});
  return out;
}

}  // namespace

std::size_t InfluenceVector::argmax() const {
  Eigen::Index best = 0;
  if (values.size() == 0) throw std::invalid_argument("empty influence vector");
  values.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

CoordinateReport top_codes_for_coordinate(const ModelParams &params, std::size_t i, std::size_t k) {
  const auto &W = params.code_weights;
  if (i >= static_cast<std::size_t>(W.rows())) throw std::out_of_range("coordinate out of range");
  if (k > static_cast<std::size_t>(W.cols())) throw std::out_of_range("k exceeds the number of codes");
  return {i, rank(W.row(static_cast<Eigen::Index>(i)).transpose(), k), ItemKind::kCode};
}

CoordinateReport top_coords_for_visit_coordinate(const ModelParams &params, std::size_t i,
                                                 std::size_t k, bool include_demographics) {
  const auto &W = params.visit_weights;
  const auto m = params.code_weights.rows();
  if (i >= static_cast<std::size_t>(W.rows())) throw std::out_of_range("coordinate out of range");
  const Eigen::Index width = include_demographics ? W.cols() : m;
  if (k > static_cast<std::size_t>(width)) throw std::out_of_range("k exceeds the number of coordinates");
  const Eigen::VectorXd row = W.row(static_cast<Eigen::Index>(i)).head(width).transpose();
  return {i, rank(row, k), ItemKind::kCodeCoordinate};
}

Eigen::VectorXd max_activation(const ModelParams &params) {
  const auto &W = params.code_weights;
  if (W.cols() == 0) return Eigen::VectorXd::Zero(W.rows());
  return (W.rowwise().maxCoeff() + params.code_bias).cwiseMax(0.0);
}

InfluenceVector classifier_influence(const ModelParams &params, const Eigen::VectorXd &w_lr) {
  const auto m = params.code_weights.rows();
  if (w_lr.size() != params.visit_weights.rows()) {
    throw std::invalid_argument("classifier weights must have length n");
  }
  Eigen::VectorXd s = (params.visit_weights.leftCols(m).transpose() * w_lr).cwiseMax(0.0);
  const double norm = s.norm();
  if (norm > 0.0) s /= norm;
  return {s.cwiseProduct(max_activation(params))};
}

std::string render_report(const CoordinateReport &report, const Vocabulary &vocabulary) {
  const bool codes = report.kind == ItemKind::kCode;
  std::vector<std::string> names;
  std::size_t width = codes ? 4 : 10;
  for (const auto &item : report.items) {
    if (codes) {
      if (item.index >= vocabulary.size()) throw std::out_of_range("report code outside the vocabulary");
      names.push_back(vocabulary.token(static_cast<CodeIndex>(item.index)));
    } else {
      names.push_back(std::to_string(item.index));
    }
    width = std::max(width, names.back().size());
  }
  std::ostringstream s;
  s << "# " << (codes ? "code coordinate " : "visit coordinate ") << report.coordinate << '\n';
  s << std::left << std::setw(5) << "rank" << "  " << std::setw(static_cast<int>(width))
    << (codes ? "code" : "coordinate") << "  value\n";
  s << std::fixed << std::setprecision(4);
  for (std::size_t r = 0; r < report.items.size(); ++r) {
    s << std::left << std::setw(5) << r + 1 << "  " << std::setw(static_cast<int>(width)) << names[r]
      << "  " << std::right << std::setw(10) << report.items[r].value << '\n';
  }
  return s.str();
}

std::string render_report(const InfluenceVector &influence) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "coordinate" << "  influence\n" << std::fixed << std::setprecision(4);
  for (Eigen::Index i = 0; i < influence.values.size(); ++i) {
    s << std::left << std::setw(10) << i << "  " << std::right << std::setw(9) << influence.values(i) << '\n';
  }
  return s.str();
}

Eigen::VectorXd load_vector(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(field, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != field.size()) throw FormatError("not a number: '" + field + "'", lineno);
      values.push_back(x);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_vector(const Eigen::VectorXd &values, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.size(); ++i) out << values(i) << '\n';
}

}  // namespace med2vec

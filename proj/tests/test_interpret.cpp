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

#include <gtest/gtest.h>

#include <random>

#include "med2vec/interpret.hpp"
#include "oracles.hpp"

namespace med2vec {
namespace {

ModelParams small(std::size_t C, std::size_t m, std::size_t n, std::size_t d) {
  ModelDims dims;
  dims.num_codes = C;
  dims.code_dim = m;
  dims.visit_dim = n;
  dims.demo_dim = d;
  dims.num_groups = 2;
  ModelParams p(dims);
  p.set_zero();
  return p;
}

std::vector<std::size_t> indices(const CoordinateReport &r) {
  std::vector<std::size_t> out;
  for (const auto &i : r.items) out.push_back(i.index);
  return out;
}

TEST(Interpret, TopCodesExample) {
  auto p = small(3, 1, 1, 0);
  p.code_weights << 0.1, 0.9, 0.5;
  const auto r = top_codes_for_coordinate(p, 0, 2);
  EXPECT_EQ(indices(r), (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(r.items[0].value, 0.9);
  EXPECT_DOUBLE_EQ(r.items[1].value, 0.5);
  EXPECT_EQ(r.kind, ItemKind::kCode);
  EXPECT_THROW(top_codes_for_coordinate(p, 1, 2), std::out_of_range);
  EXPECT_THROW(top_codes_for_coordinate(p, 0, 4), std::out_of_range);
}

TEST(Interpret, TiesAndFullPermutation) {
  auto p = small(5, 2, 1, 0);
  p.code_weights.row(0).setConstant(0.3);
  EXPECT_EQ(indices(top_codes_for_coordinate(p, 0, 3)), (std::vector<std::size_t>{0, 1, 2}));
  p.code_weights.row(1) << 0.2, -1, 4, 0.2, 3;
  auto all = indices(top_codes_for_coordinate(p, 1, 5));
  EXPECT_EQ(all, (std::vector<std::size_t>{2, 4, 0, 3, 1}));
}

TEST(Interpret, RankingInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = testing::random_params(small(15, 3, 2, 0).dims(), 2.0, rng);
    auto q = p;
    q.code_weights = (p.code_weights.array() * 3.0).exp() - 1.0;
    EXPECT_EQ(indices(top_codes_for_coordinate(p, 1, 15)), indices(top_codes_for_coordinate(q, 1, 15)));
  }
}

TEST(Interpret, VisitCoordinateExcludesDemographics) {
  auto p = small(2, 3, 1, 1);
  p.visit_weights << 0, 3, 1, 9;
  const auto r = top_coords_for_visit_coordinate(p, 0, 2);
  EXPECT_EQ(indices(r), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(r.kind, ItemKind::kCodeCoordinate);
  EXPECT_EQ(indices(top_coords_for_visit_coordinate(p, 0, 3)).size(), 3u);
  EXPECT_THROW(top_coords_for_visit_coordinate(p, 0, 4), std::out_of_range);
  EXPECT_EQ(indices(top_coords_for_visit_coordinate(p, 0, 1, true)), (std::vector<std::size_t>{3}));
}

TEST(Interpret, InfluenceHandExample) {
  auto p = small(3, 3, 3, 0);
  p.visit_weights = Eigen::MatrixXd::Identity(3, 3);
  p.code_weights << 2, 1, 0,  //
      5, 4, 0,                //
      -1, -2, -3;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  w(0) = 1.0;
  const auto inf = classifier_influence(p, w);
  Eigen::VectorXd expect(3);
  expect << 2, 0, 0;
  EXPECT_LT((inf.values - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(classifier_influence(p, Eigen::VectorXd::Zero(3)).values, Eigen::VectorXd::Zero(3));
  EXPECT_THROW(classifier_influence(p, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(Interpret, InfluenceProperties) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  ModelDims dims = small(20, 6, 5, 2).dims();
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testing::random_params(dims, 1.0, rng);
    const auto w = testing::random_params(dims, 1.0, rng).visit_bias;
    const auto a = classifier_influence(p, w);
    const auto b = classifier_influence(p, w * scale(rng));
    EXPECT_GE(a.values.minCoeff(), 0.0);
    EXPECT_EQ(a.argmax(), b.argmax());
    const Eigen::VectorXd s = p.visit_weights.leftCols(6).transpose() * w;
    for (Eigen::Index i = 0; i < 6; ++i) {
      if (s(i) <= 0.0) EXPECT_EQ(a.values(i), 0.0);
    }
  }
}

TEST(Interpret, RenderReports) {
  auto p = small(4, 2, 1, 0);
  p.code_weights.row(0) << 0.5, 0.25, 1, 0;
  const auto vocab = testing::numbered_vocabulary(4);
  const auto text = render_report(top_codes_for_coordinate(p, 0, 3), vocab);
  EXPECT_EQ(text, render_report(top_codes_for_coordinate(p, 0, 3), vocab));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 3);
  EXPECT_NE(text.find("c2"), std::string::npos);
  EXPECT_NE(text.find("1.0000"), std::string::npos);
  const auto empty = render_report(top_codes_for_coordinate(p, 0, 0), vocab);
  EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 2);
  InfluenceVector inf{Eigen::VectorXd::Zero(2)};
  const auto inf_text = render_report(inf);
  EXPECT_EQ(std::count(inf_text.begin(), inf_text.end(), '\n'), 3);
}

}  // namespace
}  // namespace med2vec

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

#include <limits>
#include <random>

#include "med2vec/evaluation.hpp"

namespace med2vec {

namespace {

// Squared distances from every point (column) to every centroid; N x k.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd &points, const Eigen::MatrixXd &centroids) {
  const Eigen::VectorXd pn = points.colwise().squaredNorm().transpose();
  const Eigen::RowVectorXd cn = centroids.colwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * points.transpose() * centroids;
  d.colwise() += pn;
  d.rowwise() += cn;
  return d.cwiseMax(0.0);
}

// Nearest centroid per point, lower index on ties. Returns the SSE.
double assign_points(const Eigen::MatrixXd &points, const Eigen::MatrixXd &centroids,
                     std::vector<int> &assignment) {
  const auto N = points.cols();
  const auto k = centroids.cols();
  double sse = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = (points.col(i) - centroids.col(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
    sse += best_d;
  }
  return sse;
}

Eigen::MatrixXd plus_plus_seeding(const Eigen::MatrixXd &points, std::size_t k, std::mt19937_64 &rng) {
  const auto N = static_cast<std::size_t>(points.cols());
  Eigen::MatrixXd centroids(points.rows(), static_cast<Eigen::Index>(k));
  std::uniform_int_distribution<std::size_t> first(0, N - 1);
  centroids.col(0) = points.col(static_cast<Eigen::Index>(first(rng)));
  Eigen::VectorXd nearest = squared_distances(points, centroids.leftCols(1)).col(0);
  for (std::size_t c = 1; c < k; ++c) {
    const double total = nearest.sum();
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      pick = N - 1;
      for (std::size_t i = 0; i < N; ++i) {
        r -= nearest(static_cast<Eigen::Index>(i));
        if (r < 0.0 && nearest(static_cast<Eigen::Index>(i)) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // Every point coincides with a chosen center.
      pick = first(rng);
    }
    centroids.col(static_cast<Eigen::Index>(c)) = points.col(static_cast<Eigen::Index>(pick));
    nearest = nearest.cwiseMin(
        squared_distances(points, centroids.col(static_cast<Eigen::Index>(c))).col(0));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd &points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  const auto N = static_cast<std::size_t>(points.cols());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > N) throw std::invalid_argument("kmeans: k exceeds the number of points");
  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = plus_plus_seeding(points, k, rng);
  result.assignment.assign(N, 0);
  assign_points(points, result.centroids, result.assignment);

  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(counts.begin(), counts.end(), 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < N; ++i) {
      const auto c = static_cast<std::size_t>(result.assignment[i]);
      sums.col(static_cast<Eigen::Index>(c)) += points.col(static_cast<Eigen::Index>(i));
      ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        result.centroids.col(static_cast<Eigen::Index>(c)) =
            sums.col(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double far = 0.0;
      std::size_t donor = N;
      for (std::size_t i = 0; i < N; ++i) {
        const auto own = static_cast<std::size_t>(result.assignment[i]);
        if (counts[own] < 2) continue;
        const double d = (points.col(static_cast<Eigen::Index>(i)) -
                          result.centroids.col(static_cast<Eigen::Index>(own)))
                             .squaredNorm();
        if (d > far) {
          far = d;
          donor = i;
        }
      }
      if (donor == N) continue;
      --counts[static_cast<std::size_t>(result.assignment[donor])];
      ++counts[c];
      result.assignment[donor] = static_cast<int>(c);
      result.centroids.col(static_cast<Eigen::Index>(c)) = points.col(static_cast<Eigen::Index>(donor));
    }
    const auto previous = result.assignment;
    result.sse_history.push_back(assign_points(points, result.centroids, result.assignment));
    result.iterations = it + 1;
    if (result.assignment == previous) break;
  }
  return result;
}

}  // namespace med2vec

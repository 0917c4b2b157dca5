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

#include "med2vec/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace med2vec {

// --------------------------------------------------------------- ParamArrays

ParamArrays::ParamArrays(const ModelDims &d)
    : code_weights(Eigen::MatrixXd::Zero(d.code_dim, d.num_codes)),
      code_bias(Eigen::VectorXd::Zero(d.code_dim)),
      visit_weights(Eigen::MatrixXd::Zero(d.visit_dim, d.code_dim + d.demo_dim)),
      visit_bias(Eigen::VectorXd::Zero(d.visit_dim)),
      softmax_weights(Eigen::MatrixXd::Zero(d.num_groups, d.visit_dim)),
      softmax_bias(Eigen::VectorXd::Zero(d.num_groups)) {
  if (d.num_codes == 0 || d.code_dim == 0 || d.visit_dim == 0 || d.num_groups == 0) {
    throw std::invalid_argument("model dimensions |C|, m, n, G must be positive");
  }
}

ModelDims ParamArrays::dims() const {
  ModelDims d;
  d.num_codes = static_cast<std::size_t>(code_weights.cols());
  d.code_dim = static_cast<std::size_t>(code_weights.rows());
  d.visit_dim = static_cast<std::size_t>(visit_weights.rows());
  d.demo_dim = static_cast<std::size_t>(visit_weights.cols()) - d.code_dim;
  d.num_groups = static_cast<std::size_t>(softmax_weights.rows());
  return d;
}

void ParamArrays::check_shapes() const {
  const auto m = code_weights.rows();
  const auto n = visit_weights.rows();
  const auto G = softmax_weights.rows();
  if (code_bias.size() != m || visit_weights.cols() < m || visit_bias.size() != n ||
      softmax_weights.cols() != n || softmax_bias.size() != G) {
    throw std::invalid_argument("model parameter shapes are inconsistent");
  }
}

bool ParamArrays::all_finite() const {
  for (const auto &a : flat()) {
    if (!a.allFinite()) return false;
  }
  return true;
}

std::array<Eigen::Map<Eigen::VectorXd>, 6> ParamArrays::flat() {
  using M = Eigen::Map<Eigen::VectorXd>;
  return {M(code_weights.data(), code_weights.size()),
          M(code_bias.data(), code_bias.size()),
          M(visit_weights.data(), visit_weights.size()),
          M(visit_bias.data(), visit_bias.size()),
          M(softmax_weights.data(), softmax_weights.size()),
          M(softmax_bias.data(), softmax_bias.size())};
}

std::array<Eigen::Map<const Eigen::VectorXd>, 6> ParamArrays::flat() const {
  using M = Eigen::Map<const Eigen::VectorXd>;
  return {M(code_weights.data(), code_weights.size()),
          M(code_bias.data(), code_bias.size()),
          M(visit_weights.data(), visit_weights.size()),
          M(visit_bias.data(), visit_bias.size()),
          M(softmax_weights.data(), softmax_weights.size()),
          M(softmax_bias.data(), softmax_bias.size())};
}

void ParamArrays::set_zero() {
  for (auto a : flat()) a.setZero();
}

std::size_t ParamArrays::size() const {
  std::size_t total = 0;
  for (const auto &a : flat()) total += static_cast<std::size_t>(a.size());
  return total;
}

ModelParams ModelParams::glorot(const ModelDims &dims, std::uint64_t seed) {
  ModelParams p(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::MatrixXd &w) {
    const double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-r, r);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  };
  fill(p.code_weights);
  fill(p.visit_weights);
  fill(p.softmax_weights);
  return p;
}

bool ModelParams::operator==(const ModelParams &other) const {
  if (dims() != other.dims()) return false;
  auto a = flat();
  auto b = other.flat();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

Gradients &Gradients::operator+=(const Gradients &other) {
  auto a = flat();
  auto b = other.flat();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return *this;
}

Gradients &Gradients::operator*=(double scale) {
  for (auto a : flat()) a *= scale;
  return *this;
}

// ------------------------------------------------------------------ Forward

namespace {

Eigen::VectorXd relu(const Eigen::VectorXd &x) { return x.cwiseMax(0.0); }

Eigen::VectorXd code_pre_activation(std::span<const CodeIndex> codes, const ModelParams &params) {
  Eigen::VectorXd pre = params.code_bias;
  const auto C = static_cast<CodeIndex>(params.code_weights.cols());
  for (auto c : codes) {
    if (c >= C) throw std::out_of_range("code index out of model range");
    pre += params.code_weights.col(c);
  }
  return pre;
}

Eigen::VectorXd concat(const Eigen::VectorXd &u, std::span<const double> demo,
                       const ModelParams &params) {
  const auto width = params.visit_weights.cols();
  if (u.size() + static_cast<Eigen::Index>(demo.size()) != width ||
      u.size() != params.code_weights.rows()) {
    throw std::invalid_argument("visit input width does not match visit_weights");
  }
  Eigen::VectorXd joined(width);
  joined.head(u.size()) = u;
  for (std::size_t i = 0; i < demo.size(); ++i) joined(u.size() + static_cast<Eigen::Index>(i)) = demo[i];
  return joined;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd &logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

Eigen::VectorXd intermediate_rep(const Eigen::VectorXd &x, const ModelParams &params) {
  if (x.size() != params.code_weights.cols()) {
    throw std::invalid_argument("multi-hot width does not match |C|");
  }
  return relu(params.code_weights * x + params.code_bias);
}

Eigen::VectorXd intermediate_rep(std::span<const CodeIndex> codes, const ModelParams &params) {
  return relu(code_pre_activation(codes, params));
}

Eigen::VectorXd visit_rep(const Eigen::VectorXd &u, std::span<const double> demo,
                          const ModelParams &params) {
  return relu(params.visit_weights * concat(u, demo, params) + params.visit_bias);
}

Eigen::VectorXd encode_visit(const Visit &visit, const ModelParams &params) {
  return visit_rep(intermediate_rep(visit.codes, params), visit.demographics, params);
}

Eigen::VectorXd predict_neighbors(const Eigen::VectorXd &v, const ModelParams &params) {
  if (v.size() != params.softmax_weights.cols()) {
    throw std::invalid_argument("visit representation width does not match softmax_weights");
  }
  return softmax(params.softmax_weights * v + params.softmax_bias);
}

namespace {

// Cross-entropy of each target set against y_hat, using the split
//   sum_g -log(1 - y_g) + sum_{g in S} [log(1 - y_g) - log(y_g)].
double window_cross_entropy(std::span<const TargetSet> targets, const Eigen::VectorXd &y_hat) {
  if (targets.empty()) return 0.0;
  const auto G = static_cast<std::uint32_t>(y_hat.size());
  double negatives = 0.0;
  for (Eigen::Index g = 0; g < y_hat.size(); ++g) negatives -= std::log(1.0 - clamp_prob(y_hat(g)));
  double loss = 0.0;
  for (const auto &target : targets) {
    loss += negatives;
    for (auto g : target) {
      if (g >= G) throw std::out_of_range("target class out of range");
      const double p = clamp_prob(y_hat(g));
      loss += std::log(1.0 - p) - std::log(p);
    }
  }
  return loss;
}

}  // namespace

double visit_loss(std::span<const TargetSet> targets, const Eigen::VectorXd &v,
                  const ModelParams &params) {
  if (targets.empty()) return 0.0;
  return window_cross_entropy(targets, predict_neighbors(v, params));
}

double code_pair_prob(CodeIndex i, CodeIndex j, const ModelParams &params) {
  const auto C = static_cast<CodeIndex>(params.code_weights.cols());
  if (i >= C || j >= C) throw std::out_of_range("code index out of model range");
  const Eigen::MatrixXd nonneg = params.code_weights.cwiseMax(0.0);
  const Eigen::VectorXd scores = nonneg.transpose() * nonneg.col(i);
  return softmax(scores)(j);
}

namespace {

double log_sum_exp(const Eigen::VectorXd &x) {
  const double shift = x.maxCoeff();
  return shift + std::log((x.array() - shift).exp().sum());
}

// Code objective of one visit against precomputed ReLU(W_c). When
// `grad_nonneg` is given, adds scale * dLoss/dReLU(W_c) into it.
double code_loss_impl(std::span<const CodeIndex> codes, const Eigen::MatrixXd &nonneg,
                      Eigen::MatrixXd *grad_nonneg, double scale) {
  const auto M = static_cast<Eigen::Index>(codes.size());
  if (M < 2) return 0.0;
  const auto C = nonneg.cols();
  Eigen::MatrixXd members(nonneg.rows(), M);
  for (Eigen::Index a = 0; a < M; ++a) {
    if (codes[a] >= C) throw std::out_of_range("code index out of model range");
    members.col(a) = nonneg.col(codes[a]);
  }
  // scores(k, a) = <w'_k, w'_{codes[a]}>
  Eigen::MatrixXd scores = nonneg.transpose() * members;
  double loss = 0.0;
  Eigen::MatrixXd residual;
  if (grad_nonneg) residual.resize(C, M);
  for (Eigen::Index a = 0; a < M; ++a) {
    const double lse = log_sum_exp(scores.col(a));
    double pair_sum = 0.0;
    for (Eigen::Index b = 0; b < M; ++b) {
      if (b != a) pair_sum += scores(codes[b], a);
    }
    loss += static_cast<double>(M - 1) * lse - pair_sum;
    if (grad_nonneg) {
      residual.col(a) = static_cast<double>(M - 1) * (scores.col(a).array() - lse).exp().matrix();
      for (Eigen::Index b = 0; b < M; ++b) {
        if (b != a) residual(codes[b], a) -= 1.0;
      }
    }
  }
  if (grad_nonneg) {
    // dL/dw'_k += sum_a r(k,a) w'_{codes[a]};  dL/dw'_{codes[a]} += W' r(:,a)
    grad_nonneg->noalias() += scale * (members * residual.transpose());
    const Eigen::MatrixXd back = nonneg * residual;
    for (Eigen::Index a = 0; a < M; ++a) grad_nonneg->col(codes[a]) += scale * back.col(a);
  }
  return loss;
}

}  // namespace

double code_loss(std::span<const CodeIndex> codes, const ModelParams &params) {
  const Eigen::MatrixXd nonneg = params.code_weights.cwiseMax(0.0);
  return code_loss_impl(codes, nonneg, nullptr, 0.0);
}

LossBreakdown unified_loss(std::span<const WindowExample> batch, const ModelParams &params,
                           double alpha) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const Eigen::MatrixXd nonneg = params.code_weights.cwiseMax(0.0);
  LossBreakdown out;
  for (const auto &ex : batch) {
    out.visit_loss += visit_loss(ex.context, encode_visit(ex.center, params), params);
    if (alpha != 0.0) out.code_loss += code_loss_impl(ex.center.codes, nonneg, nullptr, 0.0);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.visit_loss *= inv;
  out.code_loss *= inv;
  out.total = out.visit_loss + alpha * out.code_loss;
  return out;
}

// ----------------------------------------------------------------- Backward

namespace {

struct ChunkResult {
  double visit_loss = 0.0;
  double code_loss = 0.0;
  Gradients grads;
  Eigen::MatrixXd grad_nonneg;
};

void backward_chunk(std::span<const WindowExample> chunk, std::size_t offset,
                    const ModelParams &params, const Eigen::MatrixXd &nonneg, double alpha,
                    ChunkResult &out) {
  const auto m = params.code_weights.rows();
  out.grads = Gradients(params.dims());
  out.grad_nonneg = Eigen::MatrixXd::Zero(nonneg.rows(), nonneg.cols());
  auto &g = out.grads;
  for (std::size_t item = 0; item < chunk.size(); ++item) {
    const auto &ex = chunk[item];
    const auto &codes = ex.center.codes;

    if (alpha != 0.0) {
      const double cl = code_loss_impl(codes, nonneg, &out.grad_nonneg, alpha);
      if (!std::isfinite(cl)) {
        throw NumericError("non-finite code loss at batch item " + std::to_string(offset + item));
      }
      out.code_loss += cl;
    }
    if (ex.context.empty()) continue;

    const Eigen::VectorXd u_pre = code_pre_activation(codes, params);
    const Eigen::VectorXd u = relu(u_pre);
    const Eigen::VectorXd joined = concat(u, ex.center.demographics, params);
    const Eigen::VectorXd v_pre = params.visit_weights * joined + params.visit_bias;
    const Eigen::VectorXd v = relu(v_pre);
    const Eigen::VectorXd y_hat = softmax(params.softmax_weights * v + params.softmax_bias);

    const double vl = window_cross_entropy(ex.context, y_hat);
    if (!std::isfinite(vl)) {
      throw NumericError("non-finite visit loss at batch item " + std::to_string(offset + item));
    }
    out.visit_loss += vl;

    // dL/dy_g summed over targets; zero where the clamp is active.
    const auto K = static_cast<double>(ex.context.size());
    Eigen::VectorXd dy(y_hat.size());
    for (Eigen::Index k = 0; k < y_hat.size(); ++k) {
      const double p = y_hat(k);
      dy(k) = (p > kProbClamp && p < 1.0 - kProbClamp) ? K / (1.0 - p) : 0.0;
    }
    for (const auto &target : ex.context) {
      for (auto k : target) {
        const double p = y_hat(k);
        if (p > kProbClamp && p < 1.0 - kProbClamp) dy(k) -= 1.0 / p + 1.0 / (1.0 - p);
      }
    }
    // Softmax Jacobian: dz = y * (dy - <dy, y>)
    const Eigen::VectorXd dz = y_hat.cwiseProduct((dy.array() - dy.dot(y_hat)).matrix());

    g.softmax_weights.noalias() += dz * v.transpose();
    g.softmax_bias += dz;
    Eigen::VectorXd dv = params.softmax_weights.transpose() * dz;
    dv = (v_pre.array() > 0.0).select(dv.array(), 0.0).matrix();
    g.visit_weights.noalias() += dv * joined.transpose();
    g.visit_bias += dv;
    Eigen::VectorXd du = params.visit_weights.leftCols(m).transpose() * dv;
    du = (u_pre.array() > 0.0).select(du.array(), 0.0).matrix();
    g.code_bias += du;
    for (auto c : codes) g.code_weights.col(c) += du;
  }
}

}  // namespace

std::pair<LossBreakdown, Gradients> backward(std::span<const WindowExample> batch,
                                             const ModelParams &params, double alpha,
                                             unsigned threads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const Eigen::MatrixXd nonneg = params.code_weights.cwiseMax(0.0);
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, batch.size());
  std::vector<ChunkResult> results(workers);
  auto chunk_bounds = [&](std::size_t w) {
    return std::pair{batch.size() * w / workers, batch.size() * (w + 1) / workers};
  };
  if (workers == 1) {
    backward_chunk(batch, 0, params, nonneg, alpha, results[0]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          auto [lo, hi] = chunk_bounds(w);
          backward_chunk(batch.subspan(lo, hi - lo), lo, params, nonneg, alpha, results[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  LossBreakdown loss;
  Gradients grads = std::move(results[0].grads);
  Eigen::MatrixXd grad_nonneg = std::move(results[0].grad_nonneg);
  loss.visit_loss = results[0].visit_loss;
  loss.code_loss = results[0].code_loss;
  for (std::size_t w = 1; w < workers; ++w) {
    grads += results[w].grads;
    grad_nonneg += results[w].grad_nonneg;
    loss.visit_loss += results[w].visit_loss;
    loss.code_loss += results[w].code_loss;
  }
  // Code-objective gradient reaches W_c only where ReLU(W_c) is active.
  grads.code_weights.array() += (params.code_weights.array() > 0.0).select(grad_nonneg.array(), 0.0);

  const double inv = 1.0 / static_cast<double>(batch.size());
  grads *= inv;
  loss.visit_loss *= inv;
  loss.code_loss *= inv;
  loss.total = loss.visit_loss + alpha * loss.code_loss;
  if (!std::isfinite(loss.total)) throw NumericError("non-finite total loss");
  if (!grads.all_finite()) throw NumericError("non-finite gradient");
  return {loss, std::move(grads)};
}

}  // namespace med2vec

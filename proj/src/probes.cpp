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

// Linear probes over frozen visit representations: a softmax classifier for
// next-visit groups and a logistic regression for the severity label. Both
// are fit with mini-batch Adam on standardized features, with the L2 weight
// picked by k-fold cross-validation on the training side.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "med2vec/evaluation.hpp"
#include "med2vec/seed.hpp"

namespace med2vec {

void ProbeConfig::validate() const {
  if (k < 1) throw std::invalid_argument("probe k must be >= 1");
  if (epochs < 1) throw std::invalid_argument("probe epochs must be >= 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("probe train ratio must lie in (0,1)");
  if (l2_grid.empty()) throw std::invalid_argument("probe L2 grid is empty");
  if (folds < 2) throw std::invalid_argument("probe needs at least two CV folds");
  if (!(learning_rate > 0.0) || batch_size < 1) throw std::invalid_argument("bad probe optimizer settings");
}

VisitEncoder med2vec_encoder(const ModelParams &params) {
  return [params](const Visit &v) { return encode_visit(v, params); };
}

VisitEncoder multihot_encoder(std::size_t num_codes) {
  return [num_codes](const Visit &v) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_codes + v.demographics.size()));
    for (auto c : v.codes) {
      if (c >= num_codes) throw std::out_of_range("code index out of encoder range");
      x(c) = 1.0;
    }
    for (std::size_t i = 0; i < v.demographics.size(); ++i) {
      x(static_cast<Eigen::Index>(num_codes + i)) = v.demographics[i];
    }
    return x;
  };
}

VisitEncoder sumcode_encoder(const ModelParams &params) {
  Eigen::MatrixXd nonneg = params.code_weights.cwiseMax(0.0);
  return [nonneg](const Visit &v) {
    const auto m = nonneg.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m + static_cast<Eigen::Index>(v.demographics.size()));
    for (auto c : v.codes) {
      if (c >= nonneg.cols()) throw std::out_of_range("code index out of encoder range");
      x.head(m) += nonneg.col(c);
    }
    for (std::size_t i = 0; i < v.demographics.size(); ++i) x(m + static_cast<Eigen::Index>(i)) = v.demographics[i];
    return x;
  };
}

namespace {

// Column-per-example design matrix.
struct Features {
  Eigen::MatrixXd X;
};

struct Standardizer {
  Eigen::VectorXd mean, scale;

  explicit Standardizer(const Eigen::MatrixXd &X) {
    const auto n = static_cast<double>(X.cols());
    mean = X.rowwise().mean();
    Eigen::VectorXd var = (X.colwise() - mean).rowwise().squaredNorm() / n;
    scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd &X) const {
    return (X.colwise() - mean).array().colwise() / scale.array();
  }
};

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t t = 0;
  Eigen::MatrixXd mW, vW;
  Eigen::VectorXd mb, vb;

  Adam(double rate, Eigen::Index rows, Eigen::Index cols)
      : lr(rate), mW(Eigen::MatrixXd::Zero(rows, cols)), vW(Eigen::MatrixXd::Zero(rows, cols)),
        mb(Eigen::VectorXd::Zero(rows)), vb(Eigen::VectorXd::Zero(rows)) {}

  void step(Eigen::MatrixXd &W, Eigen::VectorXd &b, const Eigen::MatrixXd &gW, const Eigen::VectorXd &gb) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    mW = beta1 * mW + (1.0 - beta1) * gW;
    vW = beta2 * vW + (1.0 - beta2) * gW.cwiseAbs2();
    mb = beta1 * mb + (1.0 - beta1) * gb;
    vb = beta2 * vb + (1.0 - beta2) * gb.cwiseAbs2();
    W.array() -= lr * (mW.array() / c1) / ((vW.array() / c2).sqrt() + eps);
    b.array() -= lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
};

// Linear model W x + b, outputs x classes. Multi-label softmax when
// `targets` holds class sets; binary logistic when `labels` is used.
struct LinearModel {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

LinearModel init_model(Eigen::Index outputs, Eigen::Index inputs, std::uint64_t seed) {
  LinearModel model{Eigen::MatrixXd(outputs, inputs), Eigen::VectorXd::Zero(outputs)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  for (Eigen::Index j = 0; j < inputs; ++j)
    for (Eigen::Index i = 0; i < outputs; ++i) model.W(i, j) = u(rng);
  return model;
}

template <typename Residual>
LinearModel fit_linear(const Eigen::MatrixXd &X, std::span<const std::size_t> rows, Eigen::Index outputs,
                       double l2, const ProbeConfig &config, std::uint64_t seed, Residual residual) {
  LinearModel model = init_model(outputs, X.rows(), seed);
  Adam adam(config.learning_rate, outputs, X.rows());
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::mt19937_64 rng(derive_seed(seed, "batches"));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      const auto B = static_cast<Eigen::Index>(hi - lo);
      Eigen::MatrixXd xb(X.rows(), B);
      for (Eigen::Index j = 0; j < B; ++j) xb.col(j) = X.col(static_cast<Eigen::Index>(order[lo + static_cast<std::size_t>(j)]));
      Eigen::MatrixXd logits = (model.W * xb).colwise() + model.b;
      // residual() turns logits into dLoss/dlogits in place.
      for (Eigen::Index j = 0; j < B; ++j) {
        Eigen::VectorXd col = logits.col(j);
        residual(col, order[lo + static_cast<std::size_t>(j)]);
        logits.col(j) = col;
      }
      const double inv = 1.0 / static_cast<double>(B);
      Eigen::MatrixXd gW = inv * logits * xb.transpose() + l2 * model.W;
      Eigen::VectorXd gb = inv * logits.rowwise().sum();
      adam.step(model.W, model.b, gW, gb);
    }
  }
  return model;
}

// Seeded k-fold partition of [0, n).
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < n; ++i) out[i * folds / n].push_back(order[i]);
  return out;
}

// Picks the grid value with the best mean validation score; earlier grid
// entries win ties.
template <typename Score>
double cross_validate(std::size_t n, const ProbeConfig &config, std::uint64_t seed, Score score) {
  const std::size_t folds = std::min(config.folds, n);
  if (folds < 2) return config.l2_grid.front();
  const auto parts = make_folds(n, folds, derive_seed(seed, "folds"));
  double best_l2 = config.l2_grid.front();
  double best = -std::numeric_limits<double>::infinity();
  for (double l2 : config.l2_grid) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> fit;
      for (std::size_t g = 0; g < folds; ++g) {
        if (g != f) fit.insert(fit.end(), parts[g].begin(), parts[g].end());
      }
      if (auto s = score(fit, parts[f], l2)) {
        total += *s;
        ++used;
      }
    }
    if (used == 0) continue;
    const double mean = total / static_cast<double>(used);
    if (mean > best) {
      best = mean;
      best_l2 = l2;
    }
  }
  return best_l2;
}

struct PairSet {
  Eigen::MatrixXd X;
  std::vector<TargetSet> targets;
};

PairSet next_visit_pairs(const Corpus &corpus, const VisitEncoder &encode, const GrouperMap &grouper) {
  std::vector<Eigen::VectorXd> xs;
  PairSet out;
  for (const auto &p : corpus.patients()) {
    for (std::size_t t = 0; t + 1 < p.visits.size(); ++t) {
      xs.push_back(encode(p.visits[t]));
      out.targets.push_back(visit_groups(p.visits[t + 1], grouper));
    }
  }
  if (!xs.empty()) {
    out.X.resize(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].size() != out.X.rows()) throw std::invalid_argument("encoder output width varies");
      out.X.col(static_cast<Eigen::Index>(i)) = xs[i];
    }
  }
  return out;
}

Eigen::MatrixXd encode_visits(const Corpus &corpus, const VisitEncoder &encode) {
  Eigen::MatrixXd X;
  Eigen::Index col = 0;
  for (const auto &p : corpus.patients()) {
    for (const auto &v : p.visits) {
      Eigen::VectorXd x = encode(v);
      if (col == 0) X.resize(x.size(), static_cast<Eigen::Index>(corpus.total_visits()));
      if (x.size() != X.rows()) throw std::invalid_argument("encoder output width varies");
      X.col(col++) = x;
    }
  }
  return X;
}

double mean_recall(const LinearModel &model, const Eigen::MatrixXd &X, std::span<const TargetSet> targets,
                   std::span<const std::size_t> rows, std::size_t k) {
  double total = 0.0;
  for (auto r : rows) {
    const Eigen::VectorXd scores = model.W * X.col(static_cast<Eigen::Index>(r)) + model.b;
    total += recall_at_k(scores, targets[r], k);
  }
  return total / static_cast<double>(rows.size());
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

ProbeResult recall_probe(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                         const GrouperMap &grouper, const ProbeConfig &config) {
  config.validate();
  auto tr = next_visit_pairs(train, encode, grouper);
  auto te = next_visit_pairs(test, encode, grouper);
  if (te.targets.empty()) throw std::invalid_argument("recall probe: no test pairs");
  if (tr.targets.empty()) throw std::invalid_argument("recall probe: no training pairs");
  const Standardizer standardize(tr.X);
  tr.X = standardize.apply(tr.X);
  te.X = standardize.apply(te.X);
  const auto G = static_cast<Eigen::Index>(grouper.num_groups());
  const auto seed = derive_seed(config.seed, "recall_probe");

  const auto &targets = tr.targets;
  auto residual = [&targets](Eigen::VectorXd &logits, std::size_t row) {
    logits = softmax(logits);
    const double w = 1.0 / static_cast<double>(targets[row].size());
    for (auto g : targets[row]) logits(g) -= w;
  };
  auto fold_score = [&](const std::vector<std::size_t> &fit, const std::vector<std::size_t> &held,
                        double l2) -> std::optional<double> {
    const auto model = fit_linear(tr.X, fit, G, l2, config, seed, residual);
    return mean_recall(model, tr.X, targets, held, config.k);
  };
  ProbeResult result;
  result.l2 = cross_validate(targets.size(), config, seed, fold_score);
  const auto model = fit_linear(tr.X, all_rows(targets.size()), G, result.l2, config, seed, residual);
  result.value = mean_recall(model, te.X, te.targets, all_rows(te.targets.size()), config.k);
  result.test_size = te.targets.size();
  return result;
}

double frequency_recall(const Corpus &train, const Corpus &test, const GrouperMap &grouper,
                        std::size_t k) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grouper.num_groups()));
  for (const auto &p : train.patients())
    for (std::size_t t = 1; t < p.visits.size(); ++t)
      for (auto g : visit_groups(p.visits[t], grouper)) counts(g) += 1.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto &p : test.patients()) {
    for (std::size_t t = 1; t < p.visits.size(); ++t) {
      total += recall_at_k(counts, visit_groups(p.visits[t], grouper), k);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("frequency recall: no test pairs");
  return total / static_cast<double>(pairs);
}

AucProbeResult auc_probe(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                         const ProbeConfig &config) {
  const auto train_labels = corpus_labels(train);
  const auto test_labels = corpus_labels(test);
  return auc_probe(train, train_labels, test, test_labels, encode, config);
}

AucProbeResult auc_probe(const Corpus &train, std::span<const int> train_labels, const Corpus &test,
                         std::span<const int> test_labels, const VisitEncoder &encode,
                         const ProbeConfig &config) {
  config.validate();
  if (train_labels.size() != train.total_visits() || test_labels.size() != test.total_visits()) {
    throw std::invalid_argument("auc probe: label count does not match visits");
  }
  auto has_both = [](std::span<const int> y) {
    return std::find(y.begin(), y.end(), 0) != y.end() && std::find(y.begin(), y.end(), 1) != y.end();
  };
  if (!has_both(test_labels)) throw std::invalid_argument("auc probe: test set has a single class");
  if (!has_both(train_labels)) throw std::invalid_argument("auc probe: training set has a single class");

  Eigen::MatrixXd Xtr = encode_visits(train, encode);
  Eigen::MatrixXd Xte = encode_visits(test, encode);
  const Standardizer standardize(Xtr);
  Xtr = standardize.apply(Xtr);
  Xte = standardize.apply(Xte);
  const auto seed = derive_seed(config.seed, "auc_probe");

  auto residual = [&train_labels](Eigen::VectorXd &logit, std::size_t row) {
    logit(0) = 1.0 / (1.0 + std::exp(-logit(0))) - static_cast<double>(train_labels[row]);
  };
  auto scores_of = [](const LinearModel &model, const Eigen::MatrixXd &X, std::span<const std::size_t> rows) {
    std::vector<double> s;
    s.reserve(rows.size());
    for (auto r : rows) s.push_back(model.W.row(0).dot(X.col(static_cast<Eigen::Index>(r))) + model.b(0));
    return s;
  };
  auto fold_score = [&](const std::vector<std::size_t> &fit, const std::vector<std::size_t> &held,
                        double l2) -> std::optional<double> {
    std::vector<int> y;
    for (auto r : held) y.push_back(train_labels[r]);
    if (!has_both(y)) return std::nullopt;
    const auto model = fit_linear(Xtr, fit, 1, l2, config, seed, residual);
    return auc(scores_of(model, Xtr, held), y);
  };

  AucProbeResult result;
  result.l2 = cross_validate(train_labels.size(), config, seed, fold_score);
  const auto model = fit_linear(Xtr, all_rows(train_labels.size()), 1, result.l2, config, seed, residual);
  result.value = auc(scores_of(model, Xte, all_rows(test_labels.size())), test_labels);
  result.test_size = test_labels.size();
  result.weights = model.W.row(0).transpose().cwiseQuotient(standardize.scale);
  result.bias = model.b(0) - result.weights.dot(standardize.mean);
  return result;
}

double shuffled_label_auc(const Corpus &train, const Corpus &test, const VisitEncoder &encode,
                          const ProbeConfig &config, std::size_t trials) {
  if (trials < 1) throw std::invalid_argument("shuffled auc needs at least one trial");
  auto train_labels = corpus_labels(train);
  auto test_labels = corpus_labels(test);
  std::mt19937_64 rng(derive_seed(config.seed, "label_shuffle"));
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::shuffle(train_labels.begin(), train_labels.end(), rng);
    std::shuffle(test_labels.begin(), test_labels.end(), rng);
    total += auc_probe(train, train_labels, test, test_labels, encode, config).value;
  }
  return total / static_cast<double>(trials);
}

}  // namespace med2vec

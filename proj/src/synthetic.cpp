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

// Latent-topic generator for visit corpora. Every code belongs to one latent
// group; a patient walks a Markov chain over groups, and each visit draws
// most of its codes from the currently active group.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "med2vec/corpus.hpp"

namespace med2vec {

void SynthConfig::validate() const {
  if (n_patients < 1 || n_codes < 1 || n_groups < 1) {
    throw std::invalid_argument("synthetic config sizes must be positive");
  }
  if (n_groups > n_codes) throw std::invalid_argument("n_groups must not exceed n_codes");
  if (!(mean_visits_per_patient >= 1.0) || !(mean_codes_per_visit >= 1.0)) {
    throw std::invalid_argument("synthetic means must be >= 1");
  }
  if (!(transition_sharpness > 0.0) || !(within_group_affinity > 0.0)) {
    throw std::invalid_argument("sharpness and affinity must be positive");
  }
  if (with_demographics && !(max_age > 0.0)) throw std::invalid_argument("max_age must be positive");
}

namespace {

constexpr int kNumSexes = 2;
constexpr int kNumEthnicities = 4;
constexpr double kZipfExponent = 0.7;

std::string padded(char prefix, std::size_t value, std::size_t limit) {
  std::string digits = std::to_string(value);
  const std::size_t width = std::to_string(limit > 0 ? limit - 1 : 0).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

SyntheticData generate_synthetic(const SynthConfig &config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t C = config.n_codes;
  const std::size_t G = config.n_groups;

  // Codes are dealt into G contiguous blocks of a random permutation; block
  // order doubles as the in-group popularity rank.
  std::vector<std::size_t> perm(C);
  for (std::size_t i = 0; i < C; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> latent_group(C);
  std::vector<std::vector<std::size_t>> members(G);
  for (std::size_t i = 0; i < C; ++i) {
    const std::size_t g = i * G / C;
    latent_group[perm[i]] = g;
    members[g].push_back(perm[i]);
  }
  std::vector<std::discrete_distribution<std::size_t>> in_group;
  for (const auto &mem : members) {
    std::vector<double> w(mem.size());
    for (std::size_t r = 0; r < w.size(); ++r) w[r] = 1.0 / std::pow(r + 1.0, kZipfExponent);
    in_group.emplace_back(w.begin(), w.end());
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::discrete_distribution<std::size_t>> transition;
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<double> w(G);
    for (auto &x : w) x = std::exp(config.transition_sharpness * normal(rng));
    transition.emplace_back(w.begin(), w.end());
  }

  std::vector<std::size_t> group_order(G);
  for (std::size_t g = 0; g < G; ++g) group_order[g] = g;
  std::shuffle(group_order.begin(), group_order.end(), rng);
  const std::size_t n_severe = (G + 3) / 4;
  std::vector<bool> severe(G, false);
  for (std::size_t i = 0; i < n_severe; ++i) severe[group_order[i]] = true;

  const double p_in_group = config.within_group_affinity / (1.0 + config.within_group_affinity);
  std::bernoulli_distribution from_group(p_in_group);
  std::uniform_int_distribution<std::size_t> any_code(0, C - 1);
  std::uniform_int_distribution<std::size_t> any_group(0, G - 1);
  std::poisson_distribution<int> code_count(config.mean_codes_per_visit);
  const double extra_visits = config.mean_visits_per_patient - 2.0;
  std::uniform_int_distribution<int> sex_dist(0, kNumSexes - 1);
  std::uniform_int_distribution<int> eth_dist(0, kNumEthnicities - 1);
  std::uniform_real_distribution<double> start_age(0.0, 0.6 * config.max_age);
  std::exponential_distribution<double> age_step(2.0);

  // Generated with the raw code ids, then re-indexed below.
  struct RawVisit {
    std::vector<std::size_t> codes;
    std::vector<double> demographics;
    int label;
  };
  std::vector<std::vector<RawVisit>> raw(config.n_patients);
  for (auto &patient : raw) {
    std::size_t n_visits = 2;
    if (extra_visits > 0.0) {
      std::poisson_distribution<int> extra(extra_visits);
      n_visits += static_cast<std::size_t>(extra(rng));
    }
    const int sex = sex_dist(rng);
    const int ethnicity = eth_dist(rng);
    double age = start_age(rng);
    std::size_t group = any_group(rng);
    for (std::size_t t = 0; t < n_visits; ++t) {
      if (t > 0) {
        group = transition[group](rng);
        age += age_step(rng);
      }
      const std::size_t k = std::min<std::size_t>(C, std::max(1, code_count(rng)));
      RawVisit visit;
      const auto &mem = members[group];
      std::size_t in_group_left = mem.size();
      while (visit.codes.size() < k) {
        std::size_t code;
        if (in_group_left > 0 && from_group(rng)) {
          code = mem[in_group[group](rng)];
        } else {
          code = any_code(rng);
        }
        if (std::find(visit.codes.begin(), visit.codes.end(), code) != visit.codes.end()) continue;
        if (latent_group[code] == group) --in_group_left;
        visit.codes.push_back(code);
      }
      if (config.with_demographics) {
        visit.demographics = encode_demographics(age, config.max_age, sex, kNumSexes, ethnicity,
                                                 kNumEthnicities);
      }
      visit.label = severe[group] ? 1 : 0;
      patient.push_back(std::move(visit));
    }
  }

  // Re-index codes in first-appearance order so the corpus round-trips
  // through the text format unchanged.
  Vocabulary vocab;
  std::vector<std::size_t> raw_of_index;
  std::vector<PatientRecord> patients;
  std::vector<int> labels;
  patients.reserve(raw.size());
  for (auto &rp : raw) {
    PatientRecord record;
    for (auto &rv : rp) {
      Visit v;
      for (auto code : rv.codes) {
        const auto before = vocab.size();
        v.codes.push_back(vocab.intern(padded('c', code, C)));
        if (vocab.size() > before) raw_of_index.push_back(code);
      }
      std::sort(v.codes.begin(), v.codes.end());
      v.demographics = std::move(rv.demographics);
      v.label = rv.label;
      labels.push_back(rv.label);
      record.visits.push_back(std::move(v));
    }
    patients.push_back(std::move(record));
  }

  // Groups numbered in first-appearance order over the vocabulary, matching
  // what load_grouper produces from write_grouper output.
  std::vector<GroupIndex> group_index(G, ~GroupIndex{0});
  std::vector<std::string> group_tokens;
  std::vector<GroupIndex> group_of(vocab.size());
  for (CodeIndex c = 0; c < vocab.size(); ++c) {
    const auto g = latent_group[raw_of_index[c]];
    if (group_index[g] == ~GroupIndex{0}) {
      group_index[g] = static_cast<GroupIndex>(group_tokens.size());
      group_tokens.push_back(padded('g', g, G));
    }
    group_of[c] = group_index[g];
  }
  std::vector<GroupIndex> severe_groups;
  for (std::size_t g = 0; g < G; ++g) {
    if (severe[g] && group_index[g] != ~GroupIndex{0}) severe_groups.push_back(group_index[g]);
  }
  std::sort(severe_groups.begin(), severe_groups.end());

  SyntheticData out;
  out.corpus = Corpus(std::move(patients), std::move(vocab));
  out.grouper = GrouperMap(std::move(group_of), std::move(group_tokens));
  out.labels = std::move(labels);
  out.severe_groups = std::move(severe_groups);
  return out;
}

}  // namespace med2vec

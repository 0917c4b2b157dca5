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

#ifndef MED2VEC_CORPUS_HPP
#define MED2VEC_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace med2vec {

using CodeIndex = std::uint32_t;
using GroupIndex = std::uint32_t;

// Raised for malformed input files. line() is 1-based, 0 when the error is
// not tied to a single line.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string &what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Bidirectional code token <-> dense index mapping.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Returns the index of token, inserting it at the end when unseen.
  CodeIndex intern(std::string_view token);
  std::optional<CodeIndex> find(std::string_view token) const;
  CodeIndex index_of(std::string_view token) const;

  const std::string &token(CodeIndex index) const { return tokens_.at(index); }
  const std::vector<std::string> &tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  // FNV-1a over the newline-joined tokens; identifies a vocabulary in
  // checkpoints.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary &other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, CodeIndex> index_;
};

struct Visit {
  // Sorted ascending, no duplicates, never empty.
  std::vector<CodeIndex> codes;
  std::vector<double> demographics;
  // Binary severity label, when a labels file was supplied.
  std::optional<int> label;

  bool operator==(const Visit &) const = default;
};

struct PatientRecord {
  std::vector<Visit> visits;

  bool operator==(const PatientRecord &) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  // Validates every invariant; throws std::invalid_argument on violation.
  Corpus(std::vector<PatientRecord> patients, Vocabulary vocabulary);

  const std::vector<PatientRecord> &patients() const { return patients_; }
  const Vocabulary &vocabulary() const { return vocabulary_; }
  std::size_t total_visits() const { return total_visits_; }
  std::size_t num_codes() const { return vocabulary_.size(); }
  // Width of the demographic vectors (0 when absent).
  std::size_t demographic_size() const { return demographic_size_; }
  bool has_labels() const;

  bool operator==(const Corpus &other) const {
    return vocabulary_ == other.vocabulary_ && patients_ == other.patients_;
  }

 private:
  std::vector<PatientRecord> patients_;
  Vocabulary vocabulary_;
  std::size_t total_visits_ = 0;
  std::size_t demographic_size_ = 0;
};

// Many-to-one code -> group mapping.
class GrouperMap {
 public:
  GrouperMap() = default;
  GrouperMap(std::vector<GroupIndex> group_of, std::vector<std::string> group_tokens);

  // One group per code.
  static GrouperMap identity(const Vocabulary &vocabulary);

  GroupIndex group_of(CodeIndex code) const;
  std::size_t num_groups() const { return group_tokens_.size(); }
  std::size_t num_codes() const { return group_of_.size(); }
  const std::vector<GroupIndex> &groups() const { return group_of_; }
  const std::string &group_token(GroupIndex g) const { return group_tokens_.at(g); }
  const std::vector<std::string> &group_tokens() const { return group_tokens_; }

  bool operator==(const GrouperMap &) const = default;

 private:
  std::vector<GroupIndex> group_of_;
  std::vector<std::string> group_tokens_;
};

struct LoadResult {
  Corpus corpus;
  std::size_t dropped_patients = 0;  // fewer than two visits
  std::size_t dropped_tokens = 0;    // unknown to a fixed vocabulary
};

// Reads the visit file and the optional aligned demographics and labels
// files. With `fixed_vocabulary` set, tokens are mapped through it and
// unknown tokens are dropped; otherwise the vocabulary is built in
// first-appearance order. Patients left with fewer than two visits are
// dropped and counted.
LoadResult load_corpus(const std::filesystem::path &visits_path,
                       const std::optional<std::filesystem::path> &demo_path = {},
                       const std::optional<std::filesystem::path> &labels_path = {},
                       const Vocabulary *fixed_vocabulary = nullptr);

// Writes the corpus in the same formats load_corpus reads. Demographics and
// labels are written only when a path is given.
void write_corpus(const Corpus &corpus, const std::filesystem::path &visits_path,
                  const std::optional<std::filesystem::path> &demo_path = {},
                  const std::optional<std::filesystem::path> &labels_path = {});

// Tab-separated `code<TAB>group` lines. Lines for codes outside the
// vocabulary are ignored; groups are numbered in first-appearance order
// among the remaining lines. Every vocabulary code must be covered.
GrouperMap load_grouper(const std::filesystem::path &path, const Vocabulary &vocabulary);
void write_grouper(const GrouperMap &grouper, const Vocabulary &vocabulary,
                   const std::filesystem::path &path);

// Partitions patients by a seeded shuffle; the first part receives
// ceil(ratio * P) patients.
std::pair<Corpus, Corpus> split_corpus(const Corpus &corpus, double ratio, std::uint64_t seed);

std::vector<double> to_multi_hot(const Visit &visit, std::size_t size);
std::vector<double> group_targets(const Visit &visit, const GrouperMap &grouper);
// Sorted distinct groups touched by the visit; the sparse form of
// group_targets.
std::vector<GroupIndex> visit_groups(const Visit &visit, const GrouperMap &grouper);

// Flattened per-visit labels in corpus order. Throws if any visit is
// unlabeled.
std::vector<int> corpus_labels(const Corpus &corpus);

// Age scaled to [0,1] by max_age, then one-hot sex and ethnicity.
std::vector<double> encode_demographics(double age, double max_age, int sex, int num_sexes,
                                        int ethnicity, int num_ethnicities);

struct SynthConfig {
  std::size_t n_patients = 2000;
  std::size_t n_codes = 500;
  std::size_t n_groups = 20;
  double mean_visits_per_patient = 6.1;
  double mean_codes_per_visit = 7.88;
  double transition_sharpness = 2.0;
  double within_group_affinity = 9.0;
  bool with_demographics = true;
  double max_age = 100.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  Corpus corpus;
  GrouperMap grouper;
  // Per-visit severity label in corpus order (also stored on each Visit).
  std::vector<int> labels;
  std::vector<GroupIndex> severe_groups;
};

SyntheticData generate_synthetic(const SynthConfig &config);

}  // namespace med2vec

#endif

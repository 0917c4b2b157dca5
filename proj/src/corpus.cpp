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

#include "med2vec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace med2vec {

FormatError::FormatError(const std::string &what, std::size_t line)
    : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
      line_(line) {}

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (auto &t : tokens) {
    if (index_.count(t)) {
      throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    }
    intern(t);
  }
}

CodeIndex Vocabulary::intern(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<CodeIndex>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), idx);
  return idx;
}

std::optional<CodeIndex> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CodeIndex Vocabulary::index_of(std::string_view token) const {
  auto idx = find(token);
  if (!idx) throw std::out_of_range("unknown code token '" + std::string(token) + "'");
  return *idx;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto &t : tokens_) {
    for (unsigned char c : t) mix(c);
    mix('\n');
  }
  return h;
}

// -------------------------------------------------------------------- Corpus

Corpus::Corpus(std::vector<PatientRecord> patients, Vocabulary vocabulary)
    : patients_(std::move(patients)), vocabulary_(std::move(vocabulary)) {
  if (vocabulary_.size() == 0) throw std::invalid_argument("corpus vocabulary is empty");
  bool first = true;
  for (const auto &p : patients_) {
    if (p.visits.size() < 2) {
      throw std::invalid_argument("patient record with fewer than two visits");
    }
    for (const auto &v : p.visits) {
      if (v.codes.empty()) throw std::invalid_argument("visit without codes");
      for (std::size_t i = 0; i < v.codes.size(); ++i) {
        if (v.codes[i] >= vocabulary_.size()) {
          throw std::invalid_argument("code index out of vocabulary range");
        }
        if (i > 0 && v.codes[i] <= v.codes[i - 1]) {
          throw std::invalid_argument("visit codes must be sorted and distinct");
        }
      }
      for (double x : v.demographics) {
        if (!std::isfinite(x)) throw std::invalid_argument("non-finite demographic entry");
      }
      if (first) {
        demographic_size_ = v.demographics.size();
        first = false;
      } else if (v.demographics.size() != demographic_size_) {
        throw std::invalid_argument("inconsistent demographic vector width");
      }
      if (v.label && *v.label != 0 && *v.label != 1) {
        throw std::invalid_argument("labels must be 0 or 1");
      }
    }
    total_visits_ += p.visits.size();
  }
}

bool Corpus::has_labels() const {
  if (patients_.empty()) return false;
  for (const auto &p : patients_)
    for (const auto &v : p.visits)
      if (!v.label) return false;
  return true;
}

// ---------------------------------------------------------------- GrouperMap

GrouperMap::GrouperMap(std::vector<GroupIndex> group_of, std::vector<std::string> group_tokens)
    : group_of_(std::move(group_of)), group_tokens_(std::move(group_tokens)) {
  for (auto g : group_of_) {
    if (g >= group_tokens_.size()) throw std::invalid_argument("group index out of range");
  }
  if (group_tokens_.size() > group_of_.size()) {
    throw std::invalid_argument("grouper has more groups than codes");
  }
}

GrouperMap GrouperMap::identity(const Vocabulary &vocabulary) {
  std::vector<GroupIndex> group_of(vocabulary.size());
  std::iota(group_of.begin(), group_of.end(), GroupIndex{0});
  return GrouperMap(std::move(group_of), vocabulary.tokens());
}

GroupIndex GrouperMap::group_of(CodeIndex code) const {
  if (code >= group_of_.size()) {
    throw std::out_of_range("code " + std::to_string(code) + " has no group");
  }
  return group_of_[code];
}

// ------------------------------------------------------------------- Parsing

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

using Block = std::vector<Line>;

bool is_blank(const std::string &s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Splits a file into patient blocks separated by blank lines. Comment lines
// are skipped; runs of blank lines count as one boundary.
std::vector<Block> read_blocks(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<Block> blocks;
  Block current;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (!text.empty() && text.front() == '#') continue;
    if (is_blank(text)) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back({number, text});
  }
  if (!current.empty()) blocks.push_back(std::move(current));
  return blocks;
}

std::vector<std::string> parse_visit_line(const Line &line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line.text);
  std::string tok;
  while (ss >> tok) {
    for (unsigned char c : tok) {
      if (c < 0x20 || c == 0x7f) throw FormatError("control character in code token", line.number);
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

double parse_real(std::string_view field, std::size_t line) {
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("malformed real '" + std::string(field) + "'", line);
  }
  if (!std::isfinite(value)) throw FormatError("non-finite demographic value", line);
  return value;
}

std::vector<double> parse_demo_line(const Line &line) {
  std::vector<double> row;
  std::string_view rest(line.text);
  while (true) {
    auto comma = rest.find(',');
    row.push_back(parse_real(rest.substr(0, comma), line.number));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return row;
}

int parse_label_line(const Line &line) {
  std::string_view s(line.text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw FormatError("label must be 0 or 1", line.number);
}

void check_alignment(const std::vector<Block> &visits, const std::vector<Block> &other,
                     const std::string &what) {
  if (visits.size() != other.size()) {
    throw FormatError(what + " file has " + std::to_string(other.size()) +
                      " patient blocks, visit file has " + std::to_string(visits.size()));
  }
  for (std::size_t p = 0; p < visits.size(); ++p) {
    if (visits[p].size() != other[p].size()) {
      throw FormatError(what + " row count mismatch for patient " + std::to_string(p + 1),
                        other[p].empty() ? 0 : other[p].front().number);
    }
  }
}

struct RawVisit {
  std::vector<std::string> tokens;
  std::vector<double> demographics;
  std::optional<int> label;
};

}  // namespace

LoadResult load_corpus(const std::filesystem::path &visits_path,
                       const std::optional<std::filesystem::path> &demo_path,
                       const std::optional<std::filesystem::path> &labels_path,
                       const Vocabulary *fixed_vocabulary) {
  const auto visit_blocks = read_blocks(visits_path);
  std::vector<Block> demo_blocks, label_blocks;
  if (demo_path) {
    demo_blocks = read_blocks(*demo_path);
    check_alignment(visit_blocks, demo_blocks, "demographics");
  }
  if (labels_path) {
    label_blocks = read_blocks(*labels_path);
    check_alignment(visit_blocks, label_blocks, "labels");
  }

  LoadResult result;
  std::optional<std::size_t> demo_width;
  std::vector<std::vector<RawVisit>> raw;
  for (std::size_t p = 0; p < visit_blocks.size(); ++p) {
    std::vector<RawVisit> visits;
    for (std::size_t t = 0; t < visit_blocks[p].size(); ++t) {
      RawVisit rv;
      for (auto &tok : parse_visit_line(visit_blocks[p][t])) {
        if (fixed_vocabulary && !fixed_vocabulary->find(tok)) {
          ++result.dropped_tokens;
          continue;
        }
        rv.tokens.push_back(std::move(tok));
      }
      if (demo_path) {
        const auto &line = demo_blocks[p][t];
        rv.demographics = parse_demo_line(line);
        if (!demo_width) demo_width = rv.demographics.size();
        if (rv.demographics.size() != *demo_width) {
          throw FormatError("demographic row has " + std::to_string(rv.demographics.size()) +
                                " fields, expected " + std::to_string(*demo_width),
                            line.number);
        }
      }
      if (labels_path) rv.label = parse_label_line(label_blocks[p][t]);
      if (rv.tokens.empty()) continue;  // every token was unknown
      visits.push_back(std::move(rv));
    }
    if (visits.size() < 2) {
      ++result.dropped_patients;
      continue;
    }
    raw.push_back(std::move(visits));
  }
  if (raw.empty()) throw FormatError("corpus is empty after filtering '" + visits_path.string() + "'");

  Vocabulary vocab = fixed_vocabulary ? *fixed_vocabulary : Vocabulary{};
  std::vector<PatientRecord> patients;
  patients.reserve(raw.size());
  for (auto &rp : raw) {
    PatientRecord record;
    for (auto &rv : rp) {
      Visit v;
      for (const auto &tok : rv.tokens) v.codes.push_back(vocab.intern(tok));
      std::sort(v.codes.begin(), v.codes.end());
      v.codes.erase(std::unique(v.codes.begin(), v.codes.end()), v.codes.end());
      v.demographics = std::move(rv.demographics);
      v.label = rv.label;
      record.visits.push_back(std::move(v));
    }
    patients.push_back(std::move(record));
  }
  if (result.dropped_patients > 0) {
    std::cerr << "warning: dropped " << result.dropped_patients
              << " patient(s) with fewer than two visits\n";
  }
  if (result.dropped_tokens > 0) {
    std::cerr << "warning: dropped " << result.dropped_tokens
              << " token(s) outside the vocabulary\n";
  }
  result.corpus = Corpus(std::move(patients), std::move(vocab));
  return result;
}

void write_corpus(const Corpus &corpus, const std::filesystem::path &visits_path,
                  const std::optional<std::filesystem::path> &demo_path,
                  const std::optional<std::filesystem::path> &labels_path) {
  std::ofstream vout(visits_path);
  if (!vout) throw std::runtime_error("cannot write '" + visits_path.string() + "'");
  std::ofstream dout, lout;
  if (demo_path) {
    dout.open(*demo_path);
    if (!dout) throw std::runtime_error("cannot write '" + demo_path->string() + "'");
    dout << std::setprecision(17);
  }
  if (labels_path) {
    lout.open(*labels_path);
    if (!lout) throw std::runtime_error("cannot write '" + labels_path->string() + "'");
  }
  const auto &vocab = corpus.vocabulary();
  bool first_patient = true;
  for (const auto &p : corpus.patients()) {
    if (!first_patient) {
      vout << '\n';
      if (demo_path) dout << '\n';
      if (labels_path) lout << '\n';
    }
    first_patient = false;
    for (const auto &v : p.visits) {
      for (std::size_t i = 0; i < v.codes.size(); ++i) {
        vout << (i ? " " : "") << vocab.token(v.codes[i]);
      }
      vout << '\n';
      if (demo_path) {
        if (v.demographics.empty()) {
          throw std::invalid_argument("corpus has no demographics to write");
        }
        for (std::size_t i = 0; i < v.demographics.size(); ++i) {
          dout << (i ? "," : "") << v.demographics[i];
        }
        dout << '\n';
      }
      if (labels_path) {
        if (!v.label) throw std::invalid_argument("corpus has unlabeled visits");
        lout << *v.label << '\n';
      }
    }
  }
}

GrouperMap load_grouper(const std::filesystem::path &path, const Vocabulary &vocabulary) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  constexpr GroupIndex kUnset = ~GroupIndex{0};
  std::vector<GroupIndex> group_of(vocabulary.size(), kUnset);
  std::vector<std::string> group_tokens;
  std::unordered_map<std::string, GroupIndex> group_index;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (is_blank(text) || text.front() == '#') continue;
    auto tab = text.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= text.size() ||
        text.find('\t', tab + 1) != std::string::npos) {
      throw FormatError("grouper line must be code<TAB>group", number);
    }
    auto code = vocabulary.find(std::string_view(text).substr(0, tab));
    if (!code) continue;
    std::string group = text.substr(tab + 1);
    auto [it, inserted] = group_index.emplace(group, static_cast<GroupIndex>(group_tokens.size()));
    if (inserted) group_tokens.push_back(group);
    if (group_of[*code] != kUnset && group_of[*code] != it->second) {
      throw FormatError("code '" + vocabulary.token(*code) + "' mapped to two groups", number);
    }
    group_of[*code] = it->second;
  }
  for (CodeIndex c = 0; c < group_of.size(); ++c) {
    if (group_of[c] == kUnset) {
      throw FormatError("grouper has no group for code '" + vocabulary.token(c) + "'");
    }
  }
  return GrouperMap(std::move(group_of), std::move(group_tokens));
}

void write_grouper(const GrouperMap &grouper, const Vocabulary &vocabulary,
                   const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (CodeIndex c = 0; c < vocabulary.size(); ++c) {
    out << vocabulary.token(c) << '\t' << grouper.group_token(grouper.group_of(c)) << '\n';
  }
}

// ------------------------------------------------------------------ Helpers

std::pair<Corpus, Corpus> split_corpus(const Corpus &corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0,1)");
  const auto &patients = corpus.patients();
  if (patients.size() < 2) throw std::invalid_argument("split needs at least two patients");
  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto first_size = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(patients.size())));
  // Both parts must be valid corpora.
  first_size = std::clamp<std::size_t>(first_size, 1, patients.size() - 1);
  std::vector<PatientRecord> a, b;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < first_size ? a : b).push_back(patients[order[i]]);
  }
  return {Corpus(std::move(a), corpus.vocabulary()), Corpus(std::move(b), corpus.vocabulary())};
}

std::vector<double> to_multi_hot(const Visit &visit, std::size_t size) {
  std::vector<double> x(size, 0.0);
  for (auto c : visit.codes) {
    if (c >= size) throw std::out_of_range("code index " + std::to_string(c) + " >= " + std::to_string(size));
    x[c] = 1.0;
  }
  return x;
}

std::vector<GroupIndex> visit_groups(const Visit &visit, const GrouperMap &grouper) {
  std::vector<GroupIndex> groups;
  groups.reserve(visit.codes.size());
  for (auto c : visit.codes) groups.push_back(grouper.group_of(c));
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  return groups;
}

std::vector<double> group_targets(const Visit &visit, const GrouperMap &grouper) {
  std::vector<double> y(grouper.num_groups(), 0.0);
  for (auto g : visit_groups(visit, grouper)) y[g] = 1.0;
  return y;
}

std::vector<int> corpus_labels(const Corpus &corpus) {
  std::vector<int> labels;
  labels.reserve(corpus.total_visits());
  for (const auto &p : corpus.patients()) {
    for (const auto &v : p.visits) {
      if (!v.label) throw std::invalid_argument("corpus has unlabeled visits");
      labels.push_back(*v.label);
    }
  }
  return labels;
}

std::vector<double> encode_demographics(double age, double max_age, int sex, int num_sexes,
                                        int ethnicity, int num_ethnicities) {
  if (max_age <= 0.0) throw std::invalid_argument("max_age must be positive");
  if (sex < 0 || sex >= num_sexes || ethnicity < 0 || ethnicity >= num_ethnicities) {
    throw std::out_of_range("demographic category out of range");
  }
  std::vector<double> d(1 + num_sexes + num_ethnicities, 0.0);
  d[0] = std::clamp(age / max_age, 0.0, 1.0);
  d[1 + sex] = 1.0;
  d[1 + num_sexes + ethnicity] = 1.0;
  return d;
}

}  // namespace med2vec

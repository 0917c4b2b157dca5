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

#include "med2vec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace med2vec {

namespace {

constexpr char kMagic[4] = {'M', '2', 'V', 'C'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path &path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char *>(&value), sizeof(T));
  }
  void bytes(const char *data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  // Row-major, regardless of Eigen's storage order.
  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived> &m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path &path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  }
  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in_) throw FormatError("truncated checkpoint");
    return value;
  }
  std::string string(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("truncated checkpoint");
    return s;
  }
  template <typename Derived>
  void matrix(Eigen::MatrixBase<Derived> &m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
};

constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

}  // namespace

void save_checkpoint(const std::filesystem::path &path, const ModelParams &params,
                     const Vocabulary &vocabulary) {
  params.check_shapes();
  const auto d = params.dims();
  if (d.num_codes != vocabulary.size()) {
    throw std::invalid_argument("vocabulary size does not match model |C|");
  }
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(d.code_dim);
  w.put<std::uint64_t>(d.visit_dim);
  w.put<std::uint64_t>(d.demo_dim);
  w.put<std::uint64_t>(d.num_groups);
  w.put<std::uint64_t>(d.num_codes);
  w.put<std::uint64_t>(vocabulary.hash());
  for (const auto &token : vocabulary.tokens()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(token.size()));
    w.bytes(token.data(), token.size());
  }
  w.matrix(params.code_weights);
  w.matrix(params.code_bias);
  w.matrix(params.visit_weights);
  w.matrix(params.visit_bias);
  w.matrix(params.softmax_weights);
  w.matrix(params.softmax_bias);
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  Reader r(path);
  if (r.string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("not a med2vec checkpoint: '" + path.string() + "'");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelDims d;
  d.code_dim = r.get<std::uint64_t>();
  d.visit_dim = r.get<std::uint64_t>();
  d.demo_dim = r.get<std::uint64_t>();
  d.num_groups = r.get<std::uint64_t>();
  d.num_codes = r.get<std::uint64_t>();
  for (auto v : {d.code_dim, d.visit_dim, d.demo_dim, d.num_groups, d.num_codes}) {
    if (v >= kMaxDim) throw FormatError("implausible checkpoint dimension");
  }
  const auto hash = r.get<std::uint64_t>();
  std::vector<std::string> tokens;
  tokens.reserve(d.num_codes);
  for (std::size_t i = 0; i < d.num_codes; ++i) tokens.push_back(r.string(r.get<std::uint32_t>()));
  Checkpoint ck{ModelParams(d), Vocabulary(std::move(tokens))};
  if (ck.vocabulary.hash() != hash) throw FormatError("checkpoint vocabulary hash mismatch");
  r.matrix(ck.params.code_weights);
  r.matrix(ck.params.code_bias);
  r.matrix(ck.params.visit_weights);
  r.matrix(ck.params.visit_bias);
  r.matrix(ck.params.softmax_weights);
  r.matrix(ck.params.softmax_bias);
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint arrays");
  return ck;
}

}  // namespace med2vec

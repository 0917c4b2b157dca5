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

#include "med2vec/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace med2vec {

std::string file_hash(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::uint64_t h = 14695981039346656037ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void RunManifest::add_input(const std::filesystem::path &path) {
  inputs[path.string()] = file_hash(path);
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["flags"] = flags;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["artifacts"] = artifacts;
  if (!extra.empty()) j["extra"] = extra;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << to_json();
}

std::filesystem::path manifest_path_for(const std::filesystem::path &output) {
  if (std::filesystem::is_directory(output)) return output / "manifest.json";
  auto p = output;
  p += ".manifest.json";
  return p;
}

}  // namespace med2vec

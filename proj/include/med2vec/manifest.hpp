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

#ifndef MED2VEC_MANIFEST_HPP
#define MED2VEC_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace med2vec {

// Record of one CLI run, written as JSON beside its outputs.
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::uint64_t> seeds;
  // Input path -> FNV-1a 64 of the file content, hex.
  std::map<std::string, std::string> inputs;
  std::vector<std::string> artifacts;
  std::map<std::string, std::string> extra;
  double wall_seconds = 0.0;

  void add_input(const std::filesystem::path &path);
  std::string to_json() const;
  void write(const std::filesystem::path &path) const;
};

std::string file_hash(const std::filesystem::path &path);

// `<output>.manifest.json`, or `<dir>/manifest.json` for a directory.
std::filesystem::path manifest_path_for(const std::filesystem::path &output);

}  // namespace med2vec

#endif

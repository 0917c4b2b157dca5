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

#ifndef MED2VEC_CHECKPOINT_HPP
#define MED2VEC_CHECKPOINT_HPP

#include <filesystem>

#include "med2vec/corpus.hpp"
#include "med2vec/model.hpp"

namespace med2vec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocabulary vocabulary;
};

// Binary little-endian container, layout documented in
// docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path &path, const ModelParams &params,
                     const Vocabulary &vocabulary);
// Throws FormatError on a bad magic, unknown version, truncated file or a
// vocabulary hash mismatch.
Checkpoint load_checkpoint(const std::filesystem::path &path);

}  // namespace med2vec

#endif

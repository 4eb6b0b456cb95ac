// Copyright 2026-present the dann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dann/common.hpp"

namespace dann {

/// Contiguous row-major float32 vectors with 64-bit ids.
/// Immutable after construction by convention; shareable across threads.
struct VectorDataset {
  uint32_t dim = 0;
  std::vector<uint64_t> ids;  // unique; defaults to 0..count-1
  std::vector<float> data;    // count * dim

  size_t count() const { return ids.size(); }

  std::span<const float> vec(size_t i) const {
    return std::span<const float>(data.data() + i * dim, dim);
  }

  void validate() const;
};

/// Builds a dataset, defaulting ids to 0..count-1. Validates invariants.
VectorDataset make_dataset(uint32_t dim, std::vector<float> data,
                           std::vector<uint64_t> ids = {});

// Vector file, little-endian:
//   magic "DANNVEC1" (8 bytes), dim u32, count u64, dtype u8 (0 = f32),
//   reserved 7 bytes, ids (count x u64), data (count x dim x f32).
void write_vectors(const std::string& path, const VectorDataset& ds);
VectorDataset read_vectors(const std::string& path);

}  // namespace dann

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
#include <vector>

#include "dann/common.hpp"

namespace dann {

struct KmeansResult {
  std::vector<float> centroids;  // k * dim
  std::vector<uint32_t> assign;  // n, nearest centroid per point
  double mse = 0.0;              // mean squared distance to assigned centroid
};

/// Lloyd iterations with k-means++ seeding and a fixed iteration count.
/// Empty clusters are reseeded from the point farthest from its centroid.
/// Deterministic under a fixed seed regardless of thread count.
KmeansResult kmeans(std::span<const float> data, size_t n, uint32_t dim, uint32_t k,
                    uint32_t iters, uint64_t seed, uint32_t threads = 1);

/// Index of the nearest centroid to v; ties go to the lowest index.
uint32_t nearest_centroid(std::span<const float> v, std::span<const float> centroids,
                          uint32_t dim);

}  // namespace dann

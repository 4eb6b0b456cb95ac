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

#include <span>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"

namespace dann {

/// Squared L2 distance. Every distance in the system is squared L2;
/// the square root is never taken since it preserves order.
/// Accumulates in double, returns float. Fixed accumulation order makes the
/// result deterministic for identical inputs.
inline float l2_sq(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) raise(ErrorCode::dim_mismatch, "l2_sq operands differ in length");
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return static_cast<float>(sum);
}

/// Exact top-k by full scan. Ground truth for every recall number.
/// Returns min(k, count) entries sorted by (dist, id) ascending.
std::vector<ScoredId> brute_force_topk(const VectorDataset& ds, std::span<const float> q,
                                       size_t k);

}  // namespace dann

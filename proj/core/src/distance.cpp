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

#include "dann/distance.hpp"

#include <algorithm>

namespace dann {

std::vector<ScoredId> brute_force_topk(const VectorDataset& ds, std::span<const float> q,
                                       size_t k) {
  if (k < 1) raise(ErrorCode::invalid_argument, "brute_force_topk needs k >= 1");
  if (ds.count() == 0) raise(ErrorCode::empty_dataset, "brute_force_topk on empty dataset");
  if (q.size() != ds.dim) raise(ErrorCode::dim_mismatch, "query dim != dataset dim");

  size_t keep = std::min(k, ds.count());
  // Max-heap on (dist, id): the root is the current worst kept entry.
  std::vector<ScoredId> heap;
  heap.reserve(keep);
  auto worse = [](const ScoredId& a, const ScoredId& b) { return scored_less(a, b); };
  for (size_t i = 0; i < ds.count(); ++i) {
    ScoredId s{ds.ids[i], l2_sq(q, ds.vec(i))};
    if (heap.size() < keep) {
      heap.push_back(s);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (scored_less(s, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = s;
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
  std::sort(heap.begin(), heap.end(), ScoredLess{});
  return heap;
}

}  // namespace dann

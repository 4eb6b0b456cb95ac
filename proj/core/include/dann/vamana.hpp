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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"

namespace dann {

/// Degree-bounded proximity graph over a dataset. Adjacency is by dataset
/// position (0..count-1), not by external 64-bit id; callers translate at
/// the node-store boundary.
struct Graph {
  uint32_t entry = 0;       // medoid of the backing dataset
  uint32_t max_degree = 0;  // R at build time
  std::vector<std::vector<uint32_t>> adj;

  size_t size() const { return adj.size(); }
};

/// Expansion order and final results of one beam search.
/// ScoredId.id holds dataset positions here.
struct SearchTrace {
  std::vector<uint32_t> visited;  // nodes expanded, in expansion order
  std::vector<ScoredId> results;  // top-k of the expanded set, ascending
};

struct VamanaParams {
  uint32_t r = 32;
  uint32_t l_build = 64;
  float alpha = 1.2f;
  uint64_t seed = 0;
  uint32_t threads = 1;  // >1 trades determinism for build speed
};

/// Point minimizing distance to the dataset centroid.
uint32_t medoid(const VectorDataset& ds);

/// Incremental Vamana build: two passes over a shuffled insertion order
/// (alpha=1 then the caller's alpha), back-edges with overflow re-pruning,
/// and a final connectivity pass so every node is reachable from the entry.
Graph build_vamana(const VectorDataset& ds, const VamanaParams& params);

/// Alpha-pruning of a candidate set down to at most r neighbors. Candidates
/// are scanned in ascending (dist, id) order; a candidate survives only if
/// alpha * d(kept, c) > d(p, c) for every already-kept neighbor.
std::vector<uint32_t> robust_prune(uint32_t p, std::vector<ScoredId> candidates, float alpha,
                                   uint32_t r, const VectorDataset& ds);

constexpr uint32_t kNoIoLimit = std::numeric_limits<uint32_t>::max();

/// Best-first beam search with candidate list size l. Expands the nearest
/// unexpanded candidate until the top-l are all expanded or io_limit
/// expansions were spent. Results are the k nearest expanded nodes.
SearchTrace greedy_search(const Graph& g, const VectorDataset& ds, std::span<const float> q,
                          uint32_t l, uint32_t k, uint32_t io_limit = kNoIoLimit);

/// Number of nodes reachable from `from` (BFS over out-edges).
size_t reachable_count(const Graph& g, uint32_t from);

/// BFS from several sources at once; returns the visited flags.
std::vector<bool> reach_from(const Graph& g, std::span<const uint32_t> sources);

// Adjacency file, little-endian (pipeline plumbing between CLI stages):
//   magic "DANNGRA1", count u64, entry u32, max_degree u32,
//   then per node: degree u32 + neighbors u32 x degree.
void write_graph(const std::string& path, const Graph& g);
Graph read_graph(const std::string& path);

}  // namespace dann

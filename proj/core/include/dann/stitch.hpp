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
#include "dann/dataset.hpp"
#include "dann/vamana.hpp"

namespace dann {

/// Closure clustering of the corpus: every vector lands in its nearest
/// cluster, plus any cluster whose centroid is within (1+epsilon) of the
/// nearest distance (squared form), capped at max_assign.
struct PartitionAssignment {
  uint32_t p = 0;
  uint32_t dim = 0;
  uint32_t max_assign = 1;
  std::vector<float> centroids;                   // p * dim
  std::vector<std::vector<uint32_t>> membership;  // per vector, nearest-first

  std::span<const float> centroid(uint32_t c) const {
    return std::span<const float>(centroids.data() + static_cast<size_t>(c) * dim, dim);
  }
};

struct ClusterParams {
  uint32_t p = 8;
  float epsilon = 0.1f;
  uint32_t max_assign = 8;
  uint32_t iters = 15;
  uint64_t seed = 0;
  uint32_t threads = 1;
};

PartitionAssignment cluster_assign(const VectorDataset& ds, const ClusterParams& params);

/// Member positions per partition, ascending.
std::vector<std::vector<uint32_t>> partition_members(const PartitionAssignment& pa);

/// Per-partition Vamana graphs. Graph adjacency is in partition-local
/// indices; members maps local index -> corpus position.
struct PartitionGraphs {
  std::vector<Graph> graphs;
  std::vector<std::vector<uint32_t>> members;
  std::vector<std::string> warnings;  // e.g. skipped empty partitions
};

/// One Vamana build per partition (partition i seeded with seed + i).
/// Builds are independent and run concurrently when threads > 1 without
/// affecting the result.
PartitionGraphs build_partitions(const VectorDataset& ds, const PartitionAssignment& pa,
                                 const VamanaParams& params, uint32_t threads = 1);

/// The unified serving graph: per-vector union of neighbor lists across all
/// partitions containing it, deduplicated, distance-sorted, cut to r_serve.
/// Vectors in a single partition keep their original (possibly truncated)
/// list. provenance[i] = number of partitions vector i appeared in.
struct StitchedGraph {
  Graph graph;  // adjacency over corpus positions
  uint32_t r_serve = 0;
  std::vector<uint32_t> provenance;
};

StitchedGraph stitch(const PartitionGraphs& parts, const PartitionAssignment& pa,
                     const VectorDataset& ds, uint32_t r_serve);

/// Head id collection: round-robin BFS over the partition graphs, one level
/// per partition per round, deduplicating into collection order until c ids
/// are gathered. Every partition contributes its entry point first.
/// Returns corpus positions; if c >= corpus count, returns every id.
std::vector<uint32_t> collect_head(const PartitionGraphs& parts, size_t c);

/// Serving-graph connectivity pass: truncating neighbor lists to r_serve can
/// strand a small fraction of nodes with no surviving in-edge. This walks
/// BFS from the head set and attaches every stranded node to its nearest
/// reachable node (replacing that node's worst edge at capacity) until the
/// whole graph is covered. Returns the number of edges added or replaced.
size_t reinforce_reachability(StitchedGraph& sg, const VectorDataset& ds,
                              std::span<const uint32_t> head_positions);

// Partition manifest (text, line-oriented): one line per partition with the
// partition id, byte offset of its centroid row inside the centroids vector
// file, and the member count.
void write_manifest(const std::string& path, const PartitionAssignment& pa,
                    std::span<const size_t> member_counts);

// Assignment file, little-endian: magic "DANNASG1", count u64, P u32,
// dim u32, max_assign u32, centroids (P*dim f32), then per vector:
// u16 n + n x u32 partition ids (nearest first).
void write_assignment(const std::string& path, const PartitionAssignment& pa);
PartitionAssignment read_assignment(const std::string& path);

/// Byte offset of partition c's centroid row inside the centroids vector
/// file written by the pipeline (a "DANNVEC1" file with P rows).
uint64_t centroid_file_offset(const PartitionAssignment& pa, uint32_t c);

}  // namespace dann

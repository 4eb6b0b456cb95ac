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
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "dann/common.hpp"
#include "dann/quantizer.hpp"
#include "dann/transport.hpp"
#include "dann/vamana.hpp"

namespace dann {

/// Multi-hop distributed beam search parameters.
struct SearchParams {
  uint32_t bw = 32;      // candidates expanded per hop
  uint32_t h = 6;        // hop count (0 is legal and returns no results)
  uint32_t k = 10;       // result count
  uint32_t l = 64;       // candidate heap capacity
  uint32_t k_head = 32;  // head index seeds
  // When on, the scoring threshold also reflects the current worst kept
  // result, pruning candidates that could never enter the result heap.
  bool prune_with_result_bound = false;

  void validate() const {
    if (bw < 1 || k < 1 || l < 1 || k_head < 1)
      raise(ErrorCode::invalid_argument, "search params must be positive");
    if (l < bw || l < k)
      raise(ErrorCode::invalid_argument, "candidate size L must be >= max(BW, k)");
  }
};

struct HopRecord {
  uint32_t shards_touched = 0;
  uint32_t keys_sent = 0;
  uint32_t keys_found = 0;
  uint32_t failed_shards = 0;
  std::vector<uint64_t> keys;  // the keys popped this hop
};

struct QueryStats {
  uint32_t io_used = 0;  // keys sent across all hops, <= H * BW
  uint32_t hops_executed = 0;
  double latency_ms = 0.0;  // virtual clock in sim mode
  size_t request_bytes = 0;
  size_t response_bytes = 0;
  uint32_t failed_calls = 0;
  uint32_t ok_calls = 0;
  std::vector<HopRecord> hops;
};

struct SearchResult {
  std::vector<ScoredId> results;  // ascending (dist, id), <= k
  QueryStats stats;
};

/// The in-memory seed index: head vectors (ids are global 64-bit keys),
/// their Vamana graph, and precomputed codes for SDC seed scoring.
struct HeadIndex {
  VectorDataset vectors;
  Graph graph;
  CodeSet codes;
};

/// Builds the head vectors and graph; codes are attached separately once a
/// codebook exists (encode_head) since the head is collected before PQ
/// training in the pipeline.
HeadIndex build_head_index(const VectorDataset& corpus, std::span<const uint32_t> positions,
                           const VamanaParams& params);
void encode_head(HeadIndex& head, const Codebook& cb);

/// Raised when every hop's fan-out failed entirely; carries what was found.
class SearchFailure : public Error {
 public:
  SearchFailure(const std::string& msg, std::vector<ScoredId> partial, QueryStats stats)
      : Error(ErrorCode::all_shards_failed, msg), partial_(std::move(partial)),
        stats_(std::move(stats)) {}
  const std::vector<ScoredId>& partial() const { return partial_; }
  const QueryStats& stats() const { return stats_; }

 private:
  std::vector<ScoredId> partial_;
  QueryStats stats_;
};

/// Orchestrated distributed beam search: seed the candidate heap from the
/// head index (SDC-scored), then run H rounds of pop-best-BW fan-out to the
/// shards' scoring service, merging per-shard sorted results into the heaps.
/// Failed shard responses are dropped and their keys stay visited.
SearchResult search(std::span<const float> q, const SearchParams& params,
                    ScoreTransport& transport, const HeadIndex& head, const Codebook& cb,
                    const SdcTable& sdc);

/// Merge already-sorted lists into one sorted list of at most `limit`
/// entries; duplicate ids keep their smallest distance. Inputs are checked
/// and unsorted input is an error.
std::vector<ScoredId> merge_partial(const std::vector<std::vector<ScoredId>>& lists,
                                    size_t limit);

/// Node layout byte accounting (all fields in bytes). r, d_opq and
/// sizeof_score may be zero to express degenerate layouts; the vector and
/// id widths keep both denominators positive.
struct LayoutParams {
  uint32_t r = 0;            // serving graph degree
  uint32_t d = 0;            // full-precision vector bytes
  uint32_t d_opq = 0;        // compressed code bytes
  uint32_t sizeof_id = 8;
  uint32_t sizeof_score = 4;

  void validate() const {
    if (d == 0 || sizeof_id == 0)
      raise(ErrorCode::invalid_argument, "layout needs positive d and sizeof_id");
  }
};

/// Stored bytes per node with duplicated neighbor codes, relative to a plain
/// id-list node layout with baseline_sizeof_id-byte ids:
///   ((1+R)*sizeof_id + d + R*d_opq) / (R*baseline_sizeof_id + d)
double space_amplification(const LayoutParams& p, uint32_t baseline_sizeof_id);

/// Wire bytes per node read (scores out, query in) relative to shipping the
/// whole node:
///   ((1+R)*(sizeof_id+sizeof_score) + d + d_opq) / ((1+R)*sizeof_id + d + R*d_opq)
/// Values below 1 mean the scored response is smaller than the raw node.
double bandwidth_saving(const LayoutParams& p);

/// Bounded best-first set keyed by (dist, id) with id dedup: the result and
/// candidate heaps of the orchestration loop.
class BoundedScoredSet {
 public:
  explicit BoundedScoredSet(size_t cap) : cap_(cap) {}

  /// Keeps the cap_ smallest; duplicate ids keep the smaller distance.
  void insert(ScoredId s) {
    auto it = ids_.find(s.id);
    if (it != ids_.end()) {
      if (it->second <= s.dist) return;
      set_.erase(ScoredId{s.id, it->second});
      ids_.erase(it);
    }
    if (set_.size() >= cap_) {
      auto worst = std::prev(set_.end());
      if (!scored_less(s, *worst)) return;
      ids_.erase(worst->id);
      set_.erase(worst);
    }
    ids_.emplace(s.id, s.dist);
    set_.insert(s);
  }

  bool full() const { return set_.size() >= cap_; }
  size_t size() const { return set_.size(); }
  bool empty() const { return set_.empty(); }
  float worst_dist() const { return std::prev(set_.end())->dist; }

  std::vector<ScoredId> pop_best(size_t n) {
    std::vector<ScoredId> out;
    while (out.size() < n && !set_.empty()) {
      auto it = set_.begin();
      out.push_back(*it);
      ids_.erase(it->id);
      set_.erase(it);
    }
    return out;
  }

  std::vector<ScoredId> sorted() const { return {set_.begin(), set_.end()}; }

 private:
  size_t cap_;
  std::set<ScoredId, ScoredLess> set_;
  std::unordered_map<uint64_t, float> ids_;
};

}  // namespace dann

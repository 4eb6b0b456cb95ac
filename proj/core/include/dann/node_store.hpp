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

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"
#include "dann/quantizer.hpp"
#include "dann/stitch.hpp"

namespace dann {

/// The unit stored per key: a node's full-precision vector plus its
/// neighbors' ids with their compressed codes duplicated inline, so one key
/// read yields everything a beam-search step needs.
struct PackedNode {
  uint64_t id = 0;
  std::vector<float> vector;           // dim
  std::vector<uint64_t> neighbor_ids;  // n
  std::vector<uint8_t> neighbor_codes;  // n * m, flat

  size_t neighbor_count() const { return neighbor_ids.size(); }
  std::span<const uint8_t> neighbor_code(size_t i, uint32_t m) const {
    return std::span<const uint8_t>(neighbor_codes.data() + i * m, m);
  }
};

/// Packed layout (little-endian):
///   id u64, vector dim x f32, neighbor_count u16,
///   then per neighbor: id u64 + code m bytes.
/// Size = 8 + 4*dim + 2 + n*(8 + m).
std::vector<uint8_t> pack_node(const PackedNode& node, uint32_t m);
PackedNode unpack_node(std::span<const uint8_t> bytes, uint32_t dim, uint32_t m);

inline constexpr size_t packed_node_size(uint32_t dim, uint32_t m, size_t neighbors) {
  return 8 + 4ull * dim + 2 + neighbors * (8ull + m);
}

/// Stable shard placement: splitmix64 avalanche of the id, mod num_shards.
/// Identical across runs and machines.
inline uint32_t shard_of(uint64_t id, uint32_t num_shards) {
  if (num_shards == 0) raise(ErrorCode::invalid_argument, "num_shards must be >= 1");
  return static_cast<uint32_t>(mix64(id) % num_shards);
}

/// Output of one node-scoring call: full-precision results for the read
/// keys, SDC-scored neighbor candidates, and the keys that were not found.
struct ScoreResult {
  std::vector<ScoredId> r;        // one per found key, ascending (dist, id)
  std::vector<ScoredId> c;        // candidates below threshold, ascending, <= l
  std::vector<uint64_t> missing;  // requested keys with no node, ascending
};

/// One node-store shard plus its near-data scoring service. Immutable after
/// load; score_nodes is read-only and safe to call concurrently.
class Shard {
 public:
  Shard(uint32_t shard_id, uint32_t num_shards, uint32_t dim, uint32_t m, uint32_t r_serve,
        std::shared_ptr<const SdcTable> sdc)
      : shard_id_(shard_id), num_shards_(num_shards), dim_(dim), m_(m), r_serve_(r_serve),
        sdc_(std::move(sdc)) {}

  void add_node(PackedNode node);

  /// Algorithm: batch-read the keys, full-score each found node against q,
  /// SDC-score every stored neighbor candidate against q_sdc keeping those
  /// strictly below t, sort both lists, truncate candidates to l.
  /// Missing keys are reported, not errors; a key for a different shard is.
  ScoreResult score_nodes(std::span<const uint64_t> keys, float t, uint32_t l,
                          std::span<const float> q, std::span<const uint8_t> q_sdc) const;

  const PackedNode* find(uint64_t id) const;

  uint32_t shard_id() const { return shard_id_; }
  uint32_t num_shards() const { return num_shards_; }
  uint32_t dim() const { return dim_; }
  uint32_t m() const { return m_; }
  uint32_t r_serve() const { return r_serve_; }
  size_t node_count() const { return nodes_.size(); }
  const SdcTable& sdc() const { return *sdc_; }
  std::shared_ptr<const SdcTable> sdc_ptr() const { return sdc_; }

  /// Keys read by score_nodes so far (found keys only).
  uint64_t io_counter() const { return io_nodes_.load(std::memory_order_relaxed); }
  /// Packed bytes of the nodes those reads touched.
  uint64_t bytes_counter() const { return io_bytes_.load(std::memory_order_relaxed); }

  /// Node ids in insertion order (load order); used by serialization.
  const std::vector<uint64_t>& node_ids() const { return order_; }

 private:
  uint32_t shard_id_, num_shards_, dim_, m_, r_serve_;
  std::shared_ptr<const SdcTable> sdc_;
  std::unordered_map<uint64_t, size_t> index_;
  std::vector<PackedNode> nodes_;
  std::vector<uint64_t> order_;
  mutable std::atomic<uint64_t> io_nodes_{0};
  mutable std::atomic<uint64_t> io_bytes_{0};
};

/// Transport behaviour knobs: latency model, injected failure rate, replica
/// count and the optional hedge delay. Injection lives in the transport
/// wrapper, never in scoring logic, so in-process tests can bypass it.
struct TransportConfig {
  double fixed_ms = 0.0;
  double jitter_ms = 0.0;
  double failure_rate = 0.0;  // probability a scoring call fails outright
  uint32_t replicas = 1;
  std::optional<double> hedge_delay_ms;
  double timeout_ms = 10000.0;
  uint64_t seed = 1;

  void validate() const {
    if (failure_rate < 0.0 || failure_rate > 1.0)
      raise(ErrorCode::invalid_argument, "failure_rate must be in [0,1]");
    if (replicas < 1) raise(ErrorCode::invalid_argument, "replicas must be >= 1");
    if (fixed_ms < 0.0 || jitter_ms < 0.0)
      raise(ErrorCode::invalid_argument, "latency must be non-negative");
  }
};

/// The full collection of shards plus transport configuration.
struct ShardSet {
  std::vector<std::shared_ptr<Shard>> shards;
  std::shared_ptr<const SdcTable> sdc;
  uint32_t dim = 0;
  uint32_t m = 0;
  uint32_t r_serve = 0;
  TransportConfig transport;

  uint32_t num_shards() const { return static_cast<uint32_t>(shards.size()); }
  size_t total_nodes() const;
};

/// Packs every stitched node (vector, neighbor ids, duplicated neighbor
/// codes) into the shard selected by shard_of over its 64-bit id.
ShardSet load_shards(const StitchedGraph& sg, const VectorDataset& ds, const Codebook& cb,
                     const CodeSet& codes, uint32_t num_shards);

// Shard file, little-endian:
//   magic "DANNNOD1", shard_id u32, num_shards u32, dim u32, M u32,
//   R_serve u32, count u64, then count packed node records each prefixed
//   by a u32 byte length.
void write_shard(const std::string& path, const Shard& shard);
std::shared_ptr<Shard> read_shard(const std::string& path, std::shared_ptr<const SdcTable> sdc);

}  // namespace dann

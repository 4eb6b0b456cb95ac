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

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"
#include "dann/distance.hpp"
#include "dann/node_store.hpp"
#include "dann/orchestrator.hpp"
#include "dann/quantizer.hpp"
#include "dann/stitch.hpp"
#include "dann/transport.hpp"
#include "dann/vamana.hpp"

namespace dann {

// ---- dataset generation ----

enum class Distribution { gaussian, clustered, uniform };

Distribution parse_distribution(const std::string& name);

struct GenParams {
  uint64_t n = 1000;
  uint32_t dim = 16;
  uint64_t seed = 0;
  Distribution dist = Distribution::gaussian;
  // clustered: blob centers drawn from N(0, spread^2) under blob_seed (so a
  // query set can share centers with its corpus), kept at least 3 blob
  // radii apart; points from center + N(0, sigma^2).
  uint32_t blobs = 10;
  std::optional<uint64_t> blob_seed;  // defaults to seed
  float blob_sigma = 1.0f;
  float blob_spread = 3.0f;
};

VectorDataset gen_dataset(const GenParams& params);
VectorDataset gen_dataset(uint64_t n, uint32_t dim, uint64_t seed,
                          const std::string& distribution);

// ---- ground truth and recall ----

struct GroundTruth {
  uint32_t k = 0;
  std::vector<ScoredId> entries;  // nq * k

  size_t queries() const { return k == 0 ? 0 : entries.size() / k; }
  std::span<const ScoredId> per_query(size_t i) const {
    return std::span<const ScoredId>(entries.data() + i * k, k);
  }
};

GroundTruth compute_ground_truth(const VectorDataset& ds, const VectorDataset& queries,
                                 uint32_t k, uint32_t threads = 1);

// Ground-truth file, little-endian: magic "DANNGT01", k u32, count u64,
// then per query k x (id u64, dist f32).
void write_ground_truth(const std::string& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::string& path);

/// |top-k result ids  ∩  top-k true ids| / k for one query. Fewer than k
/// results count the empty slots as misses.
double recall_at_k(std::span<const ScoredId> results, std::span<const ScoredId> truth,
                   uint32_t k);

// ---- experiment specs and reports ----

/// Parsed from a line-oriented key=value file ('#' starts a comment).
struct ExperimentSpec {
  // dataset
  uint64_t n = 100000;
  uint32_t dim = 64;
  uint64_t seed = 42;
  Distribution dist = Distribution::clustered;
  uint32_t blobs = 10;
  float blob_sigma = 1.0f;
  float blob_spread = 3.0f;
  uint64_t queries = 1000;
  uint32_t gt_k = 10;

  // build
  uint32_t p = 8;
  float epsilon = 0.1f;
  uint32_t max_assign = 8;
  uint32_t cluster_iters = 15;
  uint32_t r = 32;
  uint32_t l_build = 64;
  float alpha = 1.2f;
  uint32_t r_serve = 24;
  double head_frac = 0.05;
  uint32_t m = 16;
  uint32_t pq_iters = 15;
  uint64_t pq_sample = 20000;
  bool opq = false;
  uint32_t num_shards = 4;

  // search grid
  uint32_t k = 10;
  uint32_t l = 64;
  uint32_t k_head = 32;
  std::vector<uint32_t> h_grid = {4, 5, 6, 7, 8};
  std::vector<uint32_t> bw_grid = {32};
  std::vector<double> failure_grid = {0.0};

  // partitioned baseline grid (compare mode)
  std::vector<uint32_t> baseline_n_grid = {4, 6, 8};
  std::vector<uint32_t> baseline_m_grid = {32};

  // transport
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  uint32_t replicas = 1;
  std::optional<double> hedge_ms;
  double timeout_ms = 10000.0;
  uint64_t transport_seed = 1;

  uint32_t threads = 2;
  std::string out;  // report path; empty = stdout only

  static ExperimentSpec parse(std::istream& in);
  static ExperimentSpec parse_file(const std::string& path);
  void validate() const;
};

struct RunReport {
  std::vector<std::string> lines;

  void add(std::string line) { lines.push_back(std::move(line)); }
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
};

/// Everything the pipeline builds before the sweep stage. Reused across
/// grid points (and by the acceptance suite) so the index is built once.
struct BuiltIndex {
  ExperimentSpec spec;
  VectorDataset corpus;
  VectorDataset queries;
  GroundTruth gt;
  PartitionAssignment pa;
  PartitionGraphs parts;
  std::vector<VectorDataset> part_data;  // per-partition vectors (baseline search)
  StitchedGraph stitched;
  std::vector<uint32_t> head_positions;
  HeadIndex head;
  Codebook cb;
  CodeSet codes;
  ShardSet shards;
  std::unordered_map<uint64_t, uint32_t> id_to_pos;
};

/// gen -> gt -> cluster -> build -> stitch -> head -> encode -> load.
/// Any stage failure is rethrown with the stage name attached.
BuiltIndex build_pipeline(const ExperimentSpec& spec);

/// One distributed grid point, averaged over the spec's query set.
struct SweepPoint {
  uint32_t h = 0, bw = 0;
  double failure = 0.0;
  double mean_recall = 0.0;
  double mean_io = 0.0;
  uint32_t max_io = 0;
  uint32_t io_bound = 0;  // h * bw
  double p50_ms = 0.0, p99_ms = 0.0;
  double mean_request_bytes = 0.0, mean_response_bytes = 0.0;
  double mean_clusters_touched = 0.0, var_clusters_touched = 0.0;
  uint64_t queries = 0;
  uint64_t failed_queries = 0;  // queries that raised total fan-out failure

  std::string to_line() const;
};

SweepPoint sweep_distributed(const BuiltIndex& built, uint32_t h, uint32_t bw, double failure);

/// Clustered-partitioning baseline: top n_sel partitions by query-centroid
/// distance, an io budget of m_io expansions in each, merged.
struct BaselinePoint {
  uint32_t n_sel = 0, m_io = 0;
  uint32_t io = 0;  // n_sel * m_io
  double mean_recall = 0.0;
  uint64_t queries = 0;

  std::string to_line() const;
};

BaselinePoint sweep_partitioned(const BuiltIndex& built, uint32_t n_sel, uint32_t m_io);

/// Baseline search for a single query (exposed for tests).
std::vector<ScoredId> partitioned_search(const BuiltIndex& built, std::span<const float> q,
                                         uint32_t n_sel, uint32_t m_io, uint32_t k, uint32_t l);

/// Full experiment: build once, then the (H x BW x failure) grid.
RunReport run_pipeline(const ExperimentSpec& spec);

/// Build once, run both the distributed grid and the partitioned baseline
/// grid, and emit match lines at equal IO budgets.
RunReport compare_partitioned(const ExperimentSpec& spec);

// Head index file, little-endian: magic "DANNHED1", dim u32, count u64,
// ids u64 x count, data f32 x count x dim, entry u32, max_degree u32,
// then per node u32 degree + u32 x degree. Codes are re-derived from the
// codebook at load time.
void write_head_index(const std::string& path, const HeadIndex& head);
HeadIndex read_head_index(const std::string& path, const Codebook& cb);

// Code file, little-endian: magic "DANNCOD1", count u64, M u32,
// then count x M bytes in corpus order.
void write_codes(const std::string& path, const CodeSet& codes);
CodeSet read_codes(const std::string& path);

}  // namespace dann

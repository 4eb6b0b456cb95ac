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

#include "dann/stitch.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <future>
#include <unordered_map>

#include "dann/distance.hpp"
#include "dann/kmeans.hpp"
#include "io_util.hpp"

namespace dann {

namespace {
constexpr char kAssignMagic[8] = {'D', 'A', 'N', 'N', 'A', 'S', 'G', '1'};
}

PartitionAssignment cluster_assign(const VectorDataset& ds, const ClusterParams& params) {
  if (params.p < 1) raise(ErrorCode::invalid_argument, "cluster_assign requires P >= 1");
  if (params.p > ds.count())
    raise(ErrorCode::invalid_argument, "cluster_assign requires P <= corpus size");
  if (params.epsilon < 0.0f) raise(ErrorCode::invalid_argument, "epsilon must be >= 0");
  if (params.max_assign < 1) raise(ErrorCode::invalid_argument, "max_assign must be >= 1");

  auto km = kmeans(ds.data, ds.count(), ds.dim, params.p, params.iters, params.seed,
                   params.threads);

  PartitionAssignment pa;
  pa.p = params.p;
  pa.dim = ds.dim;
  pa.max_assign = params.max_assign;
  pa.centroids = std::move(km.centroids);
  pa.membership.resize(ds.count());

  // Squared-distance closure rule: qualify iff d <= (1+eps)^2 * d_nearest.
  double factor = (1.0 + static_cast<double>(params.epsilon)) *
                  (1.0 + static_cast<double>(params.epsilon));
  std::vector<ScoredId> dists(params.p);
  for (size_t i = 0; i < ds.count(); ++i) {
    for (uint32_t c = 0; c < params.p; ++c)
      dists[c] = ScoredId{c, l2_sq(ds.vec(i), pa.centroid(c))};
    std::sort(dists.begin(), dists.end(), ScoredLess{});
    double cutoff = factor * static_cast<double>(dists[0].dist);
    auto& member = pa.membership[i];
    member.push_back(static_cast<uint32_t>(dists[0].id));
    for (uint32_t c = 1; c < params.p && member.size() < params.max_assign; ++c) {
      if (static_cast<double>(dists[c].dist) <= cutoff)
        member.push_back(static_cast<uint32_t>(dists[c].id));
      else
        break;
    }
  }
  return pa;
}

std::vector<std::vector<uint32_t>> partition_members(const PartitionAssignment& pa) {
  std::vector<std::vector<uint32_t>> members(pa.p);
  for (size_t i = 0; i < pa.membership.size(); ++i)
    for (uint32_t c : pa.membership[i]) members[c].push_back(static_cast<uint32_t>(i));
  return members;  // ascending by construction
}

PartitionGraphs build_partitions(const VectorDataset& ds, const PartitionAssignment& pa,
                                 const VamanaParams& params, uint32_t threads) {
  PartitionGraphs out;
  out.members = partition_members(pa);
  out.graphs.resize(pa.p);

  auto build_one = [&](uint32_t part) {
    const auto& member = out.members[part];
    if (member.empty()) return;  // warning recorded below
    VectorDataset sub;
    sub.dim = ds.dim;
    sub.ids.reserve(member.size());
    sub.data.reserve(member.size() * ds.dim);
    for (uint32_t pos : member) {
      sub.ids.push_back(pos);
      auto v = ds.vec(pos);
      sub.data.insert(sub.data.end(), v.begin(), v.end());
    }
    VamanaParams p = params;
    p.seed = params.seed + part;
    out.graphs[part] = build_vamana(sub, p);
  };

  if (threads > 1) {
    std::vector<std::future<void>> futs;
    for (uint32_t c = 0; c < pa.p; ++c)
      futs.push_back(std::async(std::launch::async, build_one, c));
    for (auto& f : futs) f.get();
  } else {
    for (uint32_t c = 0; c < pa.p; ++c) build_one(c);
  }

  for (uint32_t c = 0; c < pa.p; ++c)
    if (out.members[c].empty())
      out.warnings.push_back("partition " + std::to_string(c) + " is empty; build skipped");
  return out;
}

StitchedGraph stitch(const PartitionGraphs& parts, const PartitionAssignment& pa,
                     const VectorDataset& ds, uint32_t r_serve) {
  if (parts.members.size() != pa.p || parts.graphs.size() != pa.p)
    raise(ErrorCode::invalid_argument, "partition graphs do not match the assignment");
  if (r_serve == 0) raise(ErrorCode::invalid_argument, "r_serve must be positive");
  size_t n = ds.count();

  // corpus position -> local index, per partition
  std::vector<std::unordered_map<uint32_t, uint32_t>> local(pa.p);
  for (uint32_t c = 0; c < pa.p; ++c) {
    local[c].reserve(parts.members[c].size());
    for (uint32_t i = 0; i < parts.members[c].size(); ++i) local[c][parts.members[c][i]] = i;
  }

  StitchedGraph out;
  out.r_serve = r_serve;
  out.graph.max_degree = r_serve;
  out.graph.adj.resize(n);
  out.provenance.resize(n);

  for (uint32_t pos = 0; pos < n; ++pos) {
    const auto& member = pa.membership[pos];
    out.provenance[pos] = static_cast<uint32_t>(member.size());
    if (member.size() == 1) {
      // Single home: keep the original list (truncated if over r_serve).
      uint32_t part = member[0];
      const Graph& g = parts.graphs[part];
      auto it = local[part].find(pos);
      if (it == local[part].end())
        raise(ErrorCode::invalid_argument, "assignment and members out of sync");
      auto& dst = out.graph.adj[pos];
      for (uint32_t nb_local : g.adj[it->second]) {
        if (dst.size() >= r_serve) break;
        dst.push_back(parts.members[part][nb_local]);
      }
      continue;
    }
    std::vector<uint32_t> pool;
    for (uint32_t part : member) {
      auto it = local[part].find(pos);
      if (it == local[part].end())
        raise(ErrorCode::invalid_argument, "assignment and members out of sync");
      for (uint32_t nb_local : parts.graphs[part].adj[it->second])
        pool.push_back(parts.members[part][nb_local]);
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<ScoredId> scored;
    scored.reserve(pool.size());
    for (uint32_t nb : pool) scored.push_back(ScoredId{nb, l2_sq(ds.vec(pos), ds.vec(nb))});
    std::sort(scored.begin(), scored.end(), ScoredLess{});
    if (scored.size() > r_serve) scored.resize(r_serve);
    auto& dst = out.graph.adj[pos];
    for (const auto& s : scored) dst.push_back(static_cast<uint32_t>(s.id));
  }

  // Entry point: the first built partition's entry, in corpus positions.
  out.graph.entry = 0;
  for (uint32_t c = 0; c < pa.p; ++c) {
    if (!parts.members[c].empty()) {
      out.graph.entry = parts.members[c][parts.graphs[c].entry];
      break;
    }
  }
  return out;
}

std::vector<uint32_t> collect_head(const PartitionGraphs& parts, size_t c) {
  if (c < 1) raise(ErrorCode::invalid_argument, "collect_head requires C >= 1");
  std::vector<uint32_t> collected;
  std::unordered_map<uint32_t, bool> seen;

  size_t p = parts.graphs.size();
  // Per-partition BFS state: visited flags over local indices and the
  // current frontier (a level's worth of nodes).
  std::vector<std::vector<bool>> visited(p);
  std::vector<std::vector<uint32_t>> frontier(p);
  for (size_t part = 0; part < p; ++part) {
    if (parts.members[part].empty()) continue;
    visited[part].assign(parts.graphs[part].size(), false);
    uint32_t e = parts.graphs[part].entry;
    visited[part][e] = true;
    frontier[part].push_back(e);
  }

  auto emit = [&](uint32_t corpus_pos) {
    if (!seen.emplace(corpus_pos, true).second) return;
    collected.push_back(corpus_pos);
  };

  bool any = true;
  while (any && collected.size() < c) {
    any = false;
    for (size_t part = 0; part < p; ++part) {
      if (frontier[part].empty()) continue;
      any = true;
      // Emit this level, then advance one BFS level for this partition.
      for (uint32_t v : frontier[part]) emit(parts.members[part][v]);
      std::vector<uint32_t> next;
      for (uint32_t v : frontier[part]) {
        for (uint32_t nb : parts.graphs[part].adj[v]) {
          if (!visited[part][nb]) {
            visited[part][nb] = true;
            next.push_back(nb);
          }
        }
      }
      frontier[part] = std::move(next);
      if (collected.size() >= c) break;
    }
  }
  if (collected.size() > c) collected.resize(c);
  return collected;
}

size_t reinforce_reachability(StitchedGraph& sg, const VectorDataset& ds,
                              std::span<const uint32_t> head_positions) {
  size_t n = sg.graph.size();
  if (n != ds.count()) raise(ErrorCode::invalid_argument, "graph does not cover the corpus");
  size_t edits = 0;
  while (true) {
    auto reached = reach_from(sg.graph, head_positions);
    std::vector<uint32_t> missing;
    for (uint32_t i = 0; i < n; ++i)
      if (!reached[i]) missing.push_back(i);
    if (missing.empty()) return edits;

    for (uint32_t u : missing) {
      uint32_t best = head_positions.empty() ? 0 : head_positions[0];
      float best_d = std::numeric_limits<float>::max();
      for (uint32_t v = 0; v < n; ++v) {
        if (!reached[v] || v == u) continue;
        float d = l2_sq(ds.vec(u), ds.vec(v));
        if (d < best_d) {
          best_d = d;
          best = v;
        }
      }
      auto& list = sg.graph.adj[best];
      if (std::find(list.begin(), list.end(), u) == list.end()) {
        if (list.size() >= sg.r_serve) {
          // drop the farthest current edge (ties to the larger id)
          size_t worst = 0;
          float worst_d = -1.0f;
          for (size_t i = 0; i < list.size(); ++i) {
            float d = l2_sq(ds.vec(best), ds.vec(list[i]));
            if (d > worst_d || (d == worst_d && list[i] > list[worst])) {
              worst_d = d;
              worst = i;
            }
          }
          list.erase(list.begin() + static_cast<ptrdiff_t>(worst));
        }
        list.push_back(u);
        ++edits;
      }
      reached[u] = true;  // u's own subtree is picked up next round
    }
  }
}

void write_manifest(const std::string& path, const PartitionAssignment& pa,
                    std::span<const size_t> member_counts) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::io_error, "cannot open for write: " + path);
  for (uint32_t c = 0; c < pa.p; ++c) {
    size_t count = c < member_counts.size() ? member_counts[c] : 0;
    out << "partition=" << c << " centroid_offset=" << centroid_file_offset(pa, c)
        << " members=" << count << "\n";
  }
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

uint64_t centroid_file_offset(const PartitionAssignment& pa, uint32_t c) {
  // Vector file header: magic 8 + dim 4 + count 8 + dtype 1 + reserved 7,
  // then P ids of 8 bytes, then the f32 rows.
  uint64_t header = 8 + 4 + 8 + 1 + 7;
  uint64_t ids = static_cast<uint64_t>(pa.p) * 8;
  return header + ids + static_cast<uint64_t>(c) * pa.dim * 4;
}

void write_assignment(const std::string& path, const PartitionAssignment& pa) {
  auto out = io::open_out(path);
  io::put_magic(out, kAssignMagic);
  io::put_u64(out, pa.membership.size());
  io::put_u32(out, pa.p);
  io::put_u32(out, pa.dim);
  io::put_u32(out, pa.max_assign);
  io::put_f32_array(out, pa.centroids);
  for (const auto& member : pa.membership) {
    io::put_u16(out, static_cast<uint16_t>(member.size()));
    for (uint32_t c : member) io::put_u32(out, c);
  }
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

PartitionAssignment read_assignment(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kAssignMagic, "assignment");
  PartitionAssignment pa;
  uint64_t count = io::get_u64(in);
  pa.p = io::get_u32(in);
  pa.dim = io::get_u32(in);
  pa.max_assign = io::get_u32(in);
  if (pa.p == 0 || pa.dim == 0) raise(ErrorCode::bad_format, "assignment header inconsistent");
  pa.centroids.resize(static_cast<size_t>(pa.p) * pa.dim);
  io::get_f32_array(in, pa.centroids);
  pa.membership.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint16_t m = io::get_u16(in);
    if (m == 0 || m > pa.max_assign) raise(ErrorCode::bad_format, "bad membership count");
    pa.membership[i].resize(m);
    for (uint16_t j = 0; j < m; ++j) {
      pa.membership[i][j] = io::get_u32(in);
      if (pa.membership[i][j] >= pa.p) raise(ErrorCode::bad_format, "partition id out of range");
    }
  }
  return pa;
}

}  // namespace dann

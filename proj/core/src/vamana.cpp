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

#include "dann/vamana.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "dann/distance.hpp"
#include "io_util.hpp"

namespace dann {

namespace {

constexpr char kGraphMagic[8] = {'D', 'A', 'N', 'N', 'G', 'R', 'A', '1'};

// Fixed-capacity sorted candidate list; the classic beam-search structure.
// Entries are unique by id (callers filter through a seen-set) and ordered
// by (dist, id) ascending.
class BeamList {
 public:
  explicit BeamList(size_t cap) : cap_(cap) {}

  void insert(float dist, uint32_t id) {
    Entry e{dist, id, false};
    auto it = std::lower_bound(v_.begin(), v_.end(), e, less);
    if (it == v_.end() && v_.size() >= cap_) return;
    v_.insert(it, e);
    if (v_.size() > cap_) v_.pop_back();
  }

  // Index of the best unexpanded entry, or npos when the whole list is done.
  static constexpr size_t npos = static_cast<size_t>(-1);
  size_t first_unexpanded() const {
    for (size_t i = 0; i < v_.size(); ++i)
      if (!v_[i].expanded) return i;
    return npos;
  }

  ScoredId expand(size_t i) {
    v_[i].expanded = true;
    return ScoredId{v_[i].id, v_[i].dist};
  }

 private:
  struct Entry {
    float dist;
    uint32_t id;
    bool expanded;
  };
  static bool less(const Entry& a, const Entry& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.id < b.id;
  }

  size_t cap_;
  std::vector<Entry> v_;
};

// Core beam search parameterized over the neighbor accessor so the build can
// run it against a graph that other threads are mutating (the accessor
// copies under a per-node lock in that mode).
template <typename FetchNeighbors>
void search_core(const VectorDataset& ds, std::span<const float> q, uint32_t entry, uint32_t l,
                 uint32_t io_limit, FetchNeighbors&& fetch, std::vector<uint32_t>& visited,
                 std::vector<ScoredId>& expanded) {
  BeamList beam(l);
  std::unordered_set<uint32_t> seen;
  seen.reserve(2 * static_cast<size_t>(l));
  seen.insert(entry);
  beam.insert(l2_sq(q, ds.vec(entry)), entry);

  uint32_t spent = 0;
  while (spent < io_limit) {
    size_t idx = beam.first_unexpanded();
    if (idx == BeamList::npos) break;
    ScoredId cur = beam.expand(idx);
    visited.push_back(static_cast<uint32_t>(cur.id));
    expanded.push_back(cur);
    ++spent;
    for (uint32_t nb : fetch(static_cast<uint32_t>(cur.id))) {
      if (seen.insert(nb).second) beam.insert(l2_sq(q, ds.vec(nb)), nb);
    }
  }
}

// Alpha rule with an optional pre-seeded kept list (used by the connectivity
// pass, which forces one edge in before pruning the rest).
std::vector<uint32_t> prune_candidates(uint32_t p, std::vector<ScoredId>& candidates,
                                       float alpha, uint32_t r, const VectorDataset& ds,
                                       std::vector<uint32_t> kept) {
  std::sort(candidates.begin(), candidates.end(), ScoredLess{});
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const ScoredId& a, const ScoredId& b) { return a.id == b.id; }),
                   candidates.end());
  for (const ScoredId& c : candidates) {
    if (kept.size() >= r) break;
    uint32_t cid = static_cast<uint32_t>(c.id);
    if (cid == p) continue;
    if (std::find(kept.begin(), kept.end(), cid) != kept.end()) continue;
    bool keep = true;
    for (uint32_t n : kept) {
      if (alpha * l2_sq(ds.vec(n), ds.vec(cid)) <= c.dist) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(cid);
  }
  return kept;
}

struct BuildState {
  const VectorDataset& ds;
  Graph& g;
  float alpha;
  uint32_t r;
  uint32_t l_build;
  std::unique_ptr<std::mutex[]> locks;  // null in single-threaded mode

  std::vector<uint32_t> fetch_copy(uint32_t node) const {
    if (!locks) return g.adj[node];
    std::lock_guard<std::mutex> guard(locks[node]);
    return g.adj[node];
  }
};

void insert_point(BuildState& st, uint32_t p) {
  const auto& ds = st.ds;
  std::vector<uint32_t> visited;
  std::vector<ScoredId> candidates;
  if (st.locks) {
    search_core(ds, ds.vec(p), st.g.entry, st.l_build, kNoIoLimit,
                [&](uint32_t x) { return st.fetch_copy(x); }, visited, candidates);
  } else {
    search_core(ds, ds.vec(p), st.g.entry, st.l_build, kNoIoLimit,
                [&](uint32_t x) -> const std::vector<uint32_t>& { return st.g.adj[x]; }, visited,
                candidates);
  }

  // Existing neighbors stay in the pool so the second pass re-prunes rather
  // than forgetting pass-one work.
  for (uint32_t nb : st.fetch_copy(p))
    candidates.push_back(ScoredId{nb, l2_sq(ds.vec(p), ds.vec(nb))});

  auto pruned = prune_candidates(p, candidates, st.alpha, st.r, ds, {});
  if (st.locks) {
    std::lock_guard<std::mutex> guard(st.locks[p]);
    st.g.adj[p] = pruned;
  } else {
    st.g.adj[p] = pruned;
  }

  // Back-edges; a node that would overflow R is re-pruned immediately.
  for (uint32_t nb : pruned) {
    bool prune_nb = false;
    std::vector<uint32_t> snapshot;
    {
      std::unique_lock<std::mutex> guard;
      if (st.locks) guard = std::unique_lock<std::mutex>(st.locks[nb]);
      auto& list = st.g.adj[nb];
      if (std::find(list.begin(), list.end(), p) != list.end()) continue;
      if (list.size() < st.r) {
        list.push_back(p);
      } else {
        snapshot = list;
        prune_nb = true;
      }
    }
    if (prune_nb) {
      std::vector<ScoredId> pool;
      pool.reserve(snapshot.size() + 1);
      for (uint32_t x : snapshot) pool.push_back(ScoredId{x, l2_sq(ds.vec(nb), ds.vec(x))});
      pool.push_back(ScoredId{p, l2_sq(ds.vec(nb), ds.vec(p))});
      auto repruned = prune_candidates(nb, pool, st.alpha, st.r, ds, {});
      if (st.locks) {
        std::lock_guard<std::mutex> guard(st.locks[nb]);
        st.g.adj[nb] = repruned;
      } else {
        st.g.adj[nb] = repruned;
      }
    }
  }
}

// Attach every unreached node to its nearest reached node, forcing the edge
// in ahead of the alpha rule, until BFS from the entry covers the graph.
void repair_connectivity(const VectorDataset& ds, Graph& g, float alpha) {
  size_t n = g.size();
  while (true) {
    std::vector<uint32_t> entry_only{g.entry};
    auto reached = reach_from(g, entry_only);
    std::vector<uint32_t> missing;
    for (uint32_t i = 0; i < n; ++i)
      if (!reached[i]) missing.push_back(i);
    if (missing.empty()) return;

    for (uint32_t u : missing) {
      uint32_t best = g.entry;
      float best_d = std::numeric_limits<float>::max();
      for (uint32_t v = 0; v < n; ++v) {
        if (!reached[v]) continue;
        float d = l2_sq(ds.vec(u), ds.vec(v));
        if (d < best_d) {
          best_d = d;
          best = v;
        }
      }
      auto& list = g.adj[best];
      if (std::find(list.begin(), list.end(), u) == list.end()) {
        if (list.size() < g.max_degree) {
          list.push_back(u);
        } else {
          std::vector<ScoredId> pool;
          for (uint32_t x : list) pool.push_back(ScoredId{x, l2_sq(ds.vec(best), ds.vec(x))});
          g.adj[best] = prune_candidates(best, pool, alpha, g.max_degree, ds, {u});
        }
      }
      reached[u] = true;  // u itself is now reachable; its subtree lands next round
    }
  }
}

}  // namespace

uint32_t medoid(const VectorDataset& ds) {
  if (ds.count() == 0) raise(ErrorCode::empty_dataset, "medoid of empty dataset");
  std::vector<double> center(ds.dim, 0.0);
  for (size_t i = 0; i < ds.count(); ++i) {
    auto v = ds.vec(i);
    for (uint32_t j = 0; j < ds.dim; ++j) center[j] += v[j];
  }
  std::vector<float> c(ds.dim);
  for (uint32_t j = 0; j < ds.dim; ++j)
    c[j] = static_cast<float>(center[j] / static_cast<double>(ds.count()));

  uint32_t best = 0;
  float best_d = std::numeric_limits<float>::max();
  for (size_t i = 0; i < ds.count(); ++i) {
    float d = l2_sq(c, ds.vec(i));
    if (d < best_d) {
      best_d = d;
      best = static_cast<uint32_t>(i);
    }
  }
  return best;
}

std::vector<uint32_t> robust_prune(uint32_t p, std::vector<ScoredId> candidates, float alpha,
                                   uint32_t r, const VectorDataset& ds) {
  return prune_candidates(p, candidates, alpha, r, ds, {});
}

SearchTrace greedy_search(const Graph& g, const VectorDataset& ds, std::span<const float> q,
                          uint32_t l, uint32_t k, uint32_t io_limit) {
  if (k > l) raise(ErrorCode::invalid_argument, "greedy_search requires k <= l");
  if (g.size() == 0) raise(ErrorCode::empty_dataset, "greedy_search on empty graph");
  if (g.size() != ds.count())
    raise(ErrorCode::invalid_argument, "graph and dataset sizes differ");

  SearchTrace trace;
  std::vector<ScoredId> expanded;
  search_core(ds, q, g.entry, l, io_limit,
              [&](uint32_t x) -> const std::vector<uint32_t>& { return g.adj[x]; },
              trace.visited, expanded);
  std::sort(expanded.begin(), expanded.end(), ScoredLess{});
  if (expanded.size() > k) expanded.resize(k);
  trace.results = std::move(expanded);
  return trace;
}

Graph build_vamana(const VectorDataset& ds, const VamanaParams& params) {
  if (ds.count() == 0) raise(ErrorCode::empty_dataset, "build_vamana on empty dataset");
  if (params.r < 2) raise(ErrorCode::invalid_argument, "build_vamana requires R >= 2");
  if (params.l_build < params.r)
    raise(ErrorCode::invalid_argument, "build_vamana requires L_build >= R");
  if (params.alpha < 1.0f) raise(ErrorCode::invalid_argument, "build_vamana requires alpha >= 1");

  Graph g;
  g.max_degree = params.r;
  g.adj.resize(ds.count());
  g.entry = medoid(ds);
  if (ds.count() == 1) return g;

  std::vector<uint32_t> order(ds.count());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
  Rng rng(params.seed);
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  BuildState st{ds, g, 1.0f, params.r, params.l_build, nullptr};
  if (params.threads > 1) st.locks = std::make_unique<std::mutex[]>(ds.count());

  for (int pass = 0; pass < 2; ++pass) {
    st.alpha = pass == 0 ? 1.0f : params.alpha;
    if (params.threads <= 1) {
      for (uint32_t p : order) insert_point(st, p);
    } else {
      std::atomic<size_t> next{0};
      auto worker = [&] {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= order.size()) return;
          insert_point(st, order[i]);
        }
      };
      std::vector<std::thread> pool;
      for (uint32_t t = 0; t < params.threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }

  repair_connectivity(ds, g, params.alpha);
  return g;
}

size_t reachable_count(const Graph& g, uint32_t from) {
  std::vector<uint32_t> src{from};
  auto flags = reach_from(g, src);
  return static_cast<size_t>(std::count(flags.begin(), flags.end(), true));
}

std::vector<bool> reach_from(const Graph& g, std::span<const uint32_t> sources) {
  std::vector<bool> seen(g.size(), false);
  std::deque<uint32_t> queue;
  for (uint32_t s : sources) {
    if (s < g.size() && !seen[s]) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    uint32_t cur = queue.front();
    queue.pop_front();
    for (uint32_t nb : g.adj[cur]) {
      if (!seen[nb]) {
        seen[nb] = true;
        queue.push_back(nb);
      }
    }
  }
  return seen;
}

void write_graph(const std::string& path, const Graph& g) {
  auto out = io::open_out(path);
  io::put_magic(out, kGraphMagic);
  io::put_u64(out, g.size());
  io::put_u32(out, g.entry);
  io::put_u32(out, g.max_degree);
  for (const auto& list : g.adj) {
    io::put_u32(out, static_cast<uint32_t>(list.size()));
    for (uint32_t nb : list) io::put_u32(out, nb);
  }
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

Graph read_graph(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kGraphMagic, "graph");
  Graph g;
  uint64_t n = io::get_u64(in);
  g.entry = io::get_u32(in);
  g.max_degree = io::get_u32(in);
  g.adj.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t deg = io::get_u32(in);
    g.adj[i].resize(deg);
    for (uint32_t j = 0; j < deg; ++j) {
      g.adj[i][j] = io::get_u32(in);
      if (g.adj[i][j] >= n) raise(ErrorCode::bad_format, "neighbor id out of range");
    }
  }
  return g;
}

}  // namespace dann

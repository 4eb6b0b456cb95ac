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

#include "dann/orchestrator.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <unordered_set>

#include "dann/distance.hpp"
#include "dann/node_store.hpp"

namespace dann {

HeadIndex build_head_index(const VectorDataset& corpus, std::span<const uint32_t> positions,
                           const VamanaParams& params) {
  if (positions.empty()) raise(ErrorCode::empty_head, "no head positions collected");
  HeadIndex head;
  head.vectors.dim = corpus.dim;
  head.vectors.ids.reserve(positions.size());
  head.vectors.data.reserve(positions.size() * corpus.dim);
  for (uint32_t pos : positions) {
    head.vectors.ids.push_back(corpus.ids[pos]);
    auto v = corpus.vec(pos);
    head.vectors.data.insert(head.vectors.data.end(), v.begin(), v.end());
  }
  head.graph = build_vamana(head.vectors, params);
  return head;
}

void encode_head(HeadIndex& head, const Codebook& cb) {
  head.codes = encode_dataset(head.vectors, cb);
}

std::vector<ScoredId> merge_partial(const std::vector<std::vector<ScoredId>>& lists,
                                    size_t limit) {
  std::vector<ScoredId> all;
  size_t total = 0;
  for (const auto& list : lists) total += list.size();
  all.reserve(total);
  for (const auto& list : lists) {
    if (!std::is_sorted(list.begin(), list.end(), ScoredLess{}))
      raise(ErrorCode::invalid_argument, "merge_partial input is not sorted");
    all.insert(all.end(), list.begin(), list.end());
  }
  std::sort(all.begin(), all.end(), ScoredLess{});
  // (dist, id) sort puts a duplicate id's smallest distance first.
  std::unordered_set<uint64_t> seen;
  std::vector<ScoredId> out;
  for (const auto& s : all) {
    if (out.size() >= limit) break;
    if (seen.insert(s.id).second) out.push_back(s);
  }
  return out;
}

double space_amplification(const LayoutParams& p, uint32_t baseline_sizeof_id) {
  p.validate();
  if (baseline_sizeof_id == 0)
    raise(ErrorCode::invalid_argument, "baseline id width must be positive");
  double num = static_cast<double>(1 + p.r) * p.sizeof_id + p.d +
               static_cast<double>(p.r) * p.d_opq;
  double den = static_cast<double>(p.r) * baseline_sizeof_id + p.d;
  return num / den;
}

double bandwidth_saving(const LayoutParams& p) {
  p.validate();
  double num = static_cast<double>(1 + p.r) * (p.sizeof_id + p.sizeof_score) + p.d + p.d_opq;
  double den = static_cast<double>(1 + p.r) * p.sizeof_id + p.d +
               static_cast<double>(p.r) * p.d_opq;
  return num / den;
}

SearchResult search(std::span<const float> q, const SearchParams& params,
                    ScoreTransport& transport, const HeadIndex& head, const Codebook& cb,
                    const SdcTable& sdc) {
  params.validate();
  if (head.vectors.count() == 0) raise(ErrorCode::empty_head, "head index is empty");
  if (q.size() != cb.dim) raise(ErrorCode::dim_mismatch, "query dim != index dim");
  uint32_t num_shards = transport.shard_count();
  if (num_shards == 0) raise(ErrorCode::invalid_argument, "no shards configured");

  SearchResult out;
  QueryStats& stats = out.stats;

  Code q_sdc = encode(q, cb);

  // Seed from the head index. Seeds enter the candidate heap SDC-scored so
  // heap distances stay comparable with the scoring threshold t.
  BoundedScoredSet h_r(params.k);
  BoundedScoredSet h_c(params.l);
  std::unordered_set<uint64_t> visited;
  {
    uint32_t k_head = std::min<uint32_t>(params.k_head,
                                         static_cast<uint32_t>(head.vectors.count()));
    auto seeds = greedy_search(head.graph, head.vectors, q, std::max(params.k_head, k_head),
                               k_head);
    for (const auto& s : seeds.results) {
      uint32_t pos = static_cast<uint32_t>(s.id);
      float d = sdc_distance(q_sdc, head.codes.code(pos), sdc);
      h_c.insert(ScoredId{head.vectors.ids[pos], d});
    }
  }

  uint32_t total_ok = 0;
  for (uint32_t hop = 0; hop < params.h; ++hop) {
    float t = h_c.full() ? h_c.worst_dist() : std::numeric_limits<float>::infinity();
    if (params.prune_with_result_bound && h_r.full())
      t = std::min(t, h_r.worst_dist());

    auto popped = h_c.pop_best(params.bw);
    if (popped.empty()) break;

    HopRecord rec;
    rec.keys_sent = static_cast<uint32_t>(popped.size());
    stats.io_used += rec.keys_sent;

    std::vector<std::vector<uint64_t>> by_shard(num_shards);
    for (const auto& s : popped) {
      visited.insert(s.id);
      rec.keys.push_back(s.id);
      by_shard[shard_of(s.id, num_shards)].push_back(s.id);
    }

    // One scoring call per touched shard; concurrent within the hop, joined
    // before the next (the algorithm's data dependency between hops).
    std::vector<std::pair<uint32_t, ShardCall>> calls;
    uint64_t rid_base = (static_cast<uint64_t>(hop) << 32);
    if (transport.sequential()) {
      for (uint32_t s = 0; s < num_shards; ++s) {
        if (by_shard[s].empty()) continue;
        wire::ScoreRequest req;
        req.request_id = rid_base | s;
        req.t = t;
        req.l = params.l;
        req.keys = by_shard[s];
        req.q.assign(q.begin(), q.end());
        req.q_sdc = q_sdc;
        calls.emplace_back(s, transport.score(s, req));
      }
    } else {
      std::vector<std::pair<uint32_t, std::future<ShardCall>>> futs;
      for (uint32_t s = 0; s < num_shards; ++s) {
        if (by_shard[s].empty()) continue;
        wire::ScoreRequest req;
        req.request_id = rid_base | s;
        req.t = t;
        req.l = params.l;
        req.keys = by_shard[s];
        req.q.assign(q.begin(), q.end());
        req.q_sdc = q_sdc;
        futs.emplace_back(s, std::async(std::launch::async,
                                        [&transport, s, req = std::move(req)] {
                                          return transport.score(s, req);
                                        }));
      }
      for (auto& [s, f] : futs) calls.emplace_back(s, f.get());
    }

    double hop_latency = 0.0;
    std::vector<std::vector<ScoredId>> r_lists, c_lists;
    for (auto& [s, call] : calls) {
      ++rec.shards_touched;
      stats.request_bytes += call.request_bytes;
      stats.response_bytes += call.response_bytes;
      hop_latency = std::max(hop_latency, call.latency_ms);
      if (!call.ok || call.response.status == wire::Status::error) {
        ++rec.failed_shards;
        ++stats.failed_calls;
        continue;  // dropped response; its keys stay visited
      }
      ++stats.ok_calls;
      ++total_ok;
      rec.keys_found += static_cast<uint32_t>(call.response.r.size());
      r_lists.push_back(std::move(call.response.r));
      c_lists.push_back(std::move(call.response.c));
    }
    stats.latency_ms += hop_latency;

    for (const auto& s : merge_partial(r_lists, params.k)) h_r.insert(s);
    for (const auto& s : merge_partial(c_lists, params.l)) {
      if (!visited.count(s.id)) h_c.insert(s);
    }

    ++stats.hops_executed;
    stats.hops.push_back(std::move(rec));
  }

  out.results = h_r.sorted();
  if (stats.hops_executed > 0 && total_ok == 0) {
    throw SearchFailure("every shard call failed in every hop", std::move(out.results),
                        std::move(out.stats));
  }
  return out;
}

}  // namespace dann

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

#include "dann/node_store.hpp"

#include <algorithm>

#include "dann/distance.hpp"
#include "io_util.hpp"

namespace dann {

namespace {
constexpr char kShardMagic[8] = {'D', 'A', 'N', 'N', 'N', 'O', 'D', '1'};
}

std::vector<uint8_t> pack_node(const PackedNode& node, uint32_t m) {
  size_t n = node.neighbor_count();
  if (n > 0xFFFF) raise(ErrorCode::invalid_argument, "too many neighbors to pack");
  if (node.neighbor_codes.size() != n * m)
    raise(ErrorCode::invalid_argument, "neighbor code bytes != n * m");

  ByteWriter w;
  w.u64(node.id);
  for (float v : node.vector) w.f32(v);
  w.u16(static_cast<uint16_t>(n));
  for (size_t i = 0; i < n; ++i) {
    w.u64(node.neighbor_ids[i]);
    w.bytes(std::span<const uint8_t>(node.neighbor_codes.data() + i * m, m));
  }
  return w.take();
}

PackedNode unpack_node(std::span<const uint8_t> bytes, uint32_t dim, uint32_t m) {
  ByteReader r(bytes);
  PackedNode node;
  node.id = r.u64();
  node.vector.resize(dim);
  for (uint32_t i = 0; i < dim; ++i) node.vector[i] = r.f32();
  uint16_t n = r.u16();
  node.neighbor_ids.resize(n);
  node.neighbor_codes.resize(static_cast<size_t>(n) * m);
  for (uint16_t i = 0; i < n; ++i) {
    node.neighbor_ids[i] = r.u64();
    auto code = r.bytes(m);
    std::copy(code.begin(), code.end(), node.neighbor_codes.begin() + static_cast<size_t>(i) * m);
  }
  if (!r.done()) raise(ErrorCode::bad_format, "trailing bytes after packed node");
  return node;
}

void Shard::add_node(PackedNode node) {
  if (shard_of(node.id, num_shards_) != shard_id_)
    raise(ErrorCode::wrong_shard, "node does not belong to this shard");
  if (node.vector.size() != dim_) raise(ErrorCode::dim_mismatch, "node vector dim mismatch");
  if (node.neighbor_codes.size() != node.neighbor_ids.size() * m_)
    raise(ErrorCode::bad_format, "node code bytes inconsistent with m");
  if (node.neighbor_ids.size() > r_serve_)
    raise(ErrorCode::bad_format, "node exceeds serving degree");
  if (index_.count(node.id)) raise(ErrorCode::invalid_argument, "duplicate node id");
  index_[node.id] = nodes_.size();
  order_.push_back(node.id);
  nodes_.push_back(std::move(node));
}

const PackedNode* Shard::find(uint64_t id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

ScoreResult Shard::score_nodes(std::span<const uint64_t> keys, float t, uint32_t l,
                               std::span<const float> q, std::span<const uint8_t> q_sdc) const {
  if (l < 1) raise(ErrorCode::invalid_argument, "candidate limit l must be >= 1");
  if (q.size() != dim_) raise(ErrorCode::dim_mismatch, "query dim != shard dim");
  if (q_sdc.size() != m_) raise(ErrorCode::dim_mismatch, "query code length != shard m");
  for (uint64_t key : keys)
    if (shard_of(key, num_shards_) != shard_id_)
      raise(ErrorCode::wrong_shard, "request key belongs to another shard");

  // Set semantics over the requested keys: order and duplicates in the
  // request never change the result.
  std::vector<uint64_t> unique(keys.begin(), keys.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  ScoreResult out;
  uint64_t found = 0, bytes = 0;
  for (uint64_t key : unique) {
    const PackedNode* node = find(key);
    if (node == nullptr) {
      out.missing.push_back(key);
      continue;
    }
    ++found;
    bytes += packed_node_size(dim_, m_, node->neighbor_count());
    out.r.push_back(ScoredId{key, l2_sq(q, node->vector)});
    for (size_t i = 0; i < node->neighbor_count(); ++i) {
      float d = sdc_distance(q_sdc, node->neighbor_code(i, m_), *sdc_);
      if (d < t) out.c.push_back(ScoredId{node->neighbor_ids[i], d});
    }
  }
  std::sort(out.r.begin(), out.r.end(), ScoredLess{});
  std::sort(out.c.begin(), out.c.end(), ScoredLess{});
  if (out.c.size() > l) out.c.resize(l);

  io_nodes_.fetch_add(found, std::memory_order_relaxed);
  io_bytes_.fetch_add(bytes, std::memory_order_relaxed);
  return out;
}

size_t ShardSet::total_nodes() const {
  size_t total = 0;
  for (const auto& s : shards) total += s->node_count();
  return total;
}

ShardSet load_shards(const StitchedGraph& sg, const VectorDataset& ds, const Codebook& cb,
                     const CodeSet& codes, uint32_t num_shards) {
  if (num_shards == 0) raise(ErrorCode::invalid_argument, "num_shards must be >= 1");
  if (codes.count() != ds.count()) raise(ErrorCode::missing_code, "codes missing for corpus");
  if (codes.m != cb.m) raise(ErrorCode::missing_code, "codes trained with a different m");
  if (sg.graph.size() != ds.count())
    raise(ErrorCode::invalid_argument, "stitched graph does not cover the corpus");

  ShardSet set;
  set.dim = ds.dim;
  set.m = cb.m;
  set.r_serve = sg.r_serve;
  set.sdc = std::make_shared<const SdcTable>(build_sdc_table(cb));
  for (uint32_t s = 0; s < num_shards; ++s)
    set.shards.push_back(
        std::make_shared<Shard>(s, num_shards, ds.dim, cb.m, sg.r_serve, set.sdc));

  for (uint32_t pos = 0; pos < ds.count(); ++pos) {
    PackedNode node;
    node.id = ds.ids[pos];
    auto v = ds.vec(pos);
    node.vector.assign(v.begin(), v.end());
    const auto& nbrs = sg.graph.adj[pos];
    node.neighbor_ids.reserve(nbrs.size());
    node.neighbor_codes.reserve(nbrs.size() * cb.m);
    for (uint32_t nb_pos : nbrs) {
      node.neighbor_ids.push_back(ds.ids[nb_pos]);
      auto code = codes.code(nb_pos);
      node.neighbor_codes.insert(node.neighbor_codes.end(), code.begin(), code.end());
    }
    set.shards[shard_of(node.id, num_shards)]->add_node(std::move(node));
  }
  return set;
}

void write_shard(const std::string& path, const Shard& shard) {
  auto out = io::open_out(path);
  io::put_magic(out, kShardMagic);
  io::put_u32(out, shard.shard_id());
  io::put_u32(out, shard.num_shards());
  io::put_u32(out, shard.dim());
  io::put_u32(out, shard.m());
  io::put_u32(out, shard.r_serve());
  io::put_u64(out, shard.node_count());
  for (uint64_t id : shard.node_ids()) {
    const PackedNode* node = shard.find(id);
    auto bytes = pack_node(*node, shard.m());
    io::put_u32(out, static_cast<uint32_t>(bytes.size()));
    io::write_raw(out, bytes.data(), bytes.size());
  }
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

std::shared_ptr<Shard> read_shard(const std::string& path,
                                  std::shared_ptr<const SdcTable> sdc) {
  auto in = io::open_in(path);
  io::check_magic(in, kShardMagic, "shard");
  uint32_t shard_id = io::get_u32(in);
  uint32_t num_shards = io::get_u32(in);
  uint32_t dim = io::get_u32(in);
  uint32_t m = io::get_u32(in);
  uint32_t r_serve = io::get_u32(in);
  uint64_t count = io::get_u64(in);
  if (num_shards == 0 || shard_id >= num_shards || dim == 0 || m == 0)
    raise(ErrorCode::bad_format, "shard header inconsistent");
  if (sdc && sdc->m != m) raise(ErrorCode::bad_format, "sdc table m != shard m");

  auto shard = std::make_shared<Shard>(shard_id, num_shards, dim, m, r_serve, std::move(sdc));
  std::vector<uint8_t> buf;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t len = io::get_u32(in);
    buf.resize(len);
    io::read_raw(in, buf.data(), len);
    shard->add_node(unpack_node(buf, dim, m));
  }
  return shard;
}

}  // namespace dann

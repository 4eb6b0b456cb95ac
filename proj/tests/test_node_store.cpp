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

#include <doctest.h>

#include <algorithm>
#include <unordered_set>

#include "dann/node_store.hpp"
#include "dann/pipeline.hpp"
#include "support/reference_search.hpp"
#include "support/test_util.hpp"

using namespace dann;

namespace {

// small built index shared by the scoring tests
struct MiniStore {
  VectorDataset ds;
  Codebook cb;
  CodeSet codes;
  StitchedGraph sg;
  ShardSet set;
  std::unordered_map<uint64_t, uint32_t> id_to_pos;
};

MiniStore make_mini_store(size_t n, uint32_t num_shards, uint64_t seed) {
  MiniStore ms;
  ms.ds = test::random_dataset(n, 16, seed);
  ms.cb = train_codebooks(ms.ds, 4, 8, seed + 1);
  ms.codes = encode_dataset(ms.ds, ms.cb);

  ClusterParams cp;
  cp.p = 2;
  cp.epsilon = 0.1f;
  cp.seed = seed + 2;
  auto pa = cluster_assign(ms.ds, cp);
  VamanaParams vp;
  vp.r = 12;
  vp.l_build = 24;
  vp.seed = seed + 3;
  auto parts = build_partitions(ms.ds, pa, vp);
  ms.sg = stitch(parts, pa, ms.ds, 10);
  ms.set = load_shards(ms.sg, ms.ds, ms.cb, ms.codes, num_shards);
  for (uint32_t pos = 0; pos < ms.ds.count(); ++pos) ms.id_to_pos[ms.ds.ids[pos]] = pos;
  return ms;
}

}  // namespace

TEST_CASE("packed node size follows the layout formula") {
  PackedNode node;
  node.id = 42;
  node.vector = {1.0f, 2.0f, 3.0f, 4.0f};

  SUBCASE("zero neighbors") {
    auto bytes = pack_node(node, 2);
    CHECK(bytes.size() == 8 + 4 * 4 + 2);
    CHECK(bytes.size() == packed_node_size(4, 2, 0));
  }

  SUBCASE("dim=4, m=2, n=3 packs to 56 bytes") {
    node.neighbor_ids = {1, 2, 3};
    node.neighbor_codes = {0, 1, 2, 3, 4, 5};
    auto bytes = pack_node(node, 2);
    CHECK(bytes.size() == 56);
    CHECK(bytes.size() == packed_node_size(4, 2, 3));
  }
}

TEST_CASE("pack/unpack round trip is byte-identical") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    uint32_t dim = 1 + static_cast<uint32_t>(rng.below(12));
    uint32_t m = 1 + static_cast<uint32_t>(rng.below(6));
    size_t n = rng.below(9);
    PackedNode node;
    node.id = rng.next_u64();
    node.vector.resize(dim);
    for (auto& v : node.vector) v = static_cast<float>(rng.normal());
    node.neighbor_ids.resize(n);
    for (auto& id : node.neighbor_ids) id = rng.next_u64();
    node.neighbor_codes.resize(n * m);
    for (auto& b : node.neighbor_codes) b = static_cast<uint8_t>(rng.below(256));

    auto bytes = pack_node(node, m);
    auto back = unpack_node(bytes, dim, m);
    CHECK(pack_node(back, m) == bytes);
  }
}

TEST_CASE("unpack rejects malformed buffers") {
  PackedNode node;
  node.id = 1;
  node.vector = {1.0f, 2.0f};
  node.neighbor_ids = {9};
  node.neighbor_codes = {7, 8};
  auto bytes = pack_node(node, 2);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(unpack_node(truncated, 2, 2), Error);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(unpack_node(trailing, 2, 2), Error);

  // m mismatch shifts the layout and must not parse cleanly
  CHECK_THROWS_AS(unpack_node(bytes, 2, 4), Error);
}

TEST_CASE("shard_of is a stable documented mixer") {
  // splitmix64 finalizer test vectors (computed independently)
  CHECK(mix64(0) == 0xE220A8397B1DCDAFull);
  CHECK(mix64(0x9E3779B97F4A7C15ull) == 0x6E789E6AA1B965F4ull);

  CHECK(shard_of(123, 1) == 0);
  CHECK(shard_of(0, 16) == (0xE220A8397B1DCDAFull % 16));
  for (uint64_t id = 0; id < 100; ++id) CHECK(shard_of(id, 8) == shard_of(id, 8));
  CHECK_THROWS_AS(shard_of(1, 0), Error);
}

TEST_CASE("shard_of balances sequential ids") {
  const uint32_t shards = 16;
  const uint64_t n = 1000000;
  std::vector<uint64_t> load(shards, 0);
  for (uint64_t id = 0; id < n; ++id) load[shard_of(id, shards)]++;
  double mean = static_cast<double>(n) / shards;
  for (uint32_t s = 0; s < shards; ++s)
    CHECK(static_cast<double>(load[s]) <= 1.05 * mean);
}

TEST_CASE("score_nodes on a hand-built store") {
  // codebook: m=2, subdim=1, centroid 0 = 0/1, centroid 1 = 3/5 (rest far)
  Codebook cb;
  cb.dim = 2;
  cb.m = 2;
  cb.k = 256;
  cb.subdim = 1;
  cb.centroids.assign(2 * 256, 0.0f);
  for (size_t i = 0; i < cb.centroids.size(); ++i) cb.centroids[i] = 1e5f + static_cast<float>(i);
  cb.centroids[0 * 256 + 0] = 0.0f;
  cb.centroids[0 * 256 + 1] = 3.0f;
  cb.centroids[1 * 256 + 0] = 1.0f;
  cb.centroids[1 * 256 + 1] = 5.0f;
  auto sdc = std::make_shared<const SdcTable>(build_sdc_table(cb));

  // one node (key chosen for shard 0 of 1) with three neighbors
  auto shard = std::make_shared<Shard>(0, 1, 2, 2, 8, sdc);
  PackedNode node;
  node.id = 100;
  node.vector = {1.0f, 2.0f};
  node.neighbor_ids = {7, 8, 9};
  node.neighbor_codes = {0, 0,   // sdc vs q_sdc [0,0]: 0
                         1, 0,   // (0-3)^2 = 9
                         1, 1};  // 9 + 16 = 25
  shard->add_node(node);

  std::vector<float> q{2.0f, 4.0f};  // d(q, node) = 1 + 4 = 5
  Code q_sdc{0, 0};

  SUBCASE("threshold infinity, limit 2 keeps the two nearest candidates") {
    std::vector<uint64_t> keys{100};
    auto res = shard->score_nodes(keys, std::numeric_limits<float>::infinity(), 2, q, q_sdc);
    REQUIRE(res.r.size() == 1);
    CHECK(res.r[0].id == 100);
    CHECK(res.r[0].dist == 5.0f);
    REQUIRE(res.c.size() == 2);
    CHECK(res.c[0].id == 7);
    CHECK(res.c[0].dist == 0.0f);
    CHECK(res.c[1].id == 8);
    CHECK(res.c[1].dist == 9.0f);
    CHECK(res.missing.empty());
  }

  SUBCASE("t=0 empties C but keeps R") {
    std::vector<uint64_t> keys{100};
    auto res = shard->score_nodes(keys, 0.0f, 4, q, q_sdc);
    CHECK(res.c.empty());
    CHECK(res.r.size() == 1);
  }

  SUBCASE("empty key list") {
    auto res = shard->score_nodes({}, 1.0f, 4, q, q_sdc);
    CHECK(res.r.empty());
    CHECK(res.c.empty());
  }

  SUBCASE("missing keys are reported per key") {
    // id 68 also lands on shard 0 of 1 (trivially)
    std::vector<uint64_t> keys{100, 68};
    auto res = shard->score_nodes(keys, 1.0f, 4, q, q_sdc);
    REQUIRE(res.missing.size() == 1);
    CHECK(res.missing[0] == 68);
    CHECK(res.r.size() == 1);
  }

  SUBCASE("io counter counts found keys only") {
    uint64_t before = shard->io_counter();
    std::vector<uint64_t> keys{100, 68};
    shard->score_nodes(keys, 1.0f, 4, q, q_sdc);
    CHECK(shard->io_counter() == before + 1);
  }
}

TEST_CASE("wrong-shard inputs are request errors") {
  auto ms = make_mini_store(400, 4, 5);
  // find a key owned by shard 1
  uint64_t foreign = 0;
  for (uint64_t id = 0;; ++id)
    if (shard_of(id, 4) == 1) {
      foreign = id;
      break;
    }
  std::vector<uint64_t> keys{foreign};
  auto q = test::random_vec(16, 6);
  auto q_sdc = encode(q, ms.cb);
  CHECK_THROWS_AS(ms.set.shards[0]->score_nodes(keys, 1.0f, 4, q, q_sdc), Error);

  PackedNode stray;
  stray.id = foreign;
  stray.vector.assign(16, 0.0f);
  CHECK_THROWS_AS(ms.set.shards[0]->add_node(stray), Error);
}

TEST_CASE("score_nodes is invariant to key order and matches the oracle") {
  auto ms = make_mini_store(1000, 2, 11);
  Rng rng(13);
  std::unordered_set<uint64_t> present;
  for (uint64_t id : ms.set.shards[0]->node_ids()) present.insert(id);

  for (int trial = 0; trial < 100; ++trial) {
    // random keys from shard 0 (mostly found, a few missing)
    std::vector<uint64_t> keys;
    for (int i = 0; i < 16; ++i) {
      uint64_t id = rng.below(ms.ds.count() + 50);
      if (shard_of(id, 2) == 0) keys.push_back(id);
    }
    auto q = test::random_vec(16, 1000 + trial);
    auto q_sdc = encode(q, ms.cb);
    float t = trial % 3 == 0 ? std::numeric_limits<float>::infinity()
                             : static_cast<float>(trial) * 0.5f;
    uint32_t l = 1 + static_cast<uint32_t>(rng.below(20));

    auto got = ms.set.shards[0]->score_nodes(keys, t, l, q, q_sdc);
    auto want = test::reference_score(keys, t, l, q, q_sdc, ms.sg, ms.ds, ms.codes, ms.cb,
                                      ms.id_to_pos, &present);
    CHECK(got.r == want.r);
    CHECK(got.c == want.c);
    CHECK(got.missing == want.missing);

    // order invariance
    auto shuffled = keys;
    std::reverse(shuffled.begin(), shuffled.end());
    auto again = ms.set.shards[0]->score_nodes(shuffled, t, l, q, q_sdc);
    CHECK(again.r == got.r);
    CHECK(again.c == got.c);
  }
}

TEST_CASE("load_shards places every node and keeps the size formula") {
  auto ms = make_mini_store(500, 4, 17);

  SUBCASE("counts add up and ownership holds") {
    CHECK(ms.set.total_nodes() == ms.ds.count());
    for (uint32_t s = 0; s < 4; ++s)
      for (uint64_t id : ms.set.shards[s]->node_ids()) CHECK(shard_of(id, 4) == s);
  }

  SUBCASE("one shard holds everything") {
    auto single = load_shards(ms.sg, ms.ds, ms.cb, ms.codes, 1);
    CHECK(single.shards[0]->node_count() == ms.ds.count());
  }

  SUBCASE("total packed bytes match the per-node formula") {
    uint64_t measured = 0, formula = 0;
    size_t degree_sum = 0;
    for (uint32_t s = 0; s < 4; ++s) {
      for (uint64_t id : ms.set.shards[s]->node_ids()) {
        const PackedNode* node = ms.set.shards[s]->find(id);
        measured += pack_node(*node, ms.cb.m).size();
        formula += packed_node_size(ms.ds.dim, ms.cb.m, node->neighbor_count());
        degree_sum += node->neighbor_count();
      }
    }
    CHECK(measured == formula);
    double mean_degree = static_cast<double>(degree_sum) / static_cast<double>(ms.ds.count());
    double nominal = static_cast<double>(ms.ds.count()) *
                     (8.0 + 4.0 * ms.ds.dim + 2.0 + mean_degree * (8.0 + ms.cb.m));
    CHECK(static_cast<double>(measured) == doctest::Approx(nominal).epsilon(0.01));
  }

  SUBCASE("missing codes are rejected") {
    CodeSet empty;
    empty.m = ms.cb.m;
    CHECK_THROWS_AS(load_shards(ms.sg, ms.ds, ms.cb, empty, 2), Error);
  }
}

TEST_CASE("shard file round trip preserves scoring behaviour") {
  auto ms = make_mini_store(300, 2, 19);
  test::TempFile tmp("shard.bin");
  write_shard(tmp.path, *ms.set.shards[0]);
  auto back = read_shard(tmp.path, ms.set.sdc);

  CHECK(back->shard_id() == 0);
  CHECK(back->num_shards() == 2);
  CHECK(back->node_count() == ms.set.shards[0]->node_count());

  auto q = test::random_vec(16, 21);
  auto q_sdc = encode(q, ms.cb);
  std::vector<uint64_t> keys(ms.set.shards[0]->node_ids().begin(),
                             ms.set.shards[0]->node_ids().begin() + 10);
  auto a = ms.set.shards[0]->score_nodes(keys, std::numeric_limits<float>::infinity(), 8, q,
                                         q_sdc);
  auto b = back->score_nodes(keys, std::numeric_limits<float>::infinity(), 8, q, q_sdc);
  CHECK(a.r == b.r);
  CHECK(a.c == b.c);
}

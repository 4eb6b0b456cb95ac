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

#include "dann/distance.hpp"
#include "dann/pipeline.hpp"
#include "dann/vamana.hpp"
#include "support/test_util.hpp"

using namespace dann;

TEST_CASE("robust_prune keeps a single candidate") {
  auto ds = make_dataset(1, {0.0f, 1.0f});
  std::vector<ScoredId> cands{{1, 1.0f}};
  auto kept = robust_prune(0, cands, 1.2f, 4, ds);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == 1);
}

TEST_CASE("robust_prune drops the far collinear point at alpha=1") {
  // p=0 at x=0, a=1 at x=1, b=2 at x=2; squared distances d(p,a)=1,
  // d(p,b)=4, d(a,b)=1. After keeping a: 1*d(a,b)=1 <= d(p,b)=4, so b goes.
  auto ds = make_dataset(1, {0.0f, 1.0f, 2.0f});
  std::vector<ScoredId> cands{{1, 1.0f}, {2, 4.0f}};
  auto kept = robust_prune(0, cands, 1.0f, 4, ds);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == 1);
}

TEST_CASE("robust_prune keeps mutually spread candidates") {
  // p at the origin, four axis-aligned unit points: d(p,c)=1 for all,
  // d(ci,cj)=2, and alpha*2 > 1, so nothing occludes anything.
  std::vector<float> data(5 * 4, 0.0f);
  data[1 * 4 + 0] = 1.0f;
  data[2 * 4 + 1] = 1.0f;
  data[3 * 4 + 2] = 1.0f;
  data[4 * 4 + 3] = 1.0f;
  auto ds = make_dataset(4, std::move(data));
  std::vector<ScoredId> cands{{1, 1.0f}, {2, 1.0f}, {3, 1.0f}, {4, 1.0f}};
  auto kept = robust_prune(0, cands, 1.2f, 8, ds);
  CHECK(kept.size() == 4);
}

TEST_CASE("robust_prune respects the degree cap and excludes p") {
  auto ds = test::random_dataset(64, 8, 3);
  std::vector<ScoredId> cands;
  for (uint32_t i = 0; i < 64; ++i) cands.push_back(ScoredId{i, l2_sq(ds.vec(0), ds.vec(i))});
  auto kept = robust_prune(0, cands, 4.0f, 10, ds);  // large alpha keeps everything eligible
  CHECK(kept.size() <= 10);
  CHECK(std::find(kept.begin(), kept.end(), 0u) == kept.end());
}

TEST_CASE("build_vamana trivial cases") {
  SUBCASE("single point") {
    auto ds = make_dataset(2, {1.0f, 2.0f});
    VamanaParams p;
    auto g = build_vamana(ds, p);
    CHECK(g.entry == 0);
    REQUIRE(g.size() == 1);
    CHECK(g.adj[0].empty());
  }

  SUBCASE("three collinear points with R=2") {
    auto ds = make_dataset(1, {0.0f, 1.0f, 2.0f});
    VamanaParams p;
    p.r = 2;
    p.l_build = 4;
    auto g = build_vamana(ds, p);
    CHECK(g.entry == 1);  // medoid is the middle point
    for (const auto& list : g.adj) CHECK(list.size() <= 2);
    CHECK(reachable_count(g, g.entry) == 3);
  }

  SUBCASE("empty dataset") {
    VectorDataset ds;
    ds.dim = 4;
    CHECK_THROWS_AS(build_vamana(ds, VamanaParams{}), Error);
  }

  SUBCASE("parameter validation") {
    auto ds = test::random_dataset(10, 4, 1);
    VamanaParams p;
    p.r = 1;
    CHECK_THROWS_AS(build_vamana(ds, p), Error);
    p = VamanaParams{};
    p.l_build = p.r - 1;
    CHECK_THROWS_AS(build_vamana(ds, p), Error);
    p = VamanaParams{};
    p.alpha = 0.5f;
    CHECK_THROWS_AS(build_vamana(ds, p), Error);
  }
}

TEST_CASE("build_vamana is deterministic under a fixed seed") {
  auto ds = test::random_dataset(800, 16, 9);
  VamanaParams p;
  p.r = 12;
  p.l_build = 24;
  p.seed = 4;
  auto a = build_vamana(ds, p);
  auto b = build_vamana(ds, p);
  CHECK(a.entry == b.entry);
  CHECK(a.adj == b.adj);
}

TEST_CASE("build_vamana invariants: degree cap, valid ids, reachability") {
  auto ds = test::random_dataset(2000, 16, 13);
  VamanaParams p;
  p.r = 16;
  p.l_build = 32;
  auto g = build_vamana(ds, p);
  for (const auto& list : g.adj) {
    CHECK(list.size() <= p.r);
    for (uint32_t nb : list) CHECK(nb < g.size());
  }
  CHECK(reachable_count(g, g.entry) == g.size());
}

TEST_CASE("parallel build mode keeps the graph invariants") {
  auto ds = test::random_dataset(1500, 16, 15);
  VamanaParams p;
  p.r = 16;
  p.l_build = 32;
  p.threads = 4;
  auto g = build_vamana(ds, p);
  for (const auto& list : g.adj) CHECK(list.size() <= p.r);
  CHECK(reachable_count(g, g.entry) == g.size());
}

TEST_CASE("greedy_search basics") {
  auto ds = test::random_dataset(500, 8, 17);
  VamanaParams p;
  p.r = 12;
  p.l_build = 24;
  auto g = build_vamana(ds, p);

  SUBCASE("a stored vector is found at distance zero") {
    auto trace = greedy_search(g, ds, ds.vec(123), 64, 5);
    REQUIRE(!trace.results.empty());
    CHECK(trace.results[0].id == 123);
    CHECK(trace.results[0].dist == 0.0f);
  }

  SUBCASE("io_limit=1 expands only the entry point") {
    auto trace = greedy_search(g, ds, ds.vec(3), 16, 1, 1);
    REQUIRE(trace.visited.size() == 1);
    CHECK(trace.visited[0] == g.entry);
  }

  SUBCASE("io_limit=0 spends nothing") {
    auto trace = greedy_search(g, ds, ds.vec(3), 16, 1, 0);
    CHECK(trace.visited.empty());
    CHECK(trace.results.empty());
  }

  SUBCASE("k must not exceed l") {
    CHECK_THROWS_AS(greedy_search(g, ds, ds.vec(0), 4, 8), Error);
  }

  SUBCASE("visited matches expansion count and order is recorded") {
    auto trace = greedy_search(g, ds, ds.vec(9), 32, 10, 7);
    CHECK(trace.visited.size() <= 7);
    CHECK(trace.visited[0] == g.entry);
  }
}

TEST_CASE("greedy_search on a fully connected graph degenerates to exact search") {
  auto ds = test::random_dataset(64, 8, 19);
  Graph g;
  g.entry = 0;
  g.max_degree = 63;
  g.adj.resize(64);
  for (uint32_t i = 0; i < 64; ++i)
    for (uint32_t j = 0; j < 64; ++j)
      if (i != j) g.adj[i].push_back(j);

  auto q = test::random_vec(8, 20);
  auto trace = greedy_search(g, ds, q, 64, 10);
  auto want = brute_force_topk(ds, q, 10);
  REQUIRE(trace.results.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) {
    CHECK(trace.results[i].id == want[i].id);
    CHECK(trace.results[i].dist == want[i].dist);
  }
}

TEST_CASE("graph file round trip") {
  auto ds = test::random_dataset(300, 8, 23);
  VamanaParams p;
  p.r = 8;
  p.l_build = 16;
  auto g = build_vamana(ds, p);
  test::TempFile tmp("graph.bin");
  write_graph(tmp.path, g);
  auto back = read_graph(tmp.path);
  CHECK(back.entry == g.entry);
  CHECK(back.max_degree == g.max_degree);
  CHECK(back.adj == g.adj);
}

TEST_CASE("recall against brute force on a 10K build") {
  auto ds = test::random_dataset(10000, 32, 29);
  VamanaParams p;
  p.r = 32;
  p.l_build = 64;
  p.alpha = 1.2f;
  auto g = build_vamana(ds, p);
  CHECK(reachable_count(g, g.entry) == g.size());

  const size_t nq = 200;
  auto queries = test::random_dataset(nq, 32, 30);
  double recall = 0.0;
  for (size_t i = 0; i < nq; ++i) {
    auto got = greedy_search(g, ds, queries.vec(i), 64, 10);
    auto want = brute_force_topk(ds, queries.vec(i), 10);
    size_t hit = 0;
    for (const auto& w : want)
      for (const auto& r : got.results)
        if (r.id == w.id) ++hit;
    recall += static_cast<double>(hit) / 10.0;
  }
  recall /= static_cast<double>(nq);
  CHECK(recall >= 0.9);
}

TEST_CASE("mean recall is non-decreasing in the beam size L") {
  auto ds = test::random_dataset(8000, 16, 37);
  VamanaParams p;
  p.r = 24;
  p.l_build = 48;
  auto g = build_vamana(ds, p);

  const size_t nq = 1000;
  auto queries = test::random_dataset(nq, 16, 38);
  std::vector<std::vector<ScoredId>> gt(nq);
  for (size_t i = 0; i < nq; ++i) gt[i] = brute_force_topk(ds, queries.vec(i), 10);

  auto mean_recall = [&](uint32_t l) {
    double total = 0.0;
    for (size_t i = 0; i < nq; ++i) {
      auto got = greedy_search(g, ds, queries.vec(i), l, 10);
      size_t hit = 0;
      for (const auto& w : gt[i])
        for (const auto& r : got.results)
          if (r.id == w.id) ++hit;
      total += static_cast<double>(hit) / 10.0;
    }
    return total / static_cast<double>(nq);
  };

  double r16 = mean_recall(16), r32 = mean_recall(32), r64 = mean_recall(64);
  CHECK(r32 >= r16 - 1e-9);
  CHECK(r64 >= r32 - 1e-9);
}

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
#include <cmath>
#include <numeric>
#include <set>

#include "dann/distance.hpp"
#include "dann/quantizer.hpp"
#include "support/test_util.hpp"

using namespace dann;

namespace {

// m=2, subdim=1 codebook whose first two centroids per subspace are known;
// the rest are far away so they never win an argmin.
Codebook tiny_codebook() {
  Codebook cb;
  cb.dim = 2;
  cb.m = 2;
  cb.k = 256;
  cb.subdim = 1;
  cb.centroids.resize(2 * 256, 1e6f);
  cb.centroids[0 * 256 + 0] = 0.0f;  // sub 0: c0 = 0, c1 = 3
  cb.centroids[0 * 256 + 1] = 3.0f;
  cb.centroids[1 * 256 + 0] = 1.0f;  // sub 1: c0 = 1, c1 = 5
  cb.centroids[1 * 256 + 1] = 5.0f;
  // keep far filler distinct so validation's uniqueness isn't a concern
  for (size_t i = 0; i < cb.centroids.size(); ++i)
    if (cb.centroids[i] == 1e6f) cb.centroids[i] += static_cast<float>(i);
  return cb;
}

}  // namespace

TEST_CASE("training on exactly 256 distinct values is lossless") {
  // 256 distinct scalars, each repeated 4 times
  std::vector<float> data;
  for (int rep = 0; rep < 4; ++rep)
    for (int v = 0; v < 256; ++v) data.push_back(static_cast<float>(v));
  auto ds = make_dataset(1, std::move(data));

  auto cb = train_codebooks(ds, 1, 10, 3);
  std::set<float> got(cb.centroids.begin(), cb.centroids.end());
  REQUIRE(got.size() == 256);
  for (int v = 0; v < 256; ++v) CHECK(got.count(static_cast<float>(v)) == 1);
  CHECK(quantization_mse(ds, cb) == 0.0);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto ds = test::random_dataset(2000, 16, 21);
  auto a = train_codebooks(ds, 4, 8, 77);
  auto b = train_codebooks(ds, 4, 8, 77);
  CHECK(a.centroids == b.centroids);

  PqTrainParams threaded;
  threaded.m = 4;
  threaded.iters = 8;
  threaded.seed = 77;
  threaded.threads = 4;
  auto c = train_codebooks(ds, threaded);
  CHECK(a.centroids == c.centroids);
}

TEST_CASE("quantization MSE is non-increasing in the iteration count") {
  auto ds = test::random_dataset(10000, 32, 31);
  auto one = train_codebooks(ds, 8, 1, 5);
  auto ten = train_codebooks(ds, 8, 10, 5);
  CHECK(quantization_mse(ds, ten) <= quantization_mse(ds, one) + 1e-9);
}

TEST_CASE("train_codebooks validates inputs") {
  auto ds = test::random_dataset(1000, 10, 1);
  CHECK_THROWS_AS(train_codebooks(ds, 3, 5, 1), Error);  // 10 % 3 != 0
  auto tiny = test::random_dataset(100, 8, 1);
  CHECK_THROWS_AS(train_codebooks(tiny, 2, 5, 1), Error);  // too few samples
}

TEST_CASE("encode picks the nearest centroid in every subspace") {
  auto ds = test::random_dataset(3000, 8, 41);
  auto cb = train_codebooks(ds, 4, 10, 9);

  // a vector equal to centroid j in every subspace encodes to all-j
  for (uint32_t j : {0u, 17u, 255u}) {
    std::vector<float> v(cb.dim);
    for (uint32_t s = 0; s < cb.m; ++s) {
      auto c = cb.centroid(s, j);
      std::copy(c.begin(), c.end(), v.begin() + s * cb.subdim);
    }
    auto code = encode(v, cb);
    for (uint32_t s = 0; s < cb.m; ++s) CHECK(code[s] == j);
  }

  std::vector<float> wrong(cb.dim + 1);
  CHECK_THROWS_AS(encode(wrong, cb), Error);
}

TEST_CASE("reconstruction error is the sum of chosen-centroid distances") {
  auto ds = test::random_dataset(2000, 8, 43);
  auto cb = train_codebooks(ds, 4, 10, 10);
  auto v = ds.vec(123);
  auto code = encode(v, cb);
  auto rec = reconstruct(code, cb);

  // oracle: accumulate per-subspace distances directly
  double want = 0.0;
  for (uint32_t s = 0; s < cb.m; ++s) {
    auto sub = v.subspan(s * cb.subdim, cb.subdim);
    want += l2_sq(sub, cb.centroid(s, code[s]));
  }
  CHECK(l2_sq(v, rec) == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("identity rotation and absent rotation produce identical codes") {
  auto ds = test::random_dataset(1000, 8, 47);
  auto plain = train_codebooks(ds, 4, 8, 3);
  Codebook rotated = plain;
  rotated.rotation.assign(static_cast<size_t>(plain.dim) * plain.dim, 0.0f);
  for (uint32_t i = 0; i < plain.dim; ++i) rotated.rotation[i * plain.dim + i] = 1.0f;
  rotated.validate();

  auto codes_a = encode_dataset(ds, plain);
  auto codes_b = encode_dataset(ds, rotated);
  CHECK(codes_a.bytes == codes_b.bytes);

  auto ta = build_sdc_table(plain);
  auto tb = build_sdc_table(rotated);
  CHECK(ta.vals == tb.vals);
}

TEST_CASE("encode is idempotent through reconstruction") {
  auto ds = test::random_dataset(1500, 16, 53);
  auto cb = train_codebooks(ds, 4, 10, 4);
  for (size_t i = 0; i < 50; ++i) {
    auto code = encode(ds.vec(i), cb);
    auto rec = reconstruct(code, cb);
    CHECK(encode(rec, cb) == code);
  }
}

TEST_CASE("sdc table: diagonal, symmetry, direct recomputation") {
  auto ds = test::random_dataset(2000, 8, 59);
  auto cb = train_codebooks(ds, 4, 10, 6);
  auto table = build_sdc_table(cb);

  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    uint32_t s = static_cast<uint32_t>(rng.below(cb.m));
    uint32_t i = static_cast<uint32_t>(rng.below(256));
    uint32_t j = static_cast<uint32_t>(rng.below(256));
    CHECK(table.at(s, i, i) == 0.0f);
    CHECK(table.at(s, i, j) == table.at(s, j, i));
    CHECK(table.at(s, i, j) == l2_sq(cb.centroid(s, i), cb.centroid(s, j)));
  }
}

TEST_CASE("sdc_distance on a hand-built two-subspace table") {
  auto cb = tiny_codebook();
  auto table = build_sdc_table(cb);

  Code a{0, 0}, b{1, 1};
  // sub 0: (0-3)^2 = 9; sub 1: (1-5)^2 = 16
  CHECK(sdc_distance(a, b, table) == 25.0f);
  CHECK(sdc_distance(a, a, table) == 0.0f);
  CHECK(sdc_distance(b, a, table) == 25.0f);

  Code wrong{0};
  CHECK_THROWS_AS(sdc_distance(wrong, b, table), Error);
}

TEST_CASE("sdc_distance symmetry and identity over random codes") {
  auto ds = test::random_dataset(2000, 8, 61);
  auto cb = train_codebooks(ds, 4, 8, 7);
  auto table = build_sdc_table(cb);
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    Code a(cb.m), b(cb.m);
    for (auto& x : a) x = static_cast<uint8_t>(rng.below(256));
    for (auto& x : b) x = static_cast<uint8_t>(rng.below(256));
    CHECK(sdc_distance(a, b, table) == sdc_distance(b, a, table));
    CHECK(sdc_distance(a, a, table) == 0.0f);
  }
}

TEST_CASE("sdc distance rank-correlates with true distance") {
  auto ds = test::random_dataset(4000, 32, 67);
  auto cb = train_codebooks(ds, 8, 10, 8);
  auto table = build_sdc_table(cb);

  const size_t pairs = 1000;
  std::vector<double> true_d(pairs), sdc_d(pairs);
  Rng rng(31);
  for (size_t i = 0; i < pairs; ++i) {
    size_t x = rng.below(ds.count()), y = rng.below(ds.count());
    true_d[i] = l2_sq(ds.vec(x), ds.vec(y));
    sdc_d[i] = sdc_distance(encode(ds.vec(x), cb), encode(ds.vec(y), cb), table);
  }

  // Spearman rank correlation
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  auto ra = ranks(true_d), rb = ranks(sdc_d);
  double n = static_cast<double>(pairs);
  double mean = (n - 1) / 2.0;
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < pairs; ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  double spearman = cov / std::sqrt(va * vb);
  CHECK(spearman > 0.8);
}

TEST_CASE("codebook file round trip") {
  auto ds = test::random_dataset(1000, 8, 71);

  SUBCASE("plain") {
    auto cb = train_codebooks(ds, 4, 8, 12);
    test::TempFile tmp("cb_plain.bin");
    write_codebook(tmp.path, cb);
    auto back = read_codebook(tmp.path);
    CHECK(back.dim == cb.dim);
    CHECK(back.m == cb.m);
    CHECK(back.centroids == cb.centroids);
    CHECK_FALSE(back.has_rotation());
  }

  SUBCASE("with rotation") {
    PqTrainParams p;
    p.m = 4;
    p.iters = 6;
    p.seed = 12;
    p.opq = true;
    p.opq_iters = 3;
    auto cb = train_codebooks(ds, p);
    REQUIRE(cb.has_rotation());
    test::TempFile tmp("cb_opq.bin");
    write_codebook(tmp.path, cb);
    auto back = read_codebook(tmp.path);
    CHECK(back.rotation == cb.rotation);
    CHECK(back.centroids == cb.centroids);
  }
}

TEST_CASE("non-orthogonal rotation is rejected") {
  auto ds = test::random_dataset(1000, 4, 73);
  auto cb = train_codebooks(ds, 2, 6, 13);
  cb.rotation.assign(16, 0.5f);
  CHECK_THROWS_AS(cb.validate(), Error);
}

TEST_CASE("opq training produces an orthogonal rotation and helps on skewed data") {
  // anisotropic axis-aligned gaussian spun by a fixed rotation: plain PQ
  // sees correlated subspaces, OPQ should recover most of the loss
  const uint32_t dim = 8;
  const size_t n = 3000;
  Rng rng(83);
  // scales differ wildly per axis
  std::vector<double> scale{8.0, 6.0, 4.0, 3.0, 0.5, 0.3, 0.2, 0.1};
  // fixed rotation: Givens rotations across subspace boundary pairs
  std::vector<float> rot(dim * dim, 0.0f);
  for (uint32_t i = 0; i < dim; ++i) rot[i * dim + i] = 1.0f;
  auto apply_givens = [&](uint32_t a, uint32_t b, double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    for (uint32_t col = 0; col < dim; ++col) {
      float ra = rot[a * dim + col], rb = rot[b * dim + col];
      rot[a * dim + col] = static_cast<float>(c * ra - s * rb);
      rot[b * dim + col] = static_cast<float>(s * ra + c * rb);
    }
  };
  apply_givens(0, 5, 0.7);
  apply_givens(1, 6, 0.9);
  apply_givens(2, 7, 1.1);
  apply_givens(3, 4, 0.5);

  std::vector<float> data(n * dim);
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> z(dim);
    for (uint32_t j = 0; j < dim; ++j) z[j] = rng.normal() * scale[j];
    for (uint32_t j = 0; j < dim; ++j) {
      double s = 0;
      for (uint32_t k2 = 0; k2 < dim; ++k2) s += rot[j * dim + k2] * z[k2];
      data[i * dim + j] = static_cast<float>(s);
    }
  }
  auto ds = make_dataset(dim, std::move(data));

  PqTrainParams plain;
  plain.m = 4;
  plain.iters = 10;
  plain.seed = 19;
  auto pq = train_codebooks(ds, plain);

  PqTrainParams opq = plain;
  opq.opq = true;
  opq.opq_iters = 6;
  auto cb = train_codebooks(ds, opq);
  REQUIRE(cb.has_rotation());
  cb.validate();  // R^T R = I within tolerance

  CHECK(quantization_mse(ds, cb) < quantization_mse(ds, pq));
}

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
#include <span>
#include <string>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"

namespace dann {

/// One-byte PQ code per subspace.
using Code = std::vector<uint8_t>;

/// Product-quantization codebook: m subspaces, 256 centroids each (one byte
/// per subspace), with an optional orthogonal rotation applied before
/// subspace split. An absent rotation means plain PQ.
struct Codebook {
  uint32_t dim = 0;
  uint32_t m = 0;
  uint32_t k = 256;
  uint32_t subdim = 0;           // dim / m
  std::vector<float> rotation;   // empty, or dim*dim row-major orthogonal
  std::vector<float> centroids;  // m * k * subdim

  bool has_rotation() const { return !rotation.empty(); }

  std::span<const float> centroid(uint32_t sub, uint32_t idx) const {
    size_t off = (static_cast<size_t>(sub) * k + idx) * subdim;
    return std::span<const float>(centroids.data() + off, subdim);
  }

  void validate() const;
};

struct PqTrainParams {
  uint32_t m = 16;
  uint32_t iters = 15;
  uint64_t seed = 0;
  bool opq = false;        // train an orthogonal rotation as well
  uint32_t opq_iters = 8;  // alternations of (encode, Procrustes solve)
  uint32_t threads = 1;
};

/// Per-subspace k-means with K=256. Deterministic under a fixed seed;
/// quantization MSE is non-increasing in the iteration count.
Codebook train_codebooks(const VectorDataset& sample, const PqTrainParams& params);
Codebook train_codebooks(const VectorDataset& sample, uint32_t m, uint32_t iters, uint64_t seed);

/// Nearest-centroid code of v under cb (rotation applied first when present).
/// Ties resolve to the lowest centroid index.
Code encode(std::span<const float> v, const Codebook& cb);

/// Inverse of encode up to quantization: concatenated centroids, rotated back.
std::vector<float> reconstruct(std::span<const uint8_t> code, const Codebook& cb);

/// Flat code storage for a whole dataset, in dataset order.
struct CodeSet {
  uint32_t m = 0;
  std::vector<uint8_t> bytes;  // count * m

  size_t count() const { return m == 0 ? 0 : bytes.size() / m; }
  std::span<const uint8_t> code(size_t i) const {
    return std::span<const uint8_t>(bytes.data() + i * m, m);
  }
};

CodeSet encode_dataset(const VectorDataset& ds, const Codebook& cb, uint32_t threads = 1);

/// Mean squared reconstruction error of cb over ds.
double quantization_mse(const VectorDataset& ds, const Codebook& cb);

/// Static centroid-pair distance table: vals[m][i][j] = l2_sq(c_mi, c_mj).
/// One copy lives on every shard; symmetric with a zero diagonal.
struct SdcTable {
  uint32_t m = 0;
  std::vector<float> vals;  // m * 256 * 256

  float at(uint32_t sub, uint32_t i, uint32_t j) const {
    return vals[(static_cast<size_t>(sub) * 256 + i) * 256 + j];
  }
  const float* sub(uint32_t s) const { return vals.data() + static_cast<size_t>(s) * 256 * 256; }
};

SdcTable build_sdc_table(const Codebook& cb);

/// Symmetric distance between two codes: sum of table lookups per subspace.
inline float sdc_distance(std::span<const uint8_t> a, std::span<const uint8_t> b,
                          const SdcTable& t) {
  if (a.size() != b.size() || a.size() != t.m)
    raise(ErrorCode::dim_mismatch, "sdc_distance code length mismatch");
  float sum = 0.0f;
  for (uint32_t s = 0; s < t.m; ++s)
    sum += t.sub(s)[static_cast<size_t>(a[s]) * 256 + b[s]];
  return sum;
}

// Codebook file, little-endian:
//   magic "DANNPQ01", dim u32, M u32, K u32, rotation flag u8 (0/1),
//   optional rotation (dim*dim f32), centroids (M*K*subdim f32).
void write_codebook(const std::string& path, const Codebook& cb);
Codebook read_codebook(const std::string& path);

}  // namespace dann

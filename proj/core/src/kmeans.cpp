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

#include "dann/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <future>
#include <limits>

#include "dann/distance.hpp"

namespace dann {

namespace {

std::span<const float> row(std::span<const float> data, uint32_t dim, size_t i) {
  return data.subspan(i * dim, dim);
}

// Parallel map over [0, n) in contiguous blocks; results land in
// preallocated slots, so the outcome is independent of scheduling.
void parallel_for(size_t n, uint32_t threads, const std::function<void(size_t, size_t)>& fn) {
  if (threads <= 1 || n < 2048) {
    fn(0, n);
    return;
  }
  size_t blocks = std::min<size_t>(threads, n);
  size_t per = (n + blocks - 1) / blocks;
  std::vector<std::future<void>> futs;
  for (size_t b = 0; b < blocks; ++b) {
    size_t lo = b * per, hi = std::min(n, lo + per);
    if (lo >= hi) break;
    futs.push_back(std::async(std::launch::async, [&fn, lo, hi] { fn(lo, hi); }));
  }
  for (auto& f : futs) f.get();
}

}  // namespace

uint32_t nearest_centroid(std::span<const float> v, std::span<const float> centroids,
                          uint32_t dim) {
  uint32_t k = static_cast<uint32_t>(centroids.size() / dim);
  uint32_t best = 0;
  float best_d = std::numeric_limits<float>::max();
  for (uint32_t c = 0; c < k; ++c) {
    float d = l2_sq(v, centroids.subspan(static_cast<size_t>(c) * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KmeansResult kmeans(std::span<const float> data, size_t n, uint32_t dim, uint32_t k,
                    uint32_t iters, uint64_t seed, uint32_t threads) {
  if (n == 0) raise(ErrorCode::empty_dataset, "kmeans on empty data");
  if (k == 0 || k > n) raise(ErrorCode::invalid_argument, "kmeans needs 1 <= k <= n");
  if (data.size() != n * dim) raise(ErrorCode::invalid_argument, "kmeans data length mismatch");

  Rng rng(seed);
  KmeansResult res;
  res.centroids.resize(static_cast<size_t>(k) * dim);
  res.assign.resize(n);

  // k-means++ seeding: first pick uniform, the rest weighted by squared
  // distance to the nearest already-chosen center.
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  size_t first = rng.below(n);
  std::memcpy(res.centroids.data(), row(data, dim, first).data(), dim * sizeof(float));
  for (uint32_t c = 1; c < k; ++c) {
    auto prev = std::span<const float>(res.centroids).subspan(static_cast<size_t>(c - 1) * dim, dim);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d = l2_sq(row(data, dim, i), prev);
      if (d < dist2[i]) dist2[i] = d;
      total += dist2[i];
    }
    size_t pick;
    if (total <= 0.0) {
      // Fewer distinct points than centers; fall back to a uniform pick.
      pick = rng.below(n);
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    std::memcpy(res.centroids.data() + static_cast<size_t>(c) * dim,
                row(data, dim, pick).data(), dim * sizeof(float));
  }

  std::vector<double> sums(static_cast<size_t>(k) * dim);
  std::vector<uint64_t> counts(k);
  std::vector<float> point_d(n);

  for (uint32_t it = 0; it < iters; ++it) {
    // Assignment step (parallel, pure per point).
    parallel_for(n, threads, [&](size_t lo, size_t hi) {
      for (size_t i = lo; i < hi; ++i) {
        uint32_t c = nearest_centroid(row(data, dim, i), res.centroids, dim);
        res.assign[i] = c;
        point_d[i] = l2_sq(row(data, dim, i),
                           std::span<const float>(res.centroids)
                               .subspan(static_cast<size_t>(c) * dim, dim));
      }
    });

    // Update step (sequential accumulation keeps it deterministic).
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      uint32_t c = res.assign[i];
      counts[c]++;
      auto v = row(data, dim, i);
      double* s = sums.data() + static_cast<size_t>(c) * dim;
      for (uint32_t j = 0; j < dim; ++j) s[j] += v[j];
    }
    for (uint32_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Reseed from the point farthest from its current centroid.
        size_t far = 0;
        float far_d = -1.0f;
        for (size_t i = 0; i < n; ++i) {
          if (point_d[i] > far_d) {
            far_d = point_d[i];
            far = i;
          }
        }
        std::memcpy(res.centroids.data() + static_cast<size_t>(c) * dim,
                    row(data, dim, far).data(), dim * sizeof(float));
        point_d[far] = 0.0f;  // avoid reseeding two empty clusters identically
        res.assign[far] = c;
      } else {
        float* dst = res.centroids.data() + static_cast<size_t>(c) * dim;
        const double* s = sums.data() + static_cast<size_t>(c) * dim;
        for (uint32_t j = 0; j < dim; ++j)
          dst[j] = static_cast<float>(s[j] / static_cast<double>(counts[c]));
      }
    }
  }

  // Final assignment against the last centroid update.
  double total = 0.0;
  parallel_for(n, threads, [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      uint32_t c = nearest_centroid(row(data, dim, i), res.centroids, dim);
      res.assign[i] = c;
      point_d[i] = l2_sq(row(data, dim, i),
                         std::span<const float>(res.centroids)
                             .subspan(static_cast<size_t>(c) * dim, dim));
    }
  });
  for (size_t i = 0; i < n; ++i) total += point_d[i];
  res.mse = total / static_cast<double>(n);
  return res;
}

}  // namespace dann

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

#include "dann/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <limits>

#include "dann/distance.hpp"
#include "dann/kmeans.hpp"
#include "io_util.hpp"

namespace dann {

namespace {

constexpr char kPqMagic[8] = {'D', 'A', 'N', 'N', 'P', 'Q', '0', '1'};

// dense row-major dim x dim helpers for the rotation solve
void matmul(std::span<const float> a, std::span<const float> b, std::span<float> out,
            uint32_t d) {
  for (uint32_t i = 0; i < d; ++i) {
    for (uint32_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (uint32_t k = 0; k < d; ++k)
        s += static_cast<double>(a[i * d + k]) * static_cast<double>(b[k * d + j]);
      out[i * d + j] = static_cast<float>(s);
    }
  }
}

std::vector<float> transpose(std::span<const float> a, uint32_t d) {
  std::vector<float> out(static_cast<size_t>(d) * d);
  for (uint32_t i = 0; i < d; ++i)
    for (uint32_t j = 0; j < d; ++j) out[j * d + i] = a[i * d + j];
  return out;
}

// Orthogonal polar factor of m via Newton-Schulz iteration. Requires the
// scaled matrix's singular values in (0, sqrt(3)); scaling by the Frobenius
// norm guarantees the upper bound.
std::vector<float> polar_orthogonal(std::vector<float> m, uint32_t d) {
  double fro = 0.0;
  for (float v : m) fro += static_cast<double>(v) * v;
  fro = std::sqrt(fro);
  if (fro <= 0.0) raise(ErrorCode::invalid_argument, "degenerate rotation solve");
  for (float& v : m) v = static_cast<float>(v / fro);

  std::vector<float> x = std::move(m);
  std::vector<float> xtx(static_cast<size_t>(d) * d), tmp(static_cast<size_t>(d) * d);
  for (int iter = 0; iter < 64; ++iter) {
    auto xt = transpose(x, d);
    matmul(xt, x, xtx, d);
    double err = 0.0;
    for (uint32_t i = 0; i < d; ++i)
      for (uint32_t j = 0; j < d; ++j) {
        double e = xtx[i * d + j] - (i == j ? 1.0 : 0.0);
        err += e * e;
      }
    if (err < 1e-12) break;
    // x <- x * (3I - x^T x) / 2
    for (uint32_t i = 0; i < d; ++i)
      for (uint32_t j = 0; j < d; ++j)
        xtx[i * d + j] = (i == j ? 3.0f : 0.0f) - xtx[i * d + j];
    matmul(x, xtx, tmp, d);
    for (auto& v : tmp) v *= 0.5f;
    x.swap(tmp);
  }
  return x;
}

void apply_rotation(std::span<const float> r, std::span<const float> v, std::span<float> out,
                    uint32_t d) {
  for (uint32_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (uint32_t j = 0; j < d; ++j)
      s += static_cast<double>(r[i * d + j]) * static_cast<double>(v[j]);
    out[i] = static_cast<float>(s);
  }
}

std::vector<float> rotate_all(const VectorDataset& ds, std::span<const float> r) {
  std::vector<float> out(ds.data.size());
  for (size_t i = 0; i < ds.count(); ++i)
    apply_rotation(r, ds.vec(i), std::span<float>(out.data() + i * ds.dim, ds.dim), ds.dim);
  return out;
}

Codebook train_plain(std::span<const float> data, size_t n, uint32_t dim,
                     const PqTrainParams& params) {
  Codebook cb;
  cb.dim = dim;
  cb.m = params.m;
  cb.k = 256;
  cb.subdim = dim / params.m;
  cb.centroids.resize(static_cast<size_t>(cb.m) * cb.k * cb.subdim);

  auto train_sub = [&](uint32_t sub) {
    std::vector<float> slice(n * cb.subdim);
    for (size_t i = 0; i < n; ++i)
      std::memcpy(slice.data() + i * cb.subdim,
                  data.data() + i * dim + static_cast<size_t>(sub) * cb.subdim,
                  cb.subdim * sizeof(float));
    auto km = kmeans(slice, n, cb.subdim, cb.k, params.iters, params.seed + sub);
    std::memcpy(cb.centroids.data() + static_cast<size_t>(sub) * cb.k * cb.subdim,
                km.centroids.data(), km.centroids.size() * sizeof(float));
  };

  // Subspaces are independent; per-subspace seeds keep the result identical
  // regardless of thread count.
  if (params.threads > 1) {
    std::vector<std::future<void>> futs;
    for (uint32_t sub = 0; sub < cb.m; ++sub)
      futs.push_back(std::async(std::launch::async, train_sub, sub));
    for (auto& f : futs) f.get();
  } else {
    for (uint32_t sub = 0; sub < cb.m; ++sub) train_sub(sub);
  }
  return cb;
}

void encode_into(std::span<const float> v, const Codebook& cb, uint8_t* out) {
  for (uint32_t sub = 0; sub < cb.m; ++sub) {
    auto sv = v.subspan(static_cast<size_t>(sub) * cb.subdim, cb.subdim);
    uint32_t best = 0;
    float best_d = std::numeric_limits<float>::max();
    for (uint32_t c = 0; c < cb.k; ++c) {
      float d = l2_sq(sv, cb.centroid(sub, c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out[sub] = static_cast<uint8_t>(best);
  }
}

}  // namespace

void Codebook::validate() const {
  if (m == 0 || dim == 0 || subdim == 0 || dim != m * subdim)
    raise(ErrorCode::bad_format, "codebook requires dim = m * subdim");
  if (k != 256) raise(ErrorCode::bad_format, "codebook requires k = 256");
  if (centroids.size() != static_cast<size_t>(m) * k * subdim)
    raise(ErrorCode::bad_format, "codebook centroid storage size mismatch");
  if (!rotation.empty()) {
    if (rotation.size() != static_cast<size_t>(dim) * dim)
      raise(ErrorCode::bad_format, "rotation must be dim x dim");
    // R^T R = I to 1e-4
    for (uint32_t i = 0; i < dim; ++i) {
      for (uint32_t j = i; j < dim; ++j) {
        double s = 0.0;
        for (uint32_t r = 0; r < dim; ++r)
          s += static_cast<double>(rotation[r * dim + i]) *
               static_cast<double>(rotation[r * dim + j]);
        double want = (i == j) ? 1.0 : 0.0;
        if (std::abs(s - want) > 1e-4)
          raise(ErrorCode::bad_format, "rotation is not orthogonal");
      }
    }
  }
}

Codebook train_codebooks(const VectorDataset& sample, const PqTrainParams& params) {
  if (params.m == 0 || sample.dim % params.m != 0)
    raise(ErrorCode::invalid_argument, "dim must be divisible by M");
  if (sample.count() < 256)
    raise(ErrorCode::invalid_argument, "need at least 256 training vectors");

  if (!params.opq) {
    auto cb = train_plain(sample.data, sample.count(), sample.dim, params);
    cb.validate();
    return cb;
  }

  // OPQ: alternate between quantizing the rotated data and re-solving the
  // rotation as the orthogonal Procrustes fit of originals onto their
  // rotated-space reconstructions.
  uint32_t d = sample.dim;
  std::vector<float> r(static_cast<size_t>(d) * d, 0.0f);
  for (uint32_t i = 0; i < d; ++i) r[i * d + i] = 1.0f;

  PqTrainParams inner = params;
  inner.opq = false;
  Codebook cb;
  for (uint32_t round = 0; round < std::max<uint32_t>(params.opq_iters, 1); ++round) {
    auto rotated = rotate_all(sample, r);
    cb = train_plain(rotated, sample.count(), d, inner);
    // M = sum_i y_i x_i^T with y the rotated-space reconstruction
    std::vector<float> corr(static_cast<size_t>(d) * d, 0.0f);
    std::vector<uint8_t> code(cb.m);
    std::vector<float> y(d);
    for (size_t i = 0; i < sample.count(); ++i) {
      auto xr = std::span<const float>(rotated.data() + i * d, d);
      encode_into(xr, cb, code.data());
      for (uint32_t sub = 0; sub < cb.m; ++sub) {
        auto c = cb.centroid(sub, code[sub]);
        std::memcpy(y.data() + static_cast<size_t>(sub) * cb.subdim, c.data(),
                    cb.subdim * sizeof(float));
      }
      auto x = sample.vec(i);
      for (uint32_t a = 0; a < d; ++a)
        for (uint32_t b = 0; b < d; ++b) corr[a * d + b] += y[a] * x[b];
    }
    r = polar_orthogonal(std::move(corr), d);
  }
  auto rotated = rotate_all(sample, r);
  cb = train_plain(rotated, sample.count(), d, inner);
  cb.rotation = std::move(r);
  cb.validate();
  return cb;
}

Codebook train_codebooks(const VectorDataset& sample, uint32_t m, uint32_t iters,
                         uint64_t seed) {
  PqTrainParams p;
  p.m = m;
  p.iters = iters;
  p.seed = seed;
  return train_codebooks(sample, p);
}

Code encode(std::span<const float> v, const Codebook& cb) {
  if (v.size() != cb.dim) raise(ErrorCode::dim_mismatch, "encode input dim != codebook dim");
  Code code(cb.m);
  if (cb.has_rotation()) {
    std::vector<float> rotated(cb.dim);
    apply_rotation(cb.rotation, v, rotated, cb.dim);
    encode_into(rotated, cb, code.data());
  } else {
    encode_into(v, cb, code.data());
  }
  return code;
}

std::vector<float> reconstruct(std::span<const uint8_t> code, const Codebook& cb) {
  if (code.size() != cb.m) raise(ErrorCode::dim_mismatch, "code length != codebook m");
  std::vector<float> y(cb.dim);
  for (uint32_t sub = 0; sub < cb.m; ++sub) {
    auto c = cb.centroid(sub, code[sub]);
    std::memcpy(y.data() + static_cast<size_t>(sub) * cb.subdim, c.data(),
                cb.subdim * sizeof(float));
  }
  if (!cb.has_rotation()) return y;
  // inverse of an orthogonal rotation is its transpose
  std::vector<float> out(cb.dim);
  for (uint32_t i = 0; i < cb.dim; ++i) {
    double s = 0.0;
    for (uint32_t j = 0; j < cb.dim; ++j)
      s += static_cast<double>(cb.rotation[j * cb.dim + i]) * static_cast<double>(y[j]);
    out[i] = static_cast<float>(s);
  }
  return out;
}

CodeSet encode_dataset(const VectorDataset& ds, const Codebook& cb, uint32_t threads) {
  if (ds.dim != cb.dim) raise(ErrorCode::dim_mismatch, "dataset dim != codebook dim");
  CodeSet cs;
  cs.m = cb.m;
  cs.bytes.resize(ds.count() * cb.m);

  auto encode_range = [&](size_t lo, size_t hi) {
    std::vector<float> rotated(cb.dim);
    for (size_t i = lo; i < hi; ++i) {
      if (cb.has_rotation()) {
        apply_rotation(cb.rotation, ds.vec(i), rotated, cb.dim);
        encode_into(rotated, cb, cs.bytes.data() + i * cb.m);
      } else {
        encode_into(ds.vec(i), cb, cs.bytes.data() + i * cb.m);
      }
    }
  };

  if (threads > 1 && ds.count() > 4096) {
    size_t per = (ds.count() + threads - 1) / threads;
    std::vector<std::future<void>> futs;
    for (uint32_t t = 0; t < threads; ++t) {
      size_t lo = static_cast<size_t>(t) * per, hi = std::min(ds.count(), lo + per);
      if (lo >= hi) break;
      futs.push_back(std::async(std::launch::async, encode_range, lo, hi));
    }
    for (auto& f : futs) f.get();
  } else {
    encode_range(0, ds.count());
  }
  return cs;
}

double quantization_mse(const VectorDataset& ds, const Codebook& cb) {
  double total = 0.0;
  for (size_t i = 0; i < ds.count(); ++i) {
    auto code = encode(ds.vec(i), cb);
    auto y = reconstruct(code, cb);
    total += l2_sq(ds.vec(i), y);
  }
  return total / static_cast<double>(ds.count());
}

SdcTable build_sdc_table(const Codebook& cb) {
  cb.validate();
  SdcTable t;
  t.m = cb.m;
  t.vals.resize(static_cast<size_t>(cb.m) * 256 * 256);
  for (uint32_t sub = 0; sub < cb.m; ++sub) {
    float* block = t.vals.data() + static_cast<size_t>(sub) * 256 * 256;
    for (uint32_t i = 0; i < 256; ++i) {
      block[i * 256 + i] = 0.0f;
      for (uint32_t j = i + 1; j < 256; ++j) {
        float d = l2_sq(cb.centroid(sub, i), cb.centroid(sub, j));
        block[i * 256 + j] = d;
        block[j * 256 + i] = d;
      }
    }
  }
  return t;
}

void write_codebook(const std::string& path, const Codebook& cb) {
  cb.validate();
  auto out = io::open_out(path);
  io::put_magic(out, kPqMagic);
  io::put_u32(out, cb.dim);
  io::put_u32(out, cb.m);
  io::put_u32(out, cb.k);
  io::put_u8(out, cb.has_rotation() ? 1 : 0);
  if (cb.has_rotation()) io::put_f32_array(out, cb.rotation);
  io::put_f32_array(out, cb.centroids);
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

Codebook read_codebook(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kPqMagic, "codebook");
  Codebook cb;
  cb.dim = io::get_u32(in);
  cb.m = io::get_u32(in);
  cb.k = io::get_u32(in);
  if (cb.m == 0 || cb.dim == 0 || cb.dim % cb.m != 0)
    raise(ErrorCode::bad_format, "codebook header is inconsistent");
  cb.subdim = cb.dim / cb.m;
  uint8_t has_rot = io::get_u8(in);
  if (has_rot > 1) raise(ErrorCode::bad_format, "bad rotation flag");
  if (has_rot) {
    cb.rotation.resize(static_cast<size_t>(cb.dim) * cb.dim);
    io::get_f32_array(in, cb.rotation);
  }
  cb.centroids.resize(static_cast<size_t>(cb.m) * cb.k * cb.subdim);
  io::get_f32_array(in, cb.centroids);
  cb.validate();
  return cb;
}

}  // namespace dann

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

#include "dann/dataset.hpp"

#include <unordered_set>

#include "io_util.hpp"

namespace dann {

namespace {
constexpr char kVecMagic[8] = {'D', 'A', 'N', 'N', 'V', 'E', 'C', '1'};
constexpr uint8_t kDtypeF32 = 0;
}  // namespace

void VectorDataset::validate() const {
  if (dim == 0) raise(ErrorCode::bad_format, "dataset dim must be positive");
  if (data.size() != ids.size() * dim)
    raise(ErrorCode::bad_format, "dataset data length != count * dim");
  std::unordered_set<uint64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) raise(ErrorCode::bad_format, "dataset ids are not unique");
}

VectorDataset make_dataset(uint32_t dim, std::vector<float> data, std::vector<uint64_t> ids) {
  VectorDataset ds;
  ds.dim = dim;
  ds.data = std::move(data);
  if (ids.empty() && !ds.data.empty()) {
    if (dim == 0) raise(ErrorCode::bad_format, "dataset dim must be positive");
    ids.resize(ds.data.size() / dim);
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }
  ds.ids = std::move(ids);
  ds.validate();
  return ds;
}

void write_vectors(const std::string& path, const VectorDataset& ds) {
  ds.validate();
  auto out = io::open_out(path);
  io::put_magic(out, kVecMagic);
  io::put_u32(out, ds.dim);
  io::put_u64(out, ds.count());
  io::put_u8(out, kDtypeF32);
  for (int i = 0; i < 7; ++i) io::put_u8(out, 0);
  io::put_u64_array(out, ds.ids);
  io::put_f32_array(out, ds.data);
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

VectorDataset read_vectors(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kVecMagic, "vector");
  VectorDataset ds;
  ds.dim = io::get_u32(in);
  if (ds.dim == 0) raise(ErrorCode::bad_format, "vector file has dim=0");
  uint64_t count = io::get_u64(in);
  uint8_t dtype = io::get_u8(in);
  if (dtype != kDtypeF32) raise(ErrorCode::bad_format, "unsupported dtype byte");
  in.ignore(7);
  ds.ids.resize(count);
  io::get_u64_array(in, ds.ids);
  ds.data.resize(count * ds.dim);
  io::get_f32_array(in, ds.data);
  ds.validate();
  return ds;
}

}  // namespace dann

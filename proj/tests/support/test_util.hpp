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

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "dann/common.hpp"
#include "dann/dataset.hpp"

namespace dann::test {

inline VectorDataset random_dataset(size_t n, uint32_t dim, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> data(n * dim);
  for (auto& x : data) x = static_cast<float>(rng.normal() * scale);
  return make_dataset(dim, std::move(data));
}

inline std::vector<float> random_vec(uint32_t dim, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

/// Unique temp path; removed-on-best-effort by TempFile below.
inline std::string tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path();
  return (dir / ("dann_test_" + std::to_string(::getpid()) + "_" + name)).string();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path(tmp_path(name)) {}
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

}  // namespace dann::test

// Copyright 2026 The latesearch Authors.
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

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "late/core.hpp"

namespace late::testing {

inline Matrix random_unit_rows(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    Matrix m(rows, dim);
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0;
        for (auto& v : m.row(i)) {
            v = g(rng);
            sq += double(v) * v;
        }
        for (auto& v : m.row(i)) {
            v = float(v / std::sqrt(sq));
        }
    }
    return m;
}

inline Matrix basis_rows(std::initializer_list<std::size_t> axes, std::size_t dim) {
    Matrix m(axes.size(), dim);
    std::size_t i = 0;
    for (auto a : axes) {
        m(i++, a) = 1.0f;
    }
    return m;
}

/// Scratch directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("late_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept {
        return path_;
    }
    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

  private:
    std::filesystem::path path_;
};

} // namespace late::testing

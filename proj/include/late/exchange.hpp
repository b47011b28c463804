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

// Embedding-exchange files carry bags of embeddings produced elsewhere.
//
// Layout (little-endian):
//   "LSEMB1" | u32 dim | u8 dtype (0 = f32, 1 = f16) | u64 record count
//   per record: u64 id length | id bytes (UTF-8) | u32 rows | rows x dim values

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "late/core.hpp"

namespace late {

enum class Dtype : std::uint8_t { F32 = 0, F16 = 1 };

/// Norm tolerance applied to f16 exchange files under Cosine; a unit vector
/// rounded to half precision is off by up to ~dim * 2^-11 in squared norm.
inline constexpr double kHalfNormTolerance = 2e-3;

struct EmbeddingRecord {
    std::string id;
    Matrix embeddings;
};

void write_exchange(
        const std::filesystem::path& path,
        std::span<const EmbeddingRecord> records,
        std::size_t dim,
        Dtype dtype = Dtype::F32);

/// Streams records in file order, validating each as it is read.
class ExchangeReader {
  public:
    ExchangeReader(const std::filesystem::path& path, std::size_t expected_dim, Metric metric);

    std::optional<EmbeddingRecord> next();

    std::uint64_t record_count() const noexcept {
        return count_;
    }
    Dtype dtype() const noexcept {
        return dtype_;
    }

  private:
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string source_;
    std::size_t dim_ = 0;
    Metric metric_;
    Dtype dtype_ = Dtype::F32;
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
};

std::vector<DocRepresentation> load_precomputed_docs(
        const std::filesystem::path& path,
        std::size_t dim,
        Metric metric);
std::vector<QueryRepresentation> load_precomputed_queries(
        const std::filesystem::path& path,
        std::size_t dim,
        Metric metric);

std::vector<EmbeddingRecord> to_records(std::span<const DocRepresentation> docs);
std::vector<EmbeddingRecord> to_records(std::span<const QueryRepresentation> queries);

} // namespace late

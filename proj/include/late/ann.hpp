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

// Inverted-file index with product quantization (IVF-PQ) over single
// embedding vectors. Distances inside this module are squared L2; on unit
// vectors that orders results the same way as cosine similarity.
//
// ivfpq.bin layout (little-endian):
//   "LSIVFPQ1" | u32 version | u32 P | u32 default probes | u32 s | u32 m
//   | u8 metric | u64 seed
//   | P x m f32 centroids | s x 256 x (m/s) f32 codewords
//   | u64 vectors | per cell: u32 length, then length x (u32 ordinal, s bytes)
//   | u32 CRC32

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "late/core.hpp"

namespace late {

class EmbeddingIndex;

struct AnnConfig {
    std::size_t partitions = 2000;  // P
    std::size_t probes = 10;        // p
    std::size_t subvectors = 16;    // s
    std::size_t kmeans_iters = 20;
    std::size_t train_sample = 0;   // 0 means 256 * P
    std::uint64_t seed = 0;

    std::size_t sample_size() const noexcept {
        return train_sample ? train_sample : 256 * partitions;
    }
    void validate(std::size_t dim) const;
};

struct KMeansResult {
    Matrix centroids;
    std::vector<std::uint32_t> assignment;
    /// Total within-cluster squared error after each assignment step.
    std::vector<double> sse_history;
};

/// k-means++ seeding followed by Lloyd iterations. Stops early once no
/// assignment changes. A cluster that empties is re-seeded with the point
/// farthest from its centroid in the currently largest cluster.
KMeansResult kmeans(const Matrix& vectors, std::size_t k, std::size_t iters, std::uint64_t seed);

/// Up to n rows drawn without replacement, in ascending row order.
Matrix sample_rows(std::span<const float> rows, std::size_t dim, std::size_t n, std::uint64_t seed);

class ProductQuantizer {
  public:
    static constexpr std::size_t kCodewords = 256;

    ProductQuantizer() = default;
    ProductQuantizer(std::size_t dim, std::size_t subvectors, std::vector<float> codebooks);

    /// Independent 256-way k-means in each sub-space.
    static ProductQuantizer train(
            const Matrix& vectors,
            std::size_t subvectors,
            std::size_t iters,
            std::uint64_t seed);

    std::size_t dim() const noexcept {
        return dim_;
    }
    std::size_t subvectors() const noexcept {
        return subvectors_;
    }
    std::size_t sub_dim() const noexcept {
        return sub_dim_;
    }
    std::span<const float> codeword(std::size_t sub, std::size_t code) const noexcept {
        return {codebooks_.data() + (sub * kCodewords + code) * sub_dim_, sub_dim_};
    }
    const std::vector<float>& codebooks() const noexcept {
        return codebooks_;
    }

    /// Nearest codeword per sub-space (lowest code on ties).
    std::vector<std::uint8_t> encode(std::span<const float> v) const;
    void encode_into(std::span<const float> v, std::uint8_t* out) const;
    std::vector<float> reconstruct(std::span<const std::uint8_t> code) const;

    /// table[j * 256 + c] = squared distance from query sub-vector j to codeword c.
    std::vector<double> distance_table(std::span<const float> query) const;

  private:
    std::size_t dim_ = 0;
    std::size_t subvectors_ = 0;
    std::size_t sub_dim_ = 0;
    std::vector<float> codebooks_;
};

struct AnnHit {
    std::uint32_t ordinal = 0;
    double distance = 0;

    bool operator==(const AnnHit&) const = default;
};

class IvfPqIndex {
  public:
    /// Untrained; add() and search() throw.
    IvfPqIndex() = default;
    IvfPqIndex(Matrix centroids, ProductQuantizer pq, Metric metric, AnnConfig cfg);

    /// Coarse quantizer and codebooks from a training sample.
    static IvfPqIndex train(const Matrix& sample, const AnnConfig& cfg, Metric metric);

    /// Appends `vec` to the list of its nearest centroid.
    void add(std::uint32_t ordinal, std::span<const float> vec);
    /// Adds rows as ordinals first, first + 1, ...
    void add_rows(std::span<const float> rows, std::uint32_t first);

    /// Nearest k_prime stored vectors by asymmetric distance, scanning the
    /// `probes` cells whose centroids are nearest. Sorted by distance, then
    /// ordinal.
    std::vector<AnnHit> search(std::span<const float> query, std::size_t k_prime, std::size_t probes) const;
    std::vector<AnnHit> search(std::span<const float> query, std::size_t k_prime) const {
        return search(query, k_prime, cfg_.probes);
    }

    /// Cells in order of centroid distance, ties to the lower cell.
    std::vector<std::uint32_t> nearest_cells(std::span<const float> query, std::size_t n) const;

    std::size_t partitions() const noexcept {
        return centroids_.rows();
    }
    std::size_t dim() const noexcept {
        return centroids_.cols();
    }
    std::size_t size() const noexcept {
        return count_;
    }
    Metric metric() const noexcept {
        return metric_;
    }
    const AnnConfig& config() const noexcept {
        return cfg_;
    }
    const Matrix& centroids() const noexcept {
        return centroids_;
    }
    const ProductQuantizer& quantizer() const noexcept {
        return pq_;
    }
    std::span<const std::uint32_t> list_ordinals(std::size_t cell) const noexcept {
        return lists_[cell].ordinals;
    }
    std::span<const std::uint8_t> list_codes(std::size_t cell) const noexcept {
        return lists_[cell].codes;
    }

    void save(const std::filesystem::path& path) const;
    static IvfPqIndex load(const std::filesystem::path& path);

  private:
    struct InvertedList {
        std::vector<std::uint32_t> ordinals;
        std::vector<std::uint8_t> codes; // ordinals.size() x s
    };

    Matrix centroids_;
    ProductQuantizer pq_;
    Metric metric_ = Metric::Cosine;
    AnnConfig cfg_;
    std::vector<InvertedList> lists_;
    std::vector<bool> present_;
    std::size_t count_ = 0;
};

/// Trains on a seeded sample of the index's embeddings and adds all of them.
IvfPqIndex build_ivfpq(const EmbeddingIndex& index, const AnnConfig& cfg);

/// Exhaustive scan. Distance is the negated similarity under `metric`
/// (squared L2 for NegSquaredL2). Same ordering rule as IvfPqIndex::search.
std::vector<AnnHit> exact_flat_search(
        std::span<const float> rows,
        std::size_t dim,
        std::span<const float> query,
        std::size_t k_prime,
        Metric metric);

} // namespace late

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

// On-disk embedding index.
//
// Directory layout, every file checksummed:
//   manifest.json  JSON, final line "#crc32 xxxxxxxx"
//   doclens.bin    u32 count | u32 rows per doc         | u32 CRC32
//   payload.bin    f32 or f16 values, rows in doc order | u32 CRC32
//   emb2doc.bin    u64 count | u32 doc ordinal per row  | u32 CRC32
//   docids.tsv     "ordinal \t doc_id" lines, then the checksum line
//   skipped.tsv    "doc_id \t reason" lines, then the checksum line

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "late/encoder.hpp"

namespace late {

struct IndexerConfig {
    std::size_t group_size = 100000; // B
    std::size_t batch_size = 128;    // b
    std::size_t bytes_per_dim = 4;   // 4 = f32, 2 = f16
    std::size_t worker_count = 1;

    void validate() const;
};

/// One padded encoding batch; members index into the group.
struct LengthBatch {
    std::vector<std::size_t> members;
    std::size_t padded_width = 0;
};

/// Stable sort of the group by token length, then chunks of at most
/// batch_size, each padded to its own longest member.
std::vector<LengthBatch> bucket_batches(std::span<const std::size_t> lengths, std::size_t batch_size);

/// Chunks in the original order; the baseline bucketing is compared with.
std::vector<LengthBatch> sequential_batches(
        std::span<const std::size_t> lengths,
        std::size_t batch_size);

/// Padded cells minus real cells.
std::size_t padding_waste(std::span<const LengthBatch> batches, std::span<const std::size_t> lengths);

struct CorpusDoc {
    std::string id;
    std::string text;
};

/// Reads `doc_id \t text` lines.
std::vector<CorpusDoc> read_corpus(const std::filesystem::path& path);

struct IndexManifest {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::size_t dim = 0;
    Metric metric = Metric::Cosine;
    std::size_t bytes_per_dim = 4;
    std::uint64_t doc_count = 0;
    std::uint64_t embedding_count = 0;
    std::uint64_t skipped_count = 0;
    /// Present when the index was built from text.
    std::optional<EncoderConfig> encoder;
};

struct SkippedDoc {
    std::string id;
    std::string reason;
};

/// Serializes documents in the order they are added. Single writer.
class IndexWriter {
  public:
    IndexWriter(
            std::filesystem::path dir,
            std::size_t dim,
            Metric metric,
            std::size_t bytes_per_dim,
            std::optional<EncoderConfig> encoder = std::nullopt);
    ~IndexWriter();
    IndexWriter(const IndexWriter&) = delete;
    IndexWriter& operator=(const IndexWriter&) = delete;

    void add(const DocRepresentation& doc);
    void skip(std::string doc_id, std::string reason);
    IndexManifest finish();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct BuildStats {
    std::uint64_t indexed = 0;
    std::vector<SkippedDoc> skipped;
    std::size_t padded_cells = 0;
    std::size_t real_cells = 0;
};

using BuildProgress = std::function<void(std::uint64_t docs_done)>;

/// Encodes the corpus group by group. Within a group, documents are bucketed
/// by length and encoded in parallel; the results are then written in corpus
/// order. Documents with no content rows are skipped and listed.
BuildStats build_index(
        std::span<const CorpusDoc> corpus,
        const Encoder& encoder,
        const IndexerConfig& cfg,
        const std::filesystem::path& out_dir,
        const BuildProgress& progress = {});

/// Writes already-encoded documents as an index, none skipped.
IndexManifest write_index(
        std::span<const DocRepresentation> docs,
        std::size_t dim,
        Metric metric,
        std::size_t bytes_per_dim,
        const std::filesystem::path& out_dir);

/// Read view, fully loaded into memory; f16 payloads are widened to f32.
class EmbeddingIndex {
  public:
    static EmbeddingIndex open(const std::filesystem::path& dir);

    const IndexManifest& manifest() const noexcept {
        return manifest_;
    }
    std::size_t dim() const noexcept {
        return manifest_.dim;
    }
    Metric metric() const noexcept {
        return manifest_.metric;
    }
    std::size_t doc_count() const noexcept {
        return doclens_.size();
    }
    std::size_t embedding_count() const noexcept {
        return emb2doc_.size();
    }

    std::span<const std::uint32_t> doclens() const noexcept {
        return doclens_;
    }
    std::span<const std::uint32_t> emb2doc() const noexcept {
        return emb2doc_;
    }
    /// All rows, embedding_count x dim.
    std::span<const float> embeddings() const noexcept {
        return payload_;
    }
    std::span<const float> embedding(std::size_t e) const {
        return std::span<const float>(payload_).subspan(e * dim(), dim());
    }
    /// Rows of one document, length x dim.
    std::span<const float> doc_rows(std::size_t ordinal) const;
    Matrix doc_matrix(std::size_t ordinal) const;
    DocRepresentation doc(std::size_t ordinal) const;

    const std::string& doc_id(std::size_t ordinal) const;
    std::optional<std::uint32_t> ordinal_of(const std::string& doc_id) const;
    const std::vector<SkippedDoc>& skipped() const noexcept {
        return skipped_;
    }

    const std::filesystem::path& dir() const noexcept {
        return dir_;
    }

  private:
    std::filesystem::path dir_;
    IndexManifest manifest_;
    std::vector<std::uint32_t> doclens_;
    std::vector<std::uint64_t> offsets_; // first row of each doc
    std::vector<std::uint32_t> emb2doc_;
    std::vector<float> payload_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> ordinals_;
    std::vector<SkippedDoc> skipped_;
};

/// Names of the files that make up an index directory.
std::span<const std::string_view> index_files();

/// Exact byte size of all index files on disk.
std::uint64_t footprint(const std::filesystem::path& dir);
std::uint64_t footprint(const EmbeddingIndex& index);

/// Bytes of the payload body alone.
constexpr std::uint64_t payload_bytes(
        std::uint64_t embeddings,
        std::size_t dim,
        std::size_t bytes_per_dim) noexcept {
    return embeddings * dim * bytes_per_dim;
}

/// Back-of-envelope size for a collection that is not materialized:
/// payload plus one u32 length per document.
constexpr std::uint64_t estimated_rerank_bytes(
        std::uint64_t docs,
        double mean_rows_per_doc,
        std::size_t dim,
        std::size_t bytes_per_dim) noexcept {
    const auto rows = static_cast<std::uint64_t>(double(docs) * mean_rows_per_doc + 0.5);
    return payload_bytes(rows, dim, bytes_per_dim) + 4 * docs;
}

std::string manifest_json(const IndexManifest& m);
IndexManifest parse_manifest(std::string_view json, const std::string& source);

} // namespace late

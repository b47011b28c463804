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

#include "late/exchange.hpp"

#include <cmath>

#include "late/binary_io.hpp"
#include "late/half.hpp"

namespace late {

namespace {
constexpr std::string_view kMagic = "LSEMB1";
} // namespace

void write_exchange(
        const std::filesystem::path& path,
        std::span<const EmbeddingRecord> records,
        std::size_t dim,
        Dtype dtype) {
    io::ByteWriter w;
    w.raw(kMagic);
    w.u32(std::uint32_t(dim));
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u64(records.size());
    for (const auto& rec : records) {
        LATE_REQUIRE(
                rec.embeddings.rows() == 0 || rec.embeddings.cols() == dim,
                DimensionMismatch,
                "record '" + rec.id + "' has width " + std::to_string(rec.embeddings.cols()));
        w.u64(rec.id.size());
        w.raw(rec.id);
        w.u32(std::uint32_t(rec.embeddings.rows()));
        for (float v : rec.embeddings.data()) {
            if (dtype == Dtype::F16) {
                w.u16(float_to_half(v));
            } else {
                w.f32(v);
            }
        }
    }
    io::write_file(path, w.bytes());
}

ExchangeReader::ExchangeReader(
        const std::filesystem::path& path,
        std::size_t expected_dim,
        Metric metric)
        : bytes_(io::read_file(path)), source_(path.string()), dim_(expected_dim), metric_(metric) {
    io::ByteReader r(bytes_, source_);
    if (r.remaining() < kMagic.size() || r.str(kMagic.size()) != kMagic) {
        r.fail(ErrorKind::MalformedFile, "bad magic, expected LSEMB1");
    }
    const std::uint32_t dim = r.u32();
    if (dim != expected_dim) {
        r.fail(ErrorKind::DimensionMismatch,
               "file dim " + std::to_string(dim) + " but engine is configured for " +
                       std::to_string(expected_dim));
    }
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) {
        r.fail(ErrorKind::MalformedFile, "unknown dtype " + std::to_string(dtype));
    }
    dtype_ = static_cast<Dtype>(dtype);
    count_ = r.u64();
    pos_ = r.offset();
}

std::optional<EmbeddingRecord> ExchangeReader::next() {
    if (read_ == count_) {
        if (pos_ != bytes_.size()) {
            throw Error(
                    ErrorKind::MalformedFile,
                    source_ + " @" + std::to_string(pos_) + ": trailing bytes after last record");
        }
        return std::nullopt;
    }
    io::ByteReader r(std::span<const std::uint8_t>(bytes_).subspan(pos_), source_);
    auto fail = [&](ErrorKind kind, const std::string& what) {
        throw Error(kind, source_ + " @" + std::to_string(pos_ + r.offset()) + ": " + what);
    };

    EmbeddingRecord rec;
    const std::uint64_t id_len = r.u64();
    if (id_len > r.remaining()) {
        fail(ErrorKind::MalformedFile, "id length exceeds file size");
    }
    rec.id = r.str(id_len);
    const std::uint32_t rows = r.u32();
    const std::size_t width = dtype_ == Dtype::F16 ? 2 : 4;
    if (std::uint64_t(rows) * dim_ * width > r.remaining()) {
        fail(ErrorKind::MalformedFile,
             "truncated record '" + rec.id + "' (" + std::to_string(rows) + " rows)");
    }
    std::vector<float> values(std::size_t(rows) * dim_);
    for (float& v : values) {
        v = dtype_ == Dtype::F16 ? half_to_float(r.u16()) : r.f32();
        if (!std::isfinite(v)) {
            fail(ErrorKind::NonFinite, "non-finite value in record '" + rec.id + "'");
        }
    }
    rec.embeddings = Matrix(rows, dim_, std::move(values));
    try {
        validate_embeddings(
                rec.embeddings,
                dim_,
                metric_,
                dtype_ == Dtype::F16 ? kHalfNormTolerance : kUnitNormTolerance);
    } catch (const Error& e) {
        fail(e.kind(), "record '" + rec.id + "': " + e.what());
    }
    pos_ += r.offset();
    ++read_;
    return rec;
}

std::vector<DocRepresentation> load_precomputed_docs(
        const std::filesystem::path& path,
        std::size_t dim,
        Metric metric) {
    ExchangeReader reader(path, dim, metric);
    std::vector<DocRepresentation> out;
    while (auto rec = reader.next()) {
        const std::size_t rows = rec->embeddings.rows();
        out.push_back({std::move(rec->id), std::move(rec->embeddings), rows});
    }
    return out;
}

std::vector<QueryRepresentation> load_precomputed_queries(
        const std::filesystem::path& path,
        std::size_t dim,
        Metric metric) {
    ExchangeReader reader(path, dim, metric);
    std::vector<QueryRepresentation> out;
    while (auto rec = reader.next()) {
        out.push_back({std::move(rec->id), std::move(rec->embeddings)});
    }
    return out;
}

std::vector<EmbeddingRecord> to_records(std::span<const DocRepresentation> docs) {
    std::vector<EmbeddingRecord> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
        out.push_back({d.doc_id, d.embeddings});
    }
    return out;
}

std::vector<EmbeddingRecord> to_records(std::span<const QueryRepresentation> queries) {
    std::vector<EmbeddingRecord> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        out.push_back({q.query_id, q.embeddings});
    }
    return out;
}

} // namespace late

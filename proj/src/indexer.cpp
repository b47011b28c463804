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

#include "late/indexer.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "late/binary_io.hpp"
#include "late/half.hpp"

namespace late {

using nlohmann::json;

void IndexerConfig::validate() const {
    LATE_REQUIRE(group_size > 0, InvalidArgument, "group_size must be positive");
    LATE_REQUIRE(batch_size > 0, InvalidArgument, "batch_size must be positive");
    LATE_REQUIRE(batch_size <= group_size, InvalidArgument, "batch_size must not exceed group_size");
    LATE_REQUIRE(bytes_per_dim == 2 || bytes_per_dim == 4, InvalidArgument,
                 "bytes_per_dim must be 2 or 4");
    LATE_REQUIRE(worker_count > 0, InvalidArgument, "worker_count must be positive");
}

namespace {

std::vector<LengthBatch> chunk(
        const std::vector<std::size_t>& order,
        std::span<const std::size_t> lengths,
        std::size_t batch_size) {
    LATE_REQUIRE(batch_size > 0, InvalidArgument, "batch_size must be positive");
    std::vector<LengthBatch> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        LengthBatch b;
        const std::size_t end = std::min(order.size(), i + batch_size);
        b.members.assign(order.begin() + std::ptrdiff_t(i), order.begin() + std::ptrdiff_t(end));
        for (auto m : b.members) {
            b.padded_width = std::max(b.padded_width, lengths[m]);
        }
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace

std::vector<LengthBatch> bucket_batches(std::span<const std::size_t> lengths, std::size_t batch_size) {
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
    return chunk(order, lengths, batch_size);
}

std::vector<LengthBatch> sequential_batches(
        std::span<const std::size_t> lengths,
        std::size_t batch_size) {
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    return chunk(order, lengths, batch_size);
}

std::size_t padding_waste(std::span<const LengthBatch> batches, std::span<const std::size_t> lengths) {
    std::size_t waste = 0;
    for (const auto& b : batches) {
        for (auto m : b.members) {
            waste += b.padded_width - lengths[m];
        }
    }
    return waste;
}

std::vector<CorpusDoc> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<CorpusDoc> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw Error(ErrorKind::Data,
                        path.string() + ":" + std::to_string(lineno) + ": expected doc_id<TAB>text");
        }
        out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

json encoder_to_json(const EncoderConfig& c) {
    return {
            {"query_len", c.query_len},
            {"dim", c.dim},
            {"base_dim", c.base_dim},
            {"context_window", c.context_window},
            {"max_doc_len", c.max_doc_len},
            {"metric", std::string(to_string(c.metric))},
            {"punctuation", c.punctuation},
            {"seed", c.seed},
            {"vocab_buckets", c.vocab_buckets},
    };
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig c;
    c.query_len = j.at("query_len").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.base_dim = j.at("base_dim").get<std::size_t>();
    c.context_window = j.at("context_window").get<std::size_t>();
    c.max_doc_len = j.at("max_doc_len").get<std::size_t>();
    c.metric = parse_metric(j.at("metric").get<std::string>());
    c.punctuation = j.at("punctuation").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.vocab_buckets = j.at("vocab_buckets").get<std::uint32_t>();
    return c;
}

} // namespace

std::string manifest_json(const IndexManifest& m) {
    json j = {
            {"format", "late-embedding-index"},
            {"version", m.version},
            {"dim", m.dim},
            {"metric", std::string(to_string(m.metric))},
            {"bytes_per_dim", m.bytes_per_dim},
            {"doc_count", m.doc_count},
            {"embedding_count", m.embedding_count},
            {"skipped_count", m.skipped_count},
            {"encoder", m.encoder ? encoder_to_json(*m.encoder) : json(nullptr)},
    };
    return j.dump(2) + "\n";
}

IndexManifest parse_manifest(std::string_view text, const std::string& source) {
    IndexManifest m;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "late-embedding-index") {
            throw Error(ErrorKind::MalformedFile, source + ": not an embedding index manifest");
        }
        m.version = j.at("version").get<std::uint32_t>();
        if (m.version != IndexManifest::kVersion) {
            throw Error(ErrorKind::VersionMismatch,
                        source + ": version " + std::to_string(m.version) + ", expected " +
                                std::to_string(IndexManifest::kVersion));
        }
        m.dim = j.at("dim").get<std::size_t>();
        m.metric = parse_metric(j.at("metric").get<std::string>());
        m.bytes_per_dim = j.at("bytes_per_dim").get<std::size_t>();
        m.doc_count = j.at("doc_count").get<std::uint64_t>();
        m.embedding_count = j.at("embedding_count").get<std::uint64_t>();
        m.skipped_count = j.at("skipped_count").get<std::uint64_t>();
        if (!j.at("encoder").is_null()) {
            m.encoder = encoder_from_json(j.at("encoder"));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedFile, source + ": " + e.what());
    }
    if (m.dim == 0 || (m.bytes_per_dim != 2 && m.bytes_per_dim != 4)) {
        throw Error(ErrorKind::MalformedFile, source + ": bad dim or bytes_per_dim");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Writer

namespace {
constexpr std::array<std::string_view, 6> kIndexFiles = {
        "manifest.json", "doclens.bin", "payload.bin", "emb2doc.bin", "docids.tsv", "skipped.tsv",
};
} // namespace

std::span<const std::string_view> index_files() {
    return kIndexFiles;
}

struct IndexWriter::Impl {
    std::filesystem::path dir;
    IndexManifest manifest;
    io::SealedFileWriter payload;
    std::vector<std::uint32_t> doclens;
    std::vector<std::uint32_t> emb2doc;
    std::string docids;
    std::string skipped;
    std::unordered_map<std::string, std::uint32_t> seen;
    io::ByteWriter scratch;
    bool finished = false;

    Impl(std::filesystem::path d, IndexManifest m)
            : dir(std::move(d)), manifest(std::move(m)), payload(dir / "payload.bin") {}
};

namespace {
std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }
    return dir;
}

void check_tsv_field(const std::string& s, const char* what) {
    LATE_REQUIRE(s.find_first_of("\t\n\r") == std::string::npos, InvalidArgument,
                 std::string(what) + " must not contain tabs or newlines: " + s);
}
} // namespace

IndexWriter::IndexWriter(
        std::filesystem::path dir,
        std::size_t dim,
        Metric metric,
        std::size_t bytes_per_dim,
        std::optional<EncoderConfig> encoder) {
    LATE_REQUIRE(dim > 0, InvalidArgument, "dim must be positive");
    LATE_REQUIRE(bytes_per_dim == 2 || bytes_per_dim == 4, InvalidArgument,
                 "bytes_per_dim must be 2 or 4");
    IndexManifest m;
    m.dim = dim;
    m.metric = metric;
    m.bytes_per_dim = bytes_per_dim;
    m.encoder = std::move(encoder);
    impl_ = std::make_unique<Impl>(prepare_dir(dir), std::move(m));
}

IndexWriter::~IndexWriter() = default;

void IndexWriter::add(const DocRepresentation& doc) {
    auto& s = *impl_;
    LATE_REQUIRE(!s.finished, InvalidArgument, "writer already finished");
    const auto& e = doc.embeddings;
    if (e.rows() == 0) {
        throw Error(ErrorKind::EmptyDocument, "document " + doc.doc_id + " has no rows");
    }
    if (e.cols() != s.manifest.dim) {
        throw Error(ErrorKind::DimensionMismatch,
                    "document " + doc.doc_id + " has dim " + std::to_string(e.cols()) +
                            ", index dim " + std::to_string(s.manifest.dim));
    }
    check_tsv_field(doc.doc_id, "doc_id");
    const auto ordinal = static_cast<std::uint32_t>(s.doclens.size());
    if (!s.seen.emplace(doc.doc_id, ordinal).second) {
        throw Error(ErrorKind::Data, "duplicate doc_id " + doc.doc_id);
    }

    s.scratch.bytes().clear();
    for (float v : e.data()) {
        if (s.manifest.bytes_per_dim == 4) {
            s.scratch.f32(v);
        } else {
            s.scratch.u16(float_to_half(v));
        }
    }
    s.payload.write(s.scratch);
    s.doclens.push_back(static_cast<std::uint32_t>(e.rows()));
    s.emb2doc.insert(s.emb2doc.end(), e.rows(), ordinal);
    s.docids += std::to_string(ordinal) + "\t" + doc.doc_id + "\n";
}

void IndexWriter::skip(std::string doc_id, std::string reason) {
    auto& s = *impl_;
    check_tsv_field(doc_id, "doc_id");
    check_tsv_field(reason, "reason");
    s.skipped += doc_id + "\t" + reason + "\n";
    ++s.manifest.skipped_count;
}

IndexManifest IndexWriter::finish() {
    auto& s = *impl_;
    LATE_REQUIRE(!s.finished, InvalidArgument, "writer already finished");
    s.finished = true;
    s.payload.close();

    s.manifest.doc_count = s.doclens.size();
    s.manifest.embedding_count = s.emb2doc.size();

    io::ByteWriter lens;
    lens.u32(static_cast<std::uint32_t>(s.doclens.size()));
    for (auto n : s.doclens) {
        lens.u32(n);
    }
    lens.seal();
    io::write_file(s.dir / "doclens.bin", lens.bytes());

    io::ByteWriter e2d;
    e2d.u64(s.emb2doc.size());
    for (auto d : s.emb2doc) {
        e2d.u32(d);
    }
    e2d.seal();
    io::write_file(s.dir / "emb2doc.bin", e2d.bytes());

    io::write_file(s.dir / "docids.tsv", io::seal_text(s.docids));
    io::write_file(s.dir / "skipped.tsv", io::seal_text(s.skipped));
    // manifest last: an index without one is incomplete
    io::write_file(s.dir / "manifest.json", io::seal_text(manifest_json(s.manifest)));
    return s.manifest;
}

// ---------------------------------------------------------------------------
// Building

namespace {
constexpr std::string_view kNoContent = "no content tokens";
} // namespace

BuildStats build_index(
        std::span<const CorpusDoc> corpus,
        const Encoder& encoder,
        const IndexerConfig& cfg,
        const std::filesystem::path& out_dir,
        const BuildProgress& progress) {
    cfg.validate();
    LATE_REQUIRE(!corpus.empty(), InvalidArgument, "corpus is empty");
    const EncoderConfig& ec = encoder.config();
    IndexWriter writer(out_dir, ec.dim, ec.metric, cfg.bytes_per_dim, ec);
    BuildStats stats;

    for (std::size_t start = 0; start < corpus.size(); start += cfg.group_size) {
        const auto group = corpus.subspan(start, std::min(cfg.group_size, corpus.size() - start));
        const auto n = std::ptrdiff_t(group.size());

        std::vector<std::size_t> lengths(group.size());
#pragma omp parallel for schedule(static) num_threads(int(cfg.worker_count))
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            lengths[std::size_t(i)] = document_tokens(tokenize(group[std::size_t(i)].text), ec).size();
        }
        const auto batches = bucket_batches(lengths, cfg.batch_size);
        for (const auto& b : batches) {
            stats.padded_cells += b.padded_width * b.members.size();
        }
        stats.real_cells += std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});

        std::vector<DocRepresentation> reps(group.size());
        std::vector<std::exception_ptr> errors(batches.size());
        const auto nb = std::ptrdiff_t(batches.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(int(cfg.worker_count))
        for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
            try {
                for (auto m : batches[std::size_t(bi)].members) {
                    try {
                        reps[m] = encoder.encode_doc(group[m].text, group[m].id);
                    } catch (const Error& e) {
                        if (e.kind() != ErrorKind::EmptyDocument) {
                            throw;
                        }
                        reps[m] = DocRepresentation{group[m].id, Matrix(0, ec.dim), 0};
                    }
                }
            } catch (...) {
                errors[std::size_t(bi)] = std::current_exception();
            }
        }
        rethrow_first(errors);

        // single writer, corpus order
        for (auto& rep : reps) {
            if (rep.content_rows == 0) {
                writer.skip(rep.doc_id, std::string(kNoContent));
                stats.skipped.push_back({rep.doc_id, std::string(kNoContent)});
            } else {
                writer.add(rep);
                ++stats.indexed;
            }
        }
        if (progress) {
            progress(start + group.size());
        }
    }
    writer.finish();
    return stats;
}

IndexManifest write_index(
        std::span<const DocRepresentation> docs,
        std::size_t dim,
        Metric metric,
        std::size_t bytes_per_dim,
        const std::filesystem::path& out_dir) {
    IndexWriter writer(out_dir, dim, metric, bytes_per_dim);
    for (const auto& d : docs) {
        writer.add(d);
    }
    return writer.finish();
}

// ---------------------------------------------------------------------------
// Reading

namespace {

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return {bytes.begin(), bytes.end()};
}

// Splits "a \t b" lines; the body is already checksum-verified.
std::vector<std::pair<std::string, std::string>> tsv_pairs(
        const std::string& body,
        const std::string& source) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < body.size()) {
        ++lineno;
        auto nl = body.find('\n', pos);
        if (nl == std::string::npos) {
            nl = body.size();
        }
        std::string_view line(body.data() + pos, nl - pos);
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw Error(ErrorKind::MalformedFile, source + ":" + std::to_string(lineno) + ": missing tab");
        }
        out.emplace_back(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
        pos = nl + 1;
    }
    return out;
}

} // namespace

EmbeddingIndex EmbeddingIndex::open(const std::filesystem::path& dir) {
    EmbeddingIndex idx;
    idx.dir_ = dir;

    const auto mpath = (dir / "manifest.json").string();
    idx.manifest_ = parse_manifest(io::verify_sealed_text(read_text(dir / "manifest.json"), mpath), mpath);
    const auto& m = idx.manifest_;

    {
        const auto src = (dir / "doclens.bin").string();
        const auto bytes = io::read_file(src);
        io::ByteReader r(io::verify_sealed(bytes, src), src);
        const auto n = r.u32();
        if (n != m.doc_count) {
            r.fail(ErrorKind::MalformedFile, "doc count " + std::to_string(n) + " disagrees with manifest");
        }
        idx.doclens_.resize(n);
        idx.offsets_.resize(n);
        std::uint64_t total = 0;
        for (std::uint32_t i = 0; i < n; ++i) {
            idx.doclens_[i] = r.u32();
            if (idx.doclens_[i] == 0) {
                r.fail(ErrorKind::MalformedFile, "zero-length document");
            }
            idx.offsets_[i] = total;
            total += idx.doclens_[i];
        }
        if (r.remaining() != 0) {
            r.fail(ErrorKind::MalformedFile, "trailing bytes");
        }
        if (total != m.embedding_count) {
            r.fail(ErrorKind::MalformedFile, "doclens sum to " + std::to_string(total) +
                                                     ", manifest has " + std::to_string(m.embedding_count));
        }
    }

    {
        const auto src = (dir / "emb2doc.bin").string();
        const auto bytes = io::read_file(src);
        io::ByteReader r(io::verify_sealed(bytes, src), src);
        const auto n = r.u64();
        if (n != m.embedding_count) {
            r.fail(ErrorKind::MalformedFile, "embedding count disagrees with manifest");
        }
        idx.emb2doc_.resize(n);
        for (std::uint64_t e = 0; e < n; ++e) {
            idx.emb2doc_[e] = r.u32();
        }
        if (r.remaining() != 0) {
            r.fail(ErrorKind::MalformedFile, "trailing bytes");
        }
        for (std::uint32_t d = 0; d < idx.doclens_.size(); ++d) {
            for (std::uint64_t e = idx.offsets_[d]; e < idx.offsets_[d] + idx.doclens_[d]; ++e) {
                if (idx.emb2doc_[e] != d) {
                    throw Error(ErrorKind::MalformedFile,
                                src + ": embedding " + std::to_string(e) + " maps to doc " +
                                        std::to_string(idx.emb2doc_[e]) + ", doclens say " +
                                        std::to_string(d));
                }
            }
        }
    }

    {
        const auto src = (dir / "payload.bin").string();
        const auto bytes = io::read_file(src);
        const auto body = io::verify_sealed(bytes, src);
        const auto expected = payload_bytes(m.embedding_count, m.dim, m.bytes_per_dim);
        if (body.size() != expected) {
            throw Error(ErrorKind::MalformedFile, src + ": " + std::to_string(body.size()) +
                                                          " payload bytes, expected " +
                                                          std::to_string(expected));
        }
        io::ByteReader r(body, src);
        idx.payload_.resize(m.embedding_count * m.dim);
        for (auto& v : idx.payload_) {
            v = m.bytes_per_dim == 4 ? r.f32() : half_to_float(r.u16());
        }
    }

    {
        const auto src = (dir / "docids.tsv").string();
        const auto rows = tsv_pairs(io::verify_sealed_text(read_text(src), src), src);
        if (rows.size() != m.doc_count) {
            throw Error(ErrorKind::MalformedFile, src + ": row count disagrees with manifest");
        }
        idx.doc_ids_.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].first != std::to_string(i)) {
                throw Error(ErrorKind::MalformedFile, src + ":" + std::to_string(i + 1) + ": ordinal out of order");
            }
            idx.ordinals_.emplace(rows[i].second, std::uint32_t(i));
            idx.doc_ids_.push_back(rows[i].second);
        }
    }

    {
        const auto src = (dir / "skipped.tsv").string();
        for (auto& [id, reason] : tsv_pairs(io::verify_sealed_text(read_text(src), src), src)) {
            idx.skipped_.push_back({std::move(id), std::move(reason)});
        }
        if (idx.skipped_.size() != m.skipped_count) {
            throw Error(ErrorKind::MalformedFile, src + ": row count disagrees with manifest");
        }
    }
    return idx;
}

std::span<const float> EmbeddingIndex::doc_rows(std::size_t ordinal) const {
    LATE_REQUIRE(ordinal < doc_count(), InvalidArgument,
                 "doc ordinal " + std::to_string(ordinal) + " out of range");
    return std::span<const float>(payload_).subspan(offsets_[ordinal] * dim(), doclens_[ordinal] * dim());
}

Matrix EmbeddingIndex::doc_matrix(std::size_t ordinal) const {
    const auto rows = doc_rows(ordinal);
    Matrix out(doclens_[ordinal], dim());
    std::copy(rows.begin(), rows.end(), out.data().begin());
    return out;
}

DocRepresentation EmbeddingIndex::doc(std::size_t ordinal) const {
    Matrix m = doc_matrix(ordinal);
    const std::size_t n = m.rows();
    return {doc_ids_[ordinal], std::move(m), n};
}

const std::string& EmbeddingIndex::doc_id(std::size_t ordinal) const {
    LATE_REQUIRE(ordinal < doc_count(), InvalidArgument,
                 "doc ordinal " + std::to_string(ordinal) + " out of range");
    return doc_ids_[ordinal];
}

std::optional<std::uint32_t> EmbeddingIndex::ordinal_of(const std::string& doc_id) const {
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::uint64_t footprint(const std::filesystem::path& dir) {
    std::uint64_t total = 0;
    for (auto name : kIndexFiles) {
        std::error_code ec;
        const auto n = std::filesystem::file_size(dir / name, ec);
        if (ec) {
            throw Error(ErrorKind::Io, (dir / name).string() + ": " + ec.message());
        }
        total += n;
    }
    return total;
}

std::uint64_t footprint(const EmbeddingIndex& index) {
    return footprint(index.dir());
}

} // namespace late

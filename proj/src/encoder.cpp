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

#include "late/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "late/binary_io.hpp"
#include "late/random.hpp"

namespace late {

bool is_marker(std::string_view tok) noexcept {
    return tok == token::kCls || tok == token::kQuery || tok == token::kDoc ||
            tok == token::kMask || tok == token::kUnk;
}

namespace {

TokenId marker_id(std::string_view tok) {
    if (tok == token::kCls) {
        return Vocabulary::kClsId;
    }
    if (tok == token::kQuery) {
        return Vocabulary::kQueryId;
    }
    if (tok == token::kDoc) {
        return Vocabulary::kDocId;
    }
    if (tok == token::kMask) {
        return Vocabulary::kMaskId;
    }
    return Vocabulary::kUnkId;
}

bool is_ascii_punct(char c) noexcept {
    return kAsciiPunctuation.find(c) != std::string_view::npos;
}

} // namespace

Vocabulary Vocabulary::hashed(std::uint32_t buckets) {
    LATE_REQUIRE(buckets > 0, InvalidArgument, "hashed vocabulary needs buckets");
    Vocabulary v;
    v.buckets_ = buckets;
    return v;
}

Vocabulary Vocabulary::closed(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
        if (is_marker(t) || v.ids_.contains(t)) {
            continue;
        }
        TokenId next = kNumMarkers + TokenId(v.ids_.size());
        v.ids_.emplace(t, next);
    }
    return v;
}

TokenId Vocabulary::id(std::string_view tok) const {
    if (is_marker(tok)) {
        return marker_id(tok);
    }
    if (buckets_ > 0) {
        return kNumMarkers + TokenId(fnv1a64(tok) % buckets_);
    }
    auto it = ids_.find(std::string(tok));
    return it == ids_.end() ? kUnkId : it->second;
}

std::size_t Vocabulary::size() const noexcept {
    return kNumMarkers + (buckets_ > 0 ? buckets_ : ids_.size());
}

void EncoderConfig::validate() const {
    LATE_REQUIRE(query_len >= 2, InvalidArgument, "query_len must leave room for [CLS] and [Q]");
    LATE_REQUIRE(dim >= 1, InvalidArgument, "dim must be positive");
    LATE_REQUIRE(base_dim >= dim, InvalidArgument, "dim must not exceed base_dim");
    LATE_REQUIRE(max_doc_len >= 2, InvalidArgument, "max_doc_len must fit [CLS] and [D]");
    LATE_REQUIRE(vocab_buckets > 0, InvalidArgument, "vocab_buckets must be positive");
}

bool EncoderConfig::is_punctuation(std::string_view tok) const noexcept {
    return tok.size() == 1 && punctuation.find(tok[0]) != std::string::npos;
}

ProjectionLayer ProjectionLayer::zeros(std::size_t base_dim, std::size_t dim) {
    return {base_dim, dim, std::vector<double>(base_dim * dim, 0.0)};
}

ProjectionLayer ProjectionLayer::random(std::size_t base_dim, std::size_t dim, std::uint64_t seed) {
    ProjectionLayer p = zeros(base_dim, dim);
    SeededRng rng(mix64(seed ^ 0x70726f6aull));
    const double scale = 1.0 / std::sqrt(double(base_dim));
    for (double& w : p.weights) {
        w = rng.normal() * scale;
    }
    return p;
}

namespace {
constexpr std::string_view kProjMagic = "LSPROJ";
constexpr std::uint32_t kProjVersion = 1;
} // namespace

void ProjectionLayer::save(const std::filesystem::path& path) const {
    io::ByteWriter w;
    w.raw(kProjMagic);
    w.u32(kProjVersion);
    w.u32(std::uint32_t(base_dim));
    w.u32(std::uint32_t(dim));
    for (double v : weights) {
        w.f64(v);
    }
    w.seal();
    io::write_file(path, w.bytes());
}

ProjectionLayer ProjectionLayer::load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(io::verify_sealed(bytes, path.string()), path.string());
    if (r.str(kProjMagic.size()) != kProjMagic) {
        r.fail(ErrorKind::MalformedFile, "bad magic");
    }
    if (r.u32() != kProjVersion) {
        r.fail(ErrorKind::VersionMismatch, "unsupported projection version");
    }
    ProjectionLayer p;
    p.base_dim = r.u32();
    p.dim = r.u32();
    p.weights.resize(p.base_dim * p.dim);
    for (double& v : p.weights) {
        v = r.f64();
        if (!std::isfinite(v)) {
            r.fail(ErrorKind::NonFinite, "non-finite projection weight");
        }
    }
    if (r.remaining() != 0) {
        r.fail(ErrorKind::MalformedFile, "trailing bytes");
    }
    return p;
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (uc < 0x80 && std::isspace(uc)) {
            flush();
        } else if (is_ascii_punct(c)) {
            flush();
            out.emplace_back(1, c);
        } else if (uc < 0x80) {
            cur.push_back(char(std::tolower(uc)));
        } else {
            cur.push_back(c); // UTF-8 continuation and lead bytes pass through
        }
    }
    flush();
    return out;
}

TokenSequence augment_query(const TokenSequence& tokens, const EncoderConfig& cfg) {
    TokenSequence out;
    out.reserve(cfg.query_len);
    out.emplace_back(token::kCls);
    out.emplace_back(token::kQuery);
    const std::size_t payload = std::min(tokens.size(), cfg.query_len - 2);
    out.insert(out.end(), tokens.begin(), tokens.begin() + std::ptrdiff_t(payload));
    while (out.size() < cfg.query_len) {
        out.emplace_back(token::kMask);
    }
    return out;
}

TokenSequence document_tokens(const TokenSequence& tokens, const EncoderConfig& cfg) {
    TokenSequence out;
    out.emplace_back(token::kCls);
    out.emplace_back(token::kDoc);
    const std::size_t payload = std::min(tokens.size(), cfg.max_doc_len - 2);
    out.insert(out.end(), tokens.begin(), tokens.begin() + std::ptrdiff_t(payload));
    return out;
}

namespace {

void base_vector(TokenId id, const EncoderConfig& cfg, std::span<double> out) {
    SeededRng rng(mix64(cfg.seed) ^ mix64(0x746f6b656eull + id));
    for (double& v : out) {
        v = rng.uniform(-1.0, 1.0);
    }
}

} // namespace

Matrix toy_embed(const TokenSequence& tokens, const EncoderConfig& cfg, const Vocabulary& vocab) {
    const std::size_t n = tokens.size();
    const std::size_t width = cfg.base_dim;
    std::vector<double> base(n * width);
    for (std::size_t i = 0; i < n; ++i) {
        base_vector(vocab.id(tokens[i]), cfg, {base.data() + i * width, width});
    }

    Matrix out(n, width);
    const auto w = std::ptrdiff_t(cfg.context_window);
    std::vector<double> acc(width);
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double total = 0;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - w);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(std::ptrdiff_t(n) - 1, i + w);
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            const double weight = double(w + 1 - std::abs(j - i));
            total += weight;
            const double* b = base.data() + std::size_t(j) * width;
            for (std::size_t k = 0; k < width; ++k) {
                acc[k] += weight * b[k];
            }
        }
        for (std::size_t k = 0; k < width; ++k) {
            out(std::size_t(i), k) = float(acc[k] / total);
        }
    }
    return out;
}

Matrix project_normalize(const Matrix& base, const ProjectionLayer& proj) {
    LATE_REQUIRE(
            base.rows() == 0 || base.cols() == proj.base_dim,
            DimensionMismatch,
            "base width " + std::to_string(base.cols()) + " != projection input " +
                    std::to_string(proj.base_dim));
    Matrix out(base.rows(), proj.dim);
    std::vector<double> x(proj.dim);
    for (std::size_t i = 0; i < base.rows(); ++i) {
        std::fill(x.begin(), x.end(), 0.0);
        auto row = base.row(i);
        for (std::size_t a = 0; a < proj.base_dim; ++a) {
            const double b = row[a];
            const double* w = proj.weights.data() + a * proj.dim;
            for (std::size_t c = 0; c < proj.dim; ++c) {
                x[c] += b * w[c];
            }
        }
        double sq = 0;
        for (double v : x) {
            sq += v * v;
        }
        const double denom = std::sqrt(sq) + kNormEpsilon;
        for (std::size_t c = 0; c < proj.dim; ++c) {
            out(i, c) = float(x[c] / denom);
        }
    }
    return out;
}

Encoder::Encoder(EncoderConfig cfg, ProjectionLayer proj)
        : cfg_(std::move(cfg)),
          proj_(std::move(proj)),
          vocab_(Vocabulary::hashed(cfg_.vocab_buckets)) {
    cfg_.validate();
    LATE_REQUIRE(
            proj_.base_dim == cfg_.base_dim && proj_.dim == cfg_.dim,
            DimensionMismatch,
            "projection is " + std::to_string(proj_.base_dim) + "x" + std::to_string(proj_.dim) +
                    ", config expects " + std::to_string(cfg_.base_dim) + "x" +
                    std::to_string(cfg_.dim));
}

QueryRepresentation Encoder::encode_query(std::string_view text, std::string query_id) const {
    query_encodes_.fetch_add(1, std::memory_order_relaxed);
    const TokenSequence seq = augment_query(tokenize(text), cfg_);
    return {std::move(query_id), project_normalize(toy_embed(seq, cfg_, vocab_), proj_)};
}

DocRepresentation Encoder::encode_doc(std::string_view text, std::string doc_id) const {
    doc_encodes_.fetch_add(1, std::memory_order_relaxed);
    const TokenSequence seq = document_tokens(tokenize(text), cfg_);
    const Matrix full = project_normalize(toy_embed(seq, cfg_, vocab_), proj_);

    DocRepresentation rep{std::move(doc_id), Matrix(0, cfg_.dim), 0};
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const bool marker = is_marker(seq[i]);
        if (!marker && cfg_.is_punctuation(seq[i])) {
            continue;
        }
        rep.embeddings.append_row(full.row(i));
        if (!marker) {
            ++rep.content_rows;
        }
    }
    LATE_REQUIRE(!rep.embeddings.empty(), EmptyDocument, "no embeddings survive filtering");
    return rep;
}

QueryRepresentation encode_query(
        std::string_view text,
        const EncoderConfig& cfg,
        const ProjectionLayer& proj) {
    return Encoder(cfg, proj).encode_query(text);
}

DocRepresentation encode_doc(
        std::string_view text,
        const EncoderConfig& cfg,
        const ProjectionLayer& proj) {
    return Encoder(cfg, proj).encode_doc(text);
}

} // namespace late

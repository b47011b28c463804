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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "late/core.hpp"

namespace late {

using TokenId = std::uint32_t;

/// Token strings. Marker tokens appear literally ("[CLS]", "[Q]", ...);
/// tokenize() can never produce them because brackets split as punctuation.
using TokenSequence = std::vector<std::string>;

namespace token {
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kQuery = "[Q]";
inline constexpr std::string_view kDoc = "[D]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kUnk = "[UNK]";
} // namespace token

bool is_marker(std::string_view tok) noexcept;

/// The 32 printable ASCII punctuation characters.
inline constexpr std::string_view kAsciiPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Token -> id mapping. Ids 0..4 are the markers, in the order CLS, Q, D,
/// MASK, UNK. A closed vocabulary maps unknown tokens to [UNK]; a hashed
/// vocabulary maps every token into a fixed number of buckets after the
/// markers, so it needs no corpus pass.
class Vocabulary {
  public:
    static constexpr TokenId kClsId = 0;
    static constexpr TokenId kQueryId = 1;
    static constexpr TokenId kDocId = 2;
    static constexpr TokenId kMaskId = 3;
    static constexpr TokenId kUnkId = 4;
    static constexpr TokenId kNumMarkers = 5;

    static Vocabulary hashed(std::uint32_t buckets);
    static Vocabulary closed(const std::vector<std::string>& tokens);

    TokenId id(std::string_view tok) const;
    std::size_t size() const noexcept;
    bool is_hashed() const noexcept {
        return buckets_ > 0;
    }

  private:
    Vocabulary() = default;

    std::uint32_t buckets_ = 0;
    std::unordered_map<std::string, TokenId> ids_;
};

struct EncoderConfig {
    std::size_t query_len = 32;  // N_q, counting [CLS] and [Q]
    std::size_t dim = 128;       // m
    std::size_t base_dim = 128;  // toy embedder width before projection
    std::size_t context_window = 2;
    std::size_t max_doc_len = 180; // tokens including [CLS] and [D]
    Metric metric = Metric::Cosine;
    std::string punctuation = std::string(kAsciiPunctuation);
    std::uint64_t seed = 0;
    std::uint32_t vocab_buckets = 1u << 20;

    void validate() const;
    bool is_punctuation(std::string_view tok) const noexcept;
};

/// Linear map from base_dim to dim with no bias and no activation.
/// Row-major, base_dim x dim.
struct ProjectionLayer {
    std::size_t base_dim = 0;
    std::size_t dim = 0;
    std::vector<double> weights;

    static ProjectionLayer zeros(std::size_t base_dim, std::size_t dim);
    /// Gaussian entries scaled by 1/sqrt(base_dim).
    static ProjectionLayer random(std::size_t base_dim, std::size_t dim, std::uint64_t seed);

    double& at(std::size_t r, std::size_t c) noexcept {
        return weights[r * dim + c];
    }
    double at(std::size_t r, std::size_t c) const noexcept {
        return weights[r * dim + c];
    }

    void save(const std::filesystem::path& path) const;
    static ProjectionLayer load(const std::filesystem::path& path);

    bool operator==(const ProjectionLayer&) const = default;
};

/// Lowercases ASCII, splits on whitespace, and emits each ASCII
/// punctuation character as its own token.
TokenSequence tokenize(std::string_view text);

/// [CLS] [Q] t1..tl [MASK]... padded or truncated to exactly query_len.
TokenSequence augment_query(const TokenSequence& tokens, const EncoderConfig& cfg);

/// [CLS] [D] t1..tn truncated to max_doc_len. No [MASK] padding.
TokenSequence document_tokens(const TokenSequence& tokens, const EncoderConfig& cfg);

/// Deterministic contextual stand-in for a transformer: each token gets a
/// hash-seeded base vector, then every position becomes the triangular
/// weighted mean of its neighbours within context_window.
Matrix toy_embed(const TokenSequence& tokens, const EncoderConfig& cfg, const Vocabulary& vocab);

/// Row-wise `base * W`, then L2 normalization of every row.
Matrix project_normalize(const Matrix& base, const ProjectionLayer& proj);

/// Guard added to row norms before dividing.
inline constexpr double kNormEpsilon = 1e-12;

/// Query and document encoder. Immutable after construction apart from the
/// call counters, so encode_* may be called concurrently.
class Encoder {
  public:
    Encoder(EncoderConfig cfg, ProjectionLayer proj);

    QueryRepresentation encode_query(std::string_view text, std::string query_id = {}) const;
    /// Throws EmptyDocument when no rows survive filtering.
    DocRepresentation encode_doc(std::string_view text, std::string doc_id = {}) const;

    const EncoderConfig& config() const noexcept {
        return cfg_;
    }
    const ProjectionLayer& projection() const noexcept {
        return proj_;
    }
    const Vocabulary& vocabulary() const noexcept {
        return vocab_;
    }

    std::uint64_t query_encodes() const noexcept {
        return query_encodes_.load();
    }
    std::uint64_t doc_encodes() const noexcept {
        return doc_encodes_.load();
    }

  private:
    EncoderConfig cfg_;
    ProjectionLayer proj_;
    Vocabulary vocab_;
    mutable std::atomic<std::uint64_t> query_encodes_{0};
    mutable std::atomic<std::uint64_t> doc_encodes_{0};
};

QueryRepresentation encode_query(
        std::string_view text,
        const EncoderConfig& cfg,
        const ProjectionLayer& proj);
DocRepresentation encode_doc(
        std::string_view text,
        const EncoderConfig& cfg,
        const ProjectionLayer& proj);

} // namespace late

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

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "late/ann.hpp"
#include "late/encoder.hpp"
#include "late/indexer.hpp"

namespace late {

enum class RetrievalMode {
    Rerank,        // score a supplied candidate list
    EndToEnd,      // IVF-PQ candidates, then exact MaxSim
    EndToEndExact, // exhaustive per-vector candidates, then exact MaxSim
};

std::string_view to_string(RetrievalMode mode);
RetrievalMode parse_mode(std::string_view name);

struct RetrievalParams {
    std::size_t k = 1000;
    std::size_t k_prime = 0; // per-vector depth; 0 means k
    std::size_t probes = 10;
    RetrievalMode mode = RetrievalMode::Rerank;
    std::size_t minibatch = 256; // documents gathered per padded batch

    std::size_t depth() const noexcept {
        return k_prime ? k_prime : k;
    }
    void validate() const;
};

struct ScoredDoc {
    std::string doc_id;
    std::uint32_t ordinal = 0;
    double score = 0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ties to the lower ordinal; no duplicates.
using RankedList = std::vector<ScoredDoc>;

/// Sorts by the RankedList order and keeps the first k.
void finalize_ranking(RankedList& list, std::size_t k);

/// Unique doc ordinals, ascending.
struct CandidateSet {
    std::vector<std::uint32_t> ordinals;

    std::size_t size() const noexcept {
        return ordinals.size();
    }
};

/// Exact MaxSim over the given documents, gathered into padded batches of
/// `minibatch` documents. Duplicate ordinals are scored once.
RankedList rerank_ordinals(
        const QueryRepresentation& q,
        std::span<const std::uint32_t> ordinals,
        const EmbeddingIndex& index,
        std::size_t k,
        std::size_t minibatch = 256);

struct RerankOutcome {
    RankedList ranking;
    std::vector<std::string> unknown_ids;
};

/// Same, by document id. Ids missing from the index are skipped and reported.
RerankOutcome rerank(
        const QueryRepresentation& q,
        std::span<const std::string> candidate_ids,
        const EmbeddingIndex& index,
        std::size_t k,
        std::size_t minibatch = 256);

/// One IVF-PQ search per query row, mapped to documents and deduplicated.
CandidateSet stage1_candidates(
        const QueryRepresentation& q,
        const IvfPqIndex& ann,
        std::span<const std::uint32_t> emb2doc,
        std::size_t k_prime,
        std::size_t probes);

/// As stage1_candidates with an exhaustive scan of the stored embeddings.
CandidateSet stage1_exact(const QueryRepresentation& q, const EmbeddingIndex& index, std::size_t k_prime);

/// Mode dispatch. Candidate ids are used only in Rerank mode; `ann` is
/// required only in EndToEnd mode. Stage-1 scores are discarded; the final
/// order comes from full-precision MaxSim alone.
RankedList retrieve(
        const QueryRepresentation& q,
        const RetrievalParams& params,
        const EmbeddingIndex& index,
        const IvfPqIndex* ann,
        std::span<const std::string> candidate_ids = {});

struct QueryText {
    std::string id;
    std::string text;
};

/// Encodes each query once and retrieves for it.
class Searcher {
  public:
    Searcher(const Encoder& encoder, const EmbeddingIndex& index, const IvfPqIndex* ann = nullptr);

    RankedList search(
            std::string_view query_text,
            const RetrievalParams& params,
            std::span<const std::string> candidate_ids = {}) const;

    /// Queries run in parallel; results are in input order. In Rerank mode
    /// candidates[i] belongs to queries[i].
    std::vector<RankedList> search_all(
            std::span<const QueryText> queries,
            const RetrievalParams& params,
            std::span<const std::vector<std::string>> candidates = {}) const;

  private:
    const Encoder& encoder_;
    const EmbeddingIndex& index_;
    const IvfPqIndex* ann_;
};

/// `qid Q0 docid rank score tag`, rank from 1.
void write_trec_run(std::ostream& out, std::string_view qid, const RankedList& list, std::string_view tag);

} // namespace late

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

#include "late/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>

namespace late {

std::string_view to_string(RetrievalMode mode) {
    switch (mode) {
    case RetrievalMode::Rerank:
        return "rerank";
    case RetrievalMode::EndToEnd:
        return "end-to-end";
    case RetrievalMode::EndToEndExact:
        return "end-to-end-exact";
    }
    return "?";
}

RetrievalMode parse_mode(std::string_view name) {
    if (name == "rerank") {
        return RetrievalMode::Rerank;
    }
    if (name == "end-to-end" || name == "e2e") {
        return RetrievalMode::EndToEnd;
    }
    if (name == "end-to-end-exact" || name == "e2e-exact" || name == "exact") {
        return RetrievalMode::EndToEndExact;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown retrieval mode '" + std::string(name) + "'");
}

void RetrievalParams::validate() const {
    LATE_REQUIRE(k >= 1, InvalidArgument, "k must be at least 1");
    LATE_REQUIRE(probes >= 1, InvalidArgument, "probes must be at least 1");
    LATE_REQUIRE(minibatch >= 1, InvalidArgument, "minibatch must be at least 1");
}

void finalize_ranking(RankedList& list, std::size_t k) {
    std::sort(list.begin(), list.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        return a.score > b.score || (a.score == b.score && a.ordinal < b.ordinal);
    });
    if (list.size() > k) {
        list.resize(k);
    }
}

RankedList rerank_ordinals(
        const QueryRepresentation& q,
        std::span<const std::uint32_t> ordinals,
        const EmbeddingIndex& index,
        std::size_t k,
        std::size_t minibatch) {
    LATE_REQUIRE(k >= 1, InvalidArgument, "k must be at least 1");
    LATE_REQUIRE(minibatch >= 1, InvalidArgument, "minibatch must be at least 1");
    if (ordinals.empty()) {
        return {};
    }
    if (q.embeddings.cols() != index.dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "query dim " + std::to_string(q.embeddings.cols()) + ", index dim " +
                            std::to_string(index.dim()));
    }

    std::vector<std::uint32_t> docs;
    docs.reserve(ordinals.size());
    {
        std::vector<bool> seen(index.doc_count(), false);
        for (auto o : ordinals) {
            LATE_REQUIRE(o < index.doc_count(), InvalidArgument,
                         "doc ordinal " + std::to_string(o) + " out of range");
            if (!seen[o]) {
                seen[o] = true;
                docs.push_back(o);
            }
        }
    }

    std::vector<double> scores(docs.size());
    const std::size_t nb = (docs.size() + minibatch - 1) / minibatch;
    const auto batches = std::ptrdiff_t(nb);
    std::vector<std::exception_ptr> errors(nb);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < batches; ++b) {
        try {
            const std::size_t lo = std::size_t(b) * minibatch;
            const std::size_t hi = std::min(docs.size(), lo + minibatch);
            std::size_t width = 0;
            for (std::size_t i = lo; i < hi; ++i) {
                width = std::max<std::size_t>(width, index.doclens()[docs[i]]);
            }
            PaddedDocBatch batch(width, index.dim());
            for (std::size_t i = lo; i < hi; ++i) {
                batch.add(index.doc_rows(docs[i]), index.doclens()[docs[i]]);
            }
            const auto s = batch_maxsim(q.embeddings, batch, index.metric());
            std::copy(s.begin(), s.end(), scores.begin() + std::ptrdiff_t(lo));
        } catch (...) {
            errors[std::size_t(b)] = std::current_exception();
        }
    }
    rethrow_first(errors);

    RankedList out;
    out.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out.push_back({index.doc_id(docs[i]), docs[i], scores[i]});
    }
    finalize_ranking(out, k);
    return out;
}

RerankOutcome rerank(
        const QueryRepresentation& q,
        std::span<const std::string> candidate_ids,
        const EmbeddingIndex& index,
        std::size_t k,
        std::size_t minibatch) {
    RerankOutcome out;
    std::vector<std::uint32_t> ordinals;
    ordinals.reserve(candidate_ids.size());
    for (const auto& id : candidate_ids) {
        if (auto o = index.ordinal_of(id)) {
            ordinals.push_back(*o);
        } else {
            out.unknown_ids.push_back(id);
        }
    }
    out.ranking = rerank_ordinals(q, ordinals, index, k, minibatch);
    return out;
}

namespace {

template <class Search>
CandidateSet union_of_rows(
        const QueryRepresentation& q,
        std::span<const std::uint32_t> emb2doc,
        std::size_t doc_count,
        Search&& search) {
    const std::size_t rows = q.embeddings.rows();
    std::vector<std::vector<AnnHit>> hits(rows);
    std::vector<std::exception_ptr> errors(rows);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(rows); ++i) {
        try {
            hits[std::size_t(i)] = search(q.embeddings.row(std::size_t(i)));
        } catch (...) {
            errors[std::size_t(i)] = std::current_exception();
        }
    }
    rethrow_first(errors);
    std::vector<bool> seen(doc_count, false);
    CandidateSet out;
    for (const auto& row : hits) {
        for (const auto& h : row) {
            LATE_REQUIRE(h.ordinal < emb2doc.size(), InvalidArgument,
                         "embedding ordinal " + std::to_string(h.ordinal) + " outside emb2doc");
            const auto d = emb2doc[h.ordinal];
            LATE_REQUIRE(d < doc_count, InvalidArgument, "emb2doc maps outside the collection");
            if (!seen[d]) {
                seen[d] = true;
                out.ordinals.push_back(d);
            }
        }
    }
    std::sort(out.ordinals.begin(), out.ordinals.end());
    return out;
}

std::size_t doc_count_of(std::span<const std::uint32_t> emb2doc) {
    return emb2doc.empty() ? 0 : std::size_t(*std::max_element(emb2doc.begin(), emb2doc.end())) + 1;
}

} // namespace

CandidateSet stage1_candidates(
        const QueryRepresentation& q,
        const IvfPqIndex& ann,
        std::span<const std::uint32_t> emb2doc,
        std::size_t k_prime,
        std::size_t probes) {
    return union_of_rows(q, emb2doc, doc_count_of(emb2doc), [&](std::span<const float> row) {
        return ann.search(row, k_prime, probes);
    });
}

CandidateSet stage1_exact(const QueryRepresentation& q, const EmbeddingIndex& index, std::size_t k_prime) {
    if (index.embedding_count() == 0) {
        return {};
    }
    return union_of_rows(q, index.emb2doc(), index.doc_count(), [&](std::span<const float> row) {
        return exact_flat_search(index.embeddings(), index.dim(), row, k_prime, index.metric());
    });
}

RankedList retrieve(
        const QueryRepresentation& q,
        const RetrievalParams& params,
        const EmbeddingIndex& index,
        const IvfPqIndex* ann,
        std::span<const std::string> candidate_ids) {
    params.validate();
    switch (params.mode) {
    case RetrievalMode::Rerank:
        return rerank(q, candidate_ids, index, params.k, params.minibatch).ranking;
    case RetrievalMode::EndToEnd: {
        if (ann == nullptr) {
            throw Error(ErrorKind::InvalidArgument, "end-to-end retrieval needs an IVF-PQ index");
        }
        LATE_REQUIRE(ann->size() == index.embedding_count(), DimensionMismatch,
                     "IVF-PQ index holds " + std::to_string(ann->size()) + " vectors, embedding index " +
                             std::to_string(index.embedding_count()));
        const auto cands = stage1_candidates(q, *ann, index.emb2doc(), params.depth(), params.probes);
        return rerank_ordinals(q, cands.ordinals, index, params.k, params.minibatch);
    }
    case RetrievalMode::EndToEndExact: {
        const auto cands = stage1_exact(q, index, params.depth());
        return rerank_ordinals(q, cands.ordinals, index, params.k, params.minibatch);
    }
    }
    return {};
}

Searcher::Searcher(const Encoder& encoder, const EmbeddingIndex& index, const IvfPqIndex* ann)
        : encoder_(encoder), index_(index), ann_(ann) {
    LATE_REQUIRE(encoder.config().dim == index.dim(), DimensionMismatch,
                 "encoder dim " + std::to_string(encoder.config().dim) + ", index dim " +
                         std::to_string(index.dim()));
}

RankedList Searcher::search(
        std::string_view query_text,
        const RetrievalParams& params,
        std::span<const std::string> candidate_ids) const {
    const auto q = encoder_.encode_query(query_text);
    return retrieve(q, params, index_, ann_, candidate_ids);
}

std::vector<RankedList> Searcher::search_all(
        std::span<const QueryText> queries,
        const RetrievalParams& params,
        std::span<const std::vector<std::string>> candidates) const {
    params.validate();
    if (params.mode == RetrievalMode::Rerank) {
        LATE_REQUIRE(candidates.size() == queries.size(), InvalidArgument,
                     "rerank needs one candidate list per query");
    }
    std::vector<RankedList> out(queries.size());
    std::vector<std::exception_ptr> errors(queries.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(queries.size()); ++i) {
        const auto qi = std::size_t(i);
        try {
            std::span<const std::string> cands;
            if (params.mode == RetrievalMode::Rerank) {
                cands = candidates[qi];
            }
            out[qi] = search(queries[qi].text, params, cands);
        } catch (...) {
            errors[qi] = std::current_exception();
        }
    }
    rethrow_first(errors);
    return out;
}

void write_trec_run(std::ostream& out, std::string_view qid, const RankedList& list, std::string_view tag) {
    char score[64];
    for (std::size_t r = 0; r < list.size(); ++r) {
        std::snprintf(score, sizeof(score), "%.6f", list[r].score);
        out << qid << " Q0 " << list[r].doc_id << ' ' << (r + 1) << ' ' << score << ' ' << tag << '\n';
    }
}

} // namespace late

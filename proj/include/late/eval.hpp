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

// Binary-relevance IR metrics and the TREC-style files they read.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "late/retrieval.hpp"

namespace late {

/// query id -> relevant doc ids. Queries without a relevant doc are dropped.
using Qrels = std::map<std::string, std::set<std::string>>;

/// query id -> doc ids in rank order.
using Run = std::map<std::string, std::vector<std::string>>;

/// `qid 0 docid rel`, whitespace separated; rel > 0 is relevant.
Qrels read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

/// `qid Q0 docid rank score tag`; each query's docs are ordered by rank.
Run read_trec_run(const std::filesystem::path& path);
Run to_run(std::span<const QueryText> queries, std::span<const RankedList> lists);

/// `qid \t text`.
std::vector<QueryText> read_queries(const std::filesystem::path& path);

/// `qid \t docid`, candidates kept in file order per query.
std::map<std::string, std::vector<std::string>> read_candidates(const std::filesystem::path& path);

// Per-query measures. A doc id repeated in `ranked` counts only at its
// first position.
double reciprocal_rank(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t depth);
double recall(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t k);
double average_precision(std::span<const std::string> ranked, const std::set<std::string>& relevant);

// Means over the queries present in both run and qrels; throws Data when
// there are none.
double mrr_at_10(const Run& run, const Qrels& qrels);
double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k);
double map_metric(const Run& run, const Qrels& qrels);

struct QueryMetrics {
    std::string query_id;
    double rr10 = 0;
    std::map<std::size_t, double> recall;
    double ap = 0;
};

struct EvalReport {
    std::size_t query_count = 0;
    double mrr10 = 0;
    std::map<std::size_t, double> recall;
    double map = 0;
    std::vector<QueryMetrics> per_query;
    /// Run queries with no judgments.
    std::vector<std::string> skipped;

    std::string to_json() const;
    std::string table() const;
};

struct EvalOptions {
    std::vector<std::size_t> recall_depths{50, 200, 1000};
    /// Evaluate a seeded random subset of this many queries.
    std::optional<std::size_t> sample;
    std::uint64_t seed = 0;
};

EvalReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options = {});

} // namespace late

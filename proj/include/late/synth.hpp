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

// Seeded synthetic collections for tests and the demo pipeline.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "late/eval.hpp"
#include "late/indexer.hpp"
#include "late/trainer.hpp"

namespace late {

struct SynthConfig {
    std::size_t docs = 2000;
    std::size_t queries = 50;
    std::size_t min_len = 5; // tokens, punctuation included
    std::size_t max_len = 60;
    std::size_t vocab = 3000;
    std::size_t query_min_words = 2;
    std::size_t query_max_words = 5;
    std::size_t triples = 200;
    std::size_t candidates = 100; // per query, the relevant doc included
    double punctuation_rate = 0.12;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Each query is built from words of one target doc, which is its only
/// relevant doc.
struct SynthCorpus {
    std::vector<CorpusDoc> docs;
    std::vector<QueryText> queries;
    Qrels qrels;
    std::vector<Triple> triples;
    std::map<std::string, std::vector<std::string>> candidates;
};

SynthCorpus generate_synth(const SynthConfig& cfg);

/// collection.tsv, queries.tsv, qrels.txt, triples.tsv, candidates.tsv.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

} // namespace late

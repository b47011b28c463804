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

#include "late/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "late/random.hpp"

namespace late {

void SynthConfig::validate() const {
    LATE_REQUIRE(docs >= 1, InvalidArgument, "synth.docs must be at least 1");
    LATE_REQUIRE(queries <= docs, InvalidArgument, "synth.queries cannot exceed synth.docs");
    LATE_REQUIRE(min_len >= 1 && min_len <= max_len, InvalidArgument,
                 "synth lengths need 1 <= min_len <= max_len");
    LATE_REQUIRE(vocab >= 1, InvalidArgument, "synth.vocab must be at least 1");
    LATE_REQUIRE(query_min_words >= 1 && query_min_words <= query_max_words, InvalidArgument,
                 "synth query lengths need 1 <= query_min_words <= query_max_words");
    LATE_REQUIRE(punctuation_rate >= 0 && punctuation_rate < 1, InvalidArgument,
                 "synth.punctuation_rate must be in [0, 1)");
    LATE_REQUIRE(triples == 0 || (docs >= 2 && queries >= 1), InvalidArgument,
                 "synthetic triples need at least 2 docs and 1 query");
}

namespace {

constexpr std::string_view kMarks = ",.;:!?";

std::size_t between(SeededRng& rng, std::size_t lo, std::size_t hi) {
    return lo + std::size_t(rng.below(hi - lo + 1));
}

struct Draft {
    std::string text;
    std::vector<std::string> words;
};

Draft draft_doc(SeededRng& rng, const SynthConfig& cfg) {
    Draft d;
    const std::size_t len = between(rng, cfg.min_len, cfg.max_len);
    for (std::size_t t = 0; t < len; ++t) {
        if (t > 0 && rng.uniform() < cfg.punctuation_rate) {
            d.text.push_back(kMarks[rng.below(kMarks.size())]);
            continue;
        }
        // squaring skews toward low ids so some words recur often
        const double u = rng.uniform();
        const auto w = "w" + std::to_string(std::size_t(u * u * double(cfg.vocab)));
        if (t > 0) {
            d.text.push_back(' ');
        }
        d.text += w;
        d.words.push_back(w);
    }
    return d;
}

template <class T>
void shuffle(std::vector<T>& v, SeededRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

std::ofstream create(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    return out;
}

} // namespace

SynthCorpus generate_synth(const SynthConfig& cfg) {
    cfg.validate();
    SynthCorpus out;
    SeededRng rng(mix64(cfg.seed));

    std::vector<Draft> drafts;
    drafts.reserve(cfg.docs);
    for (std::size_t i = 0; i < cfg.docs; ++i) {
        drafts.push_back(draft_doc(rng, cfg));
        out.docs.push_back({"D" + std::to_string(i), drafts.back().text});
    }

    std::vector<std::size_t> order(cfg.docs);
    std::iota(order.begin(), order.end(), std::size_t(0));
    shuffle(order, rng);
    std::vector<std::size_t> targets(order.begin(), order.begin() + std::ptrdiff_t(cfg.queries));

    for (std::size_t q = 0; q < cfg.queries; ++q) {
        const auto& words = drafts[targets[q]].words;
        const std::size_t n = between(rng, cfg.query_min_words, cfg.query_max_words);
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            text += (i ? " " : "") + words[rng.below(words.size())];
        }
        const auto qid = "Q" + std::to_string(q);
        out.queries.push_back({qid, text});
        out.qrels[qid] = {out.docs[targets[q]].id};
    }

    for (std::size_t t = 0; t < cfg.triples; ++t) {
        const std::size_t q = t % cfg.queries;
        std::size_t neg = std::size_t(rng.below(cfg.docs - 1));
        if (neg >= targets[q]) {
            ++neg;
        }
        out.triples.push_back({out.queries[q].text, out.docs[targets[q]].text, out.docs[neg].text});
    }

    const std::size_t per_query = std::min(cfg.candidates, cfg.docs);
    for (std::size_t q = 0; per_query > 0 && q < cfg.queries; ++q) {
        std::vector<std::size_t> picks{targets[q]};
        // partial Fisher-Yates over the other docs
        std::vector<std::size_t> pool;
        pool.reserve(cfg.docs - 1);
        for (std::size_t d = 0; d < cfg.docs; ++d) {
            if (d != targets[q]) {
                pool.push_back(d);
            }
        }
        for (std::size_t i = 0; picks.size() < per_query; ++i) {
            std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            picks.push_back(pool[i]);
        }
        shuffle(picks, rng);
        auto& list = out.candidates[out.queries[q].id];
        for (auto d : picks) {
            list.push_back(out.docs[d].id);
        }
    }
    return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = create(dir / "collection.tsv");
        for (const auto& d : corpus.docs) {
            out << d.id << '\t' << d.text << '\n';
        }
    }
    {
        auto out = create(dir / "queries.tsv");
        for (const auto& q : corpus.queries) {
            out << q.id << '\t' << q.text << '\n';
        }
    }
    write_qrels(dir / "qrels.txt", corpus.qrels);
    {
        auto out = create(dir / "triples.tsv");
        for (const auto& t : corpus.triples) {
            out << t.query << '\t' << t.positive << '\t' << t.negative << '\n';
        }
    }
    {
        // queries in file order, not map order
        auto out = create(dir / "candidates.tsv");
        for (const auto& q : corpus.queries) {
            auto it = corpus.candidates.find(q.id);
            if (it == corpus.candidates.end()) {
                continue;
            }
            for (const auto& d : it->second) {
                out << q.id << '\t' << d << '\n';
            }
        }
    }
}

} // namespace late

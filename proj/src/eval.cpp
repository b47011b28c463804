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

#include "late/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "late/random.hpp"

namespace late {

namespace {

std::ifstream open_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    return in;
}

std::string where(const std::filesystem::path& path, std::size_t lineno) {
    return path.string() + ":" + std::to_string(lineno);
}

// Calls fn(line, lineno) for each non-blank line, CR stripped.
template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    auto in = open_text(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        fn(line, lineno);
    }
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) {
        out.push_back(tok);
    }
    return out;
}

std::pair<std::string, std::string> split_tab(
        const std::string& line,
        const std::filesystem::path& path,
        std::size_t lineno,
        const char* expect) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
        throw Error(ErrorKind::Data, where(path, lineno) + ": expected " + expect);
    }
    return {line.substr(0, tab), line.substr(tab + 1)};
}

} // namespace

Qrels read_qrels(const std::filesystem::path& path) {
    Qrels out;
    for_each_line(path, [&](const std::string& line, std::size_t lineno) {
        const auto f = split_ws(line);
        if (f.size() != 4) {
            throw Error(ErrorKind::Data, where(path, lineno) + ": expected 'qid 0 docid rel'");
        }
        long rel = 0;
        try {
            std::size_t used = 0;
            rel = std::stol(f[3], &used);
            if (used != f[3].size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw Error(ErrorKind::Data, where(path, lineno) + ": relevance '" + f[3] + "' is not an integer");
        }
        if (rel > 0) {
            out[f[0]].insert(f[2]);
        }
    });
    return out;
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    for (const auto& [qid, docs] : qrels) {
        for (const auto& d : docs) {
            out << qid << " 0 " << d << " 1\n";
        }
    }
}

Run read_trec_run(const std::filesystem::path& path) {
    std::map<std::string, std::vector<std::pair<long, std::string>>> ranked;
    for_each_line(path, [&](const std::string& line, std::size_t lineno) {
        const auto f = split_ws(line);
        if (f.size() != 6) {
            throw Error(ErrorKind::Data, where(path, lineno) + ": expected 'qid Q0 docid rank score tag'");
        }
        long rank = 0;
        try {
            rank = std::stol(f[3]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Data, where(path, lineno) + ": rank '" + f[3] + "' is not an integer");
        }
        ranked[f[0]].emplace_back(rank, f[2]);
    });
    Run out;
    for (auto& [qid, docs] : ranked) {
        std::stable_sort(docs.begin(), docs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& list = out[qid];
        for (auto& d : docs) {
            list.push_back(std::move(d.second));
        }
    }
    return out;
}

Run to_run(std::span<const QueryText> queries, std::span<const RankedList> lists) {
    LATE_REQUIRE(queries.size() == lists.size(), InvalidArgument, "one ranked list per query");
    Run out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto& docs = out[queries[i].id];
        for (const auto& d : lists[i]) {
            docs.push_back(d.doc_id);
        }
    }
    return out;
}

std::vector<QueryText> read_queries(const std::filesystem::path& path) {
    std::vector<QueryText> out;
    for_each_line(path, [&](const std::string& line, std::size_t lineno) {
        auto [id, text] = split_tab(line, path, lineno, "qid<TAB>text");
        out.push_back({std::move(id), std::move(text)});
    });
    return out;
}

std::map<std::string, std::vector<std::string>> read_candidates(const std::filesystem::path& path) {
    std::map<std::string, std::vector<std::string>> out;
    for_each_line(path, [&](const std::string& line, std::size_t lineno) {
        auto [qid, rest] = split_tab(line, path, lineno, "qid<TAB>docid");
        // the official top-1000 files carry query and passage text after the id
        const auto tab = rest.find('\t');
        out[qid].push_back(tab == std::string::npos ? rest : rest.substr(0, tab));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Measures

namespace {

// Calls fn(rank, is_relevant) for first occurrences, rank from 1.
template <class Fn>
void walk(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t depth, Fn&& fn) {
    std::unordered_set<std::string_view> seen;
    std::size_t rank = 0;
    for (const auto& d : ranked) {
        if (rank >= depth) {
            break;
        }
        if (!seen.insert(d).second) {
            continue;
        }
        ++rank;
        if (!fn(rank, relevant.count(d) > 0)) {
            break;
        }
    }
}

constexpr std::size_t kAll = ~std::size_t(0);

} // namespace

double reciprocal_rank(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t depth) {
    double rr = 0;
    walk(ranked, relevant, depth, [&](std::size_t rank, bool rel) {
        if (rel) {
            rr = 1.0 / double(rank);
            return false;
        }
        return true;
    });
    return rr;
}

double recall(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t k) {
    if (relevant.empty()) {
        return 0;
    }
    std::size_t hits = 0;
    walk(ranked, relevant, k, [&](std::size_t, bool rel) {
        hits += rel;
        return true;
    });
    return double(hits) / double(relevant.size());
}

double average_precision(std::span<const std::string> ranked, const std::set<std::string>& relevant) {
    if (relevant.empty()) {
        return 0;
    }
    std::size_t hits = 0;
    double sum = 0;
    walk(ranked, relevant, kAll, [&](std::size_t rank, bool rel) {
        if (rel) {
            ++hits;
            sum += double(hits) / double(rank);
        }
        return true;
    });
    return sum / double(relevant.size());
}

namespace {

template <class Measure>
double mean_over_judged(const Run& run, const Qrels& qrels, Measure&& measure) {
    double total = 0;
    std::size_t n = 0;
    for (const auto& [qid, docs] : run) {
        auto it = qrels.find(qid);
        if (it == qrels.end() || it->second.empty()) {
            continue;
        }
        total += measure(docs, it->second);
        ++n;
    }
    if (n == 0) {
        throw Error(ErrorKind::Data, "no query appears in both the run and the qrels");
    }
    return total / double(n);
}

} // namespace

double mrr_at_10(const Run& run, const Qrels& qrels) {
    return mean_over_judged(run, qrels, [](const auto& d, const auto& r) { return reciprocal_rank(d, r, 10); });
}

double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
    return mean_over_judged(run, qrels, [k](const auto& d, const auto& r) { return recall(d, r, k); });
}

double map_metric(const Run& run, const Qrels& qrels) {
    return mean_over_judged(run, qrels, [](const auto& d, const auto& r) { return average_precision(d, r); });
}

EvalReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options) {
    EvalReport report;
    std::vector<std::string> judged;
    for (const auto& [qid, docs] : run) {
        auto it = qrels.find(qid);
        if (it == qrels.end() || it->second.empty()) {
            report.skipped.push_back(qid);
        } else {
            judged.push_back(qid);
        }
    }
    if (judged.empty()) {
        throw Error(ErrorKind::Data, "no query appears in both the run and the qrels");
    }
    if (options.sample && *options.sample < judged.size()) {
        // selection sampling keeps the sorted order
        SeededRng rng(mix64(options.seed ^ 0x6576616cull));
        std::vector<std::string> kept;
        std::size_t needed = *options.sample;
        for (std::size_t i = 0; i < judged.size() && needed > 0; ++i) {
            if (rng.below(judged.size() - i) < needed) {
                kept.push_back(judged[i]);
                --needed;
            }
        }
        judged = std::move(kept);
        LATE_REQUIRE(!judged.empty(), InvalidArgument, "sample size must be positive");
    }

    for (auto k : options.recall_depths) {
        report.recall[k] = 0;
    }
    for (const auto& qid : judged) {
        const auto& docs = run.at(qid);
        const auto& rel = qrels.at(qid);
        QueryMetrics m;
        m.query_id = qid;
        m.rr10 = reciprocal_rank(docs, rel, 10);
        m.ap = average_precision(docs, rel);
        for (auto k : options.recall_depths) {
            m.recall[k] = recall(docs, rel, k);
            report.recall[k] += m.recall[k];
        }
        report.mrr10 += m.rr10;
        report.map += m.ap;
        report.per_query.push_back(std::move(m));
    }
    const double n = double(judged.size());
    report.query_count = judged.size();
    report.mrr10 /= n;
    report.map /= n;
    for (auto& [k, v] : report.recall) {
        v /= n;
    }
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json metrics;
    metrics["mrr@10"] = mrr10;
    for (const auto& [k, v] : recall) {
        metrics["recall@" + std::to_string(k)] = v;
    }
    metrics["map"] = map;
    auto queries = nlohmann::ordered_json::array();
    for (const auto& q : per_query) {
        nlohmann::ordered_json row;
        row["qid"] = q.query_id;
        row["rr@10"] = q.rr10;
        for (const auto& [k, v] : q.recall) {
            row["recall@" + std::to_string(k)] = v;
        }
        row["ap"] = q.ap;
        queries.push_back(std::move(row));
    }
    nlohmann::ordered_json j;
    j["queries"] = query_count;
    j["metrics"] = metrics;
    j["skipped"] = skipped;
    j["per_query"] = queries;
    return j.dump(2) + "\n";
}

std::string EvalReport::table() const {
    std::vector<std::pair<std::string, double>> rows{{"MRR@10", mrr10}};
    for (const auto& [k, v] : recall) {
        rows.emplace_back("Recall@" + std::to_string(k), v);
    }
    rows.emplace_back("MAP", map);
    std::size_t width = 7;
    for (const auto& r : rows) {
        width = std::max(width, r.first.size());
    }
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-*s  %s\n", int(width), "metric", "value");
    out += buf;
    for (const auto& [name, v] : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %.4f\n", int(width), name.c_str(), v);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-*s  %zu\n", int(width), "queries", query_count);
    out += buf;
    if (!skipped.empty()) {
        std::snprintf(buf, sizeof(buf), "%-*s  %zu\n", int(width), "skipped", skipped.size());
        out += buf;
    }
    return out;
}

} // namespace late

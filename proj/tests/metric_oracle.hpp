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

// Straight-line metric definitions in exact rational arithmetic.

#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "late/eval.hpp"

namespace late::testing {

using Rational = boost::multiprecision::cpp_rational;

struct NaiveMetrics {
    double mrr10 = 0;
    std::map<std::size_t, double> recall;
    double map = 0;
    std::size_t query_count = 0;
};

inline std::vector<std::string> first_occurrences(const std::vector<std::string>& ranked) {
    std::vector<std::string> out;
    for (const auto& d : ranked) {
        if (std::find(out.begin(), out.end(), d) == out.end()) {
            out.push_back(d);
        }
    }
    return out;
}

inline NaiveMetrics naive_metrics(const Run& run, const Qrels& qrels, const std::vector<std::size_t>& depths) {
    Rational rr_sum = 0, ap_sum = 0;
    std::map<std::size_t, Rational> recall_sum;
    std::size_t n = 0;
    for (const auto& [qid, raw] : run) {
        if (!qrels.count(qid)) {
            continue;
        }
        const auto& rel = qrels.at(qid);
        const auto ranked = first_occurrences(raw);
        ++n;

        for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) {
            if (rel.count(ranked[i])) {
                rr_sum += Rational(1, i + 1);
                break;
            }
        }
        for (auto k : depths) {
            std::size_t hits = 0;
            for (const auto& d : rel) {
                auto pos = std::find(ranked.begin(), ranked.end(), d);
                if (pos != ranked.end() && std::size_t(pos - ranked.begin()) < k) {
                    ++hits;
                }
            }
            recall_sum[k] += Rational(hits, rel.size());
        }
        Rational ap = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (!rel.count(ranked[i])) {
                continue;
            }
            std::size_t above = 0;
            for (std::size_t j = 0; j <= i; ++j) {
                above += rel.count(ranked[j]);
            }
            ap += Rational(above, i + 1);
        }
        ap_sum += ap / Rational(rel.size());
    }
    NaiveMetrics out;
    out.query_count = n;
    if (n == 0) {
        return out;
    }
    out.mrr10 = static_cast<double>(rr_sum / n);
    out.map = static_cast<double>(ap_sum / n);
    for (auto& [k, v] : recall_sum) {
        out.recall[k] = static_cast<double>(v / n);
    }
    return out;
}

struct MetricInstance {
    Run run;
    Qrels qrels;
};

/// Random run/qrels pair with at least one judged query. Rankings may repeat
/// doc ids and reach past depth 1000.
inline MetricInstance random_instance(std::mt19937_64& rng) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    MetricInstance inst;
    const std::size_t queries = pick(1, 8);
    for (std::size_t q = 0; q < queries; ++q) {
        const auto qid = "q" + std::to_string(q);
        const std::size_t universe = pick(0, 3) == 0 ? pick(1000, 1500) : pick(3, 40);
        const bool judged = q == 0 || pick(0, 4) != 0;
        const bool in_run = q == 0 || pick(0, 4) != 0;
        if (judged) {
            auto& rel = inst.qrels[qid];
            const std::size_t nrel = pick(1, std::min<std::size_t>(5, universe));
            while (rel.size() < nrel) {
                rel.insert("d" + std::to_string(pick(0, universe - 1)));
            }
        }
        if (in_run) {
            auto& ranked = inst.run[qid];
            const std::size_t len = pick(0, universe + universe / 10);
            for (std::size_t i = 0; i < len; ++i) {
                ranked.push_back("d" + std::to_string(pick(0, universe - 1)));
            }
        }
    }
    return inst;
}

} // namespace late::testing

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

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "metric_oracle.hpp"
#include "test_util.hpp"

namespace late {
namespace {

using testing::TempDir;
using Docs = std::vector<std::string>;

TEST(Metrics, ReciprocalRankExamples) {
    const std::set<std::string> rel{"d"};
    EXPECT_DOUBLE_EQ(reciprocal_rank(Docs{"d", "a"}, rel, 10), 1.0);
    EXPECT_DOUBLE_EQ(reciprocal_rank(Docs{"a", "b", "c", "d"}, rel, 10), 0.25);
    EXPECT_DOUBLE_EQ(reciprocal_rank(Docs{"a", "b", "c"}, rel, 10), 0.0);

    Docs late_hit(10, "x");
    for (std::size_t i = 0; i < late_hit.size(); ++i) {
        late_hit[i] = "x" + std::to_string(i);
    }
    late_hit.push_back("d");
    EXPECT_DOUBLE_EQ(reciprocal_rank(late_hit, rel, 10), 0.0);
    EXPECT_DOUBLE_EQ(reciprocal_rank(late_hit, rel, 11), 1.0 / 11);
}

TEST(Metrics, MrrTwoQueries) {
    const Qrels qrels{{"q1", {"a"}}, {"q2", {"z"}}};
    const late::Run run{{"q1", {"a", "b"}}, {"q2", {"b", "c"}}};
    EXPECT_DOUBLE_EQ(mrr_at_10(run, qrels), 0.5);
}

TEST(Metrics, RecallExamples) {
    const std::set<std::string> rel{"a", "b"};
    EXPECT_DOUBLE_EQ(recall(Docs{"b", "x", "a"}, rel, 50), 1.0);
    EXPECT_DOUBLE_EQ(recall(Docs{"x", "y"}, rel, 50), 0.0);
    EXPECT_DOUBLE_EQ(recall(Docs{"b", "x", "a"}, rel, 2), 0.5);
}

TEST(Metrics, AveragePrecisionExamples) {
    EXPECT_DOUBLE_EQ(average_precision(Docs{"a", "b", "x"}, {"a", "b"}), 1.0);
    for (std::size_t r = 1; r <= 6; ++r) {
        Docs ranked;
        for (std::size_t i = 1; i < r; ++i) {
            ranked.push_back("n" + std::to_string(i));
        }
        ranked.push_back("hit");
        EXPECT_DOUBLE_EQ(average_precision(ranked, {"hit"}), 1.0 / double(r)) << r;
    }
    // unretrieved relevant docs count as precision 0
    EXPECT_DOUBLE_EQ(average_precision(Docs{"a"}, {"a", "b"}), 0.5);
}

TEST(Metrics, RepeatedDocCountsOnce) {
    const std::set<std::string> rel{"a", "b"};
    EXPECT_DOUBLE_EQ(average_precision(Docs{"a", "a", "b"}, rel), 1.0);
    EXPECT_DOUBLE_EQ(reciprocal_rank(Docs{"x", "x", "a"}, rel, 10), 0.5);
    EXPECT_DOUBLE_EQ(recall(Docs{"a", "a", "b"}, rel, 2), 1.0);
}

TEST(Metrics, DisjointRunAndQrelsThrow) {
    const Qrels qrels{{"q1", {"a"}}};
    const late::Run run{{"q9", {"a"}}};
    for (auto f : {+[](const late::Run& r, const Qrels& q) { return mrr_at_10(r, q); },
                   +[](const late::Run& r, const Qrels& q) { return map_metric(r, q); },
                   +[](const late::Run& r, const Qrels& q) { return recall_at_k(r, q, 50); }}) {
        try {
            f(run, qrels);
            FAIL() << "expected Data";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Data);
        }
    }
    EXPECT_THROW(evaluate(run, qrels), Error);
}

TEST(Metrics, MatchNaiveRationalOracle) {
    std::mt19937_64 rng(20260418);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = testing::random_instance(rng);
        const auto exact = testing::naive_metrics(inst.run, inst.qrels, {50, 200, 1000});
        const auto rep = evaluate(inst.run, inst.qrels);
        EXPECT_NEAR(rep.mrr10, exact.mrr10, 1e-9) << trial;
        EXPECT_NEAR(rep.map, exact.map, 1e-9) << trial;
        for (auto k : {50u, 200u, 1000u}) {
            EXPECT_NEAR(rep.recall.at(k), exact.recall.at(k), 1e-9) << trial << " @" << k;
            EXPECT_NEAR(recall_at_k(inst.run, inst.qrels, k), exact.recall.at(k), 1e-9);
        }
        EXPECT_NEAR(mrr_at_10(inst.run, inst.qrels), exact.mrr10, 1e-9);
        EXPECT_NEAR(map_metric(inst.run, inst.qrels), exact.map, 1e-9);
        EXPECT_EQ(rep.query_count, exact.query_count);
    }
}

TEST(Evaluate, AggregatesAreMeansOfPerQueryValues) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = testing::random_instance(rng);
        const auto rep = evaluate(inst.run, inst.qrels);
        ASSERT_EQ(rep.per_query.size(), rep.query_count);
        double rr = 0, ap = 0, r50 = 0;
        for (const auto& q : rep.per_query) {
            rr += q.rr10;
            ap += q.ap;
            r50 += q.recall.at(50);
        }
        const double n = double(rep.query_count);
        EXPECT_NEAR(rep.mrr10, rr / n, 1e-12);
        EXPECT_NEAR(rep.map, ap / n, 1e-12);
        EXPECT_NEAR(rep.recall.at(50), r50 / n, 1e-12);
    }
}

TEST(Evaluate, SkipsUnjudgedQueries) {
    const Qrels qrels{{"q1", {"a"}}};
    const late::Run run{{"q1", {"a"}}, {"q2", {"b"}}};
    const auto rep = evaluate(run, qrels);
    EXPECT_EQ(rep.query_count, 1u);
    EXPECT_EQ(rep.skipped, std::vector<std::string>{"q2"});
    EXPECT_DOUBLE_EQ(rep.mrr10, 1.0);
}

TEST(Evaluate, SampleIsSeededSubset) {
    Qrels qrels;
    late::Run run;
    for (int i = 0; i < 40; ++i) {
        const auto q = "q" + std::to_string(i);
        qrels[q] = {"d" + std::to_string(i)};
        run[q] = {"d" + std::to_string(i % 3 == 0 ? i : i + 1)};
    }
    EvalOptions opt;
    opt.sample = 10;
    opt.seed = 3;
    const auto a = evaluate(run, qrels, opt);
    const auto b = evaluate(run, qrels, opt);
    EXPECT_EQ(a.query_count, 10u);
    EXPECT_EQ(a.to_json(), b.to_json());
    std::set<std::string> ids;
    for (const auto& q : a.per_query) {
        EXPECT_TRUE(run.count(q.query_id));
        ids.insert(q.query_id);
    }
    EXPECT_EQ(ids.size(), 10u);

    opt.seed = 4;
    EXPECT_NE(evaluate(run, qrels, opt).to_json(), a.to_json());

    opt.sample = 1000;
    EXPECT_EQ(evaluate(run, qrels, opt).query_count, 40u);
}

TEST(Evaluate, ReportFormats) {
    const Qrels qrels{{"q1", {"a"}}, {"q2", {"b"}}};
    const late::Run run{{"q1", {"x", "a"}}, {"q2", {"b"}}};
    const auto rep = evaluate(run, qrels);
    const auto j = nlohmann::json::parse(rep.to_json());
    EXPECT_EQ(j["queries"], 2);
    EXPECT_DOUBLE_EQ(j["metrics"]["mrr@10"].get<double>(), 0.75);
    EXPECT_DOUBLE_EQ(j["metrics"]["recall@50"].get<double>(), 1.0);
    EXPECT_EQ(j["per_query"].size(), 2u);

    const auto t = rep.table();
    EXPECT_NE(t.find("MRR@10       0.7500"), std::string::npos) << t;
    EXPECT_NE(t.find("Recall@1000"), std::string::npos);
    EXPECT_NE(t.find("queries      2"), std::string::npos) << t;
}

TEST(Files, QrelsRoundTripAndZeroRelevance) {
    TempDir dir;
    const auto p = dir.path() / "qrels.txt";
    {
        std::ofstream out(p);
        out << "q1 0 a 1\nq1 0 b 0\n\nq2\t0\tc\t2\r\nq3 0 d 0\n";
    }
    const auto q = read_qrels(p);
    EXPECT_EQ(q, (Qrels{{"q1", {"a"}}, {"q2", {"c"}}}));
    write_qrels(dir.path() / "w.txt", q);
    EXPECT_EQ(read_qrels(dir.path() / "w.txt"), q);

    std::ofstream(dir.path() / "bad.txt") << "q1 0 a\n";
    EXPECT_THROW(read_qrels(dir.path() / "bad.txt"), Error);
    std::ofstream(dir.path() / "bad2.txt") << "q1 0 a yes\n";
    EXPECT_THROW(read_qrels(dir.path() / "bad2.txt"), Error);
    EXPECT_THROW(read_qrels(dir.path() / "missing.txt"), Error);
}

TEST(Files, RunOrderedByRankField) {
    TempDir dir;
    const auto p = dir.path() / "run.trec";
    {
        std::ofstream out(p);
        out << "q1 Q0 c 3 0.1 t\nq1 Q0 a 1 0.9 t\nq2 Q0 z 1 1.0 t\nq1 Q0 b 2 0.5 t\n";
    }
    const auto run = read_trec_run(p);
    EXPECT_EQ(run.at("q1"), (Docs{"a", "b", "c"}));
    EXPECT_EQ(run.at("q2"), (Docs{"z"}));

    std::ofstream(dir.path() / "bad.trec") << "q1 Q0 a one 0.1 t\n";
    EXPECT_THROW(read_trec_run(dir.path() / "bad.trec"), Error);
}

TEST(Files, WrittenRunReadsBack) {
    TempDir dir;
    const std::vector<QueryText> queries{{"q1", "x"}, {"q2", "y"}};
    const std::vector<RankedList> lists{{{"a", 0, 2.0}, {"b", 1, 1.0}}, {{"c", 2, 3.0}}};
    {
        std::ofstream out(dir.path() / "run.trec");
        for (std::size_t i = 0; i < queries.size(); ++i) {
            write_trec_run(out, queries[i].id, lists[i], "t");
        }
    }
    EXPECT_EQ(read_trec_run(dir.path() / "run.trec"), to_run(queries, lists));
}

TEST(Files, QueriesAndCandidates) {
    TempDir dir;
    std::ofstream(dir.path() / "q.tsv") << "1\thello world\n2\tsecond\tquery\n";
    const auto q = read_queries(dir.path() / "q.tsv");
    ASSERT_EQ(q.size(), 2u);
    EXPECT_EQ(q[1].id, "2");
    EXPECT_EQ(q[1].text, "second\tquery");

    std::ofstream(dir.path() / "c.tsv") << "1\td3\n1\td1\n2\td9\tq text\tpassage text\n";
    const auto c = read_candidates(dir.path() / "c.tsv");
    EXPECT_EQ(c.at("1"), (Docs{"d3", "d1"}));
    EXPECT_EQ(c.at("2"), (Docs{"d9"}));

    std::ofstream(dir.path() / "bad.tsv") << "no tab here\n";
    EXPECT_THROW(read_queries(dir.path() / "bad.tsv"), Error);
}

} // namespace
} // namespace late

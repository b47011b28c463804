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

// `late` command-line tool. Exit status: 0 success, 1 usage error, 2 data
// error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "late/ann.hpp"
#include "late/config.hpp"
#include "late/encoder.hpp"
#include "late/eval.hpp"
#include "late/indexer.hpp"
#include "late/retrieval.hpp"
#include "late/synth.hpp"
#include "late/trainer.hpp"

namespace fs = std::filesystem;

namespace {

using namespace late;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

constexpr const char* kProjectionFile = "projection.bin";
constexpr const char* kAnnFile = "ivfpq.bin";

/// Prints the wall time of a stage to stderr when it goes out of scope.
class Stage {
  public:
    explicit Stage(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~Stage() {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
        std::fprintf(stderr, "[late] %-24s %8.3f s\n", name_.c_str(), dt.count());
    }

  private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

void note(const std::string& msg) {
    std::fprintf(stderr, "[late] %s\n", msg.c_str());
}

/// --config and --set, plus shorthand flags that expand to --set entries.
struct Settings {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::string> shorthands;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config, "INI config file")->check(CLI::ExistingFile);
        cmd->add_option("--set", sets, "Override a config key: section.key=value")->take_all();
    }

    /// `--flag VALUE` becomes `key=VALUE`.
    void shorthand(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(
                flag, [this, key](const std::string& v) { shorthands.push_back(key + "=" + v); }, help);
    }

    AppConfig load() const {
        std::vector<std::string> all = sets;
        all.insert(all.end(), shorthands.begin(), shorthands.end());
        return load_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), all);
    }
};

std::ofstream create(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    return out;
}

/// Encoder stored alongside an index: its manifest config and projection.bin.
Encoder index_encoder(const EmbeddingIndex& index, const AppConfig& cfg) {
    EncoderConfig enc = index.manifest().encoder.value_or(cfg.encoder);
    const auto proj_path = index.dir() / kProjectionFile;
    if (!fs::exists(proj_path)) {
        throw Error(ErrorKind::Data, "index " + index.dir().string() + " has no " + kProjectionFile);
    }
    return Encoder(enc, ProjectionLayer::load(proj_path));
}

void write_run(const fs::path& path,
               std::span<const QueryText> queries,
               std::span<const RankedList> lists,
               const std::string& tag) {
    auto out = create(path);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        write_trec_run(out, queries[i].id, lists[i], tag);
    }
    if (!out) {
        throw Error(ErrorKind::Io, "write failed: " + path.string());
    }
}

// ---------------------------------------------------------------------------

struct SynthCmd {
    Settings s;
    std::string out;

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("-o,--out", out, "Output directory")->required();
        s.shorthand(cmd, "--docs", "synth.docs", "Number of documents");
        s.shorthand(cmd, "--queries", "synth.queries", "Number of queries");
        s.shorthand(cmd, "--seed", "synth.seed", "Generator seed");
    }

    int run() const {
        const auto cfg = s.load();
        Stage t("synth");
        const auto corpus = generate_synth(cfg.synth);
        write_synth(corpus, out);
        note("wrote " + std::to_string(corpus.docs.size()) + " docs, " + std::to_string(corpus.queries.size()) +
             " queries to " + out);
        return kOk;
    }
};

struct IndexCmd {
    Settings s;
    std::string collection;
    std::string out;
    std::string projection;

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--collection", collection, "Corpus TSV: docid<TAB>text")->required();
        cmd->add_option("-o,--out", out, "Index directory")->required();
        cmd->add_option("--projection", projection, "Trained projection; random from encoder.seed if absent");
        s.shorthand(cmd, "--workers", "indexer.worker_count", "Encoding threads");
        s.shorthand(cmd, "--bytes-per-dim", "indexer.bytes_per_dim", "4 (f32) or 2 (f16)");
    }

    int run() const {
        const auto cfg = s.load();
        cfg.encoder.validate();
        cfg.indexer.validate();
        std::vector<CorpusDoc> docs;
        {
            Stage t("read corpus");
            docs = read_corpus(collection);
        }
        ProjectionLayer proj = projection.empty()
                                       ? ProjectionLayer::random(cfg.encoder.base_dim, cfg.encoder.dim, cfg.encoder.seed)
                                       : ProjectionLayer::load(projection);
        if (proj.base_dim != cfg.encoder.base_dim || proj.dim != cfg.encoder.dim) {
            throw Error(ErrorKind::DimensionMismatch,
                        "projection is " + std::to_string(proj.base_dim) + "x" + std::to_string(proj.dim) +
                                ", encoder wants " + std::to_string(cfg.encoder.base_dim) + "x" +
                                std::to_string(cfg.encoder.dim));
        }
        const Encoder encoder(cfg.encoder, proj);
        BuildStats stats;
        {
            Stage t("encode + write");
            stats = build_index(docs, encoder, cfg.indexer, out);
        }
        proj.save(fs::path(out) / kProjectionFile);
        note("indexed " + std::to_string(stats.indexed) + " docs, skipped " + std::to_string(stats.skipped.size()) +
             ", footprint " + std::to_string(footprint(fs::path(out))) + " bytes");
        for (const auto& sk : stats.skipped) {
            note("skipped " + sk.id + ": " + sk.reason);
        }
        return kOk;
    }
};

struct AnnBuildCmd {
    Settings s;
    std::string index_dir;
    std::string out;

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--index", index_dir, "Embedding index directory")->required();
        cmd->add_option("-o,--out", out, "IVF-PQ file; defaults to <index>/ivfpq.bin");
        s.shorthand(cmd, "--partitions", "ann.partitions", "Coarse cells P");
        s.shorthand(cmd, "--subvectors", "ann.subvectors", "PQ sub-vectors s");
        s.shorthand(cmd, "--seed", "ann.seed", "Sampling and k-means seed");
    }

    int run() const {
        const auto cfg = s.load();
        const auto index = EmbeddingIndex::open(index_dir);
        cfg.ann.validate(index.dim());
        IvfPqIndex ann;
        {
            Stage t("train + add");
            ann = build_ivfpq(index, cfg.ann);
        }
        const fs::path path = out.empty() ? fs::path(index_dir) / kAnnFile : fs::path(out);
        ann.save(path);
        note("IVF-PQ: " + std::to_string(ann.size()) + " vectors, P=" + std::to_string(ann.partitions()) +
             ", s=" + std::to_string(ann.quantizer().subvectors()) + " -> " + path.string());
        return kOk;
    }
};

struct TrainCmd {
    Settings s;
    std::string triples;
    std::string out;
    std::string init;

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--triples", triples, "TSV: query<TAB>positive<TAB>negative")->required();
        cmd->add_option("-o,--out", out, "Projection output file")->required();
        cmd->add_option("--init", init, "Starting projection; random from encoder.seed if absent");
        s.shorthand(cmd, "--iterations", "train.iterations", "SGD steps");
        s.shorthand(cmd, "--lr", "train.learning_rate", "Learning rate");
    }

    int run() const {
        const auto cfg = s.load();
        const auto data = read_triples(triples);
        ProjectionLayer proj = init.empty()
                                       ? ProjectionLayer::random(cfg.encoder.base_dim, cfg.encoder.dim, cfg.encoder.seed)
                                       : ProjectionLayer::load(init);
        {
            Stage t("train");
            const std::size_t every = std::max<std::size_t>(1, cfg.train.iterations / 10);
            proj = train(data, cfg.train, cfg.encoder, std::move(proj), [&](const IterationStats& st) {
                if (st.iteration % every == 0 || st.iteration + 1 == cfg.train.iterations) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), "iteration %zu loss %.6f", st.iteration, st.mean_loss);
                    note(buf);
                }
            });
        }
        proj.save(out);
        return kOk;
    }
};

struct SearchCmd {
    Settings s;
    std::string index_dir;
    std::string queries;
    std::string out;
    std::string ann_path;
    std::string tag = "late";

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--index", index_dir, "Embedding index directory")->required();
        cmd->add_option("--queries", queries, "TSV: qid<TAB>text")->required();
        cmd->add_option("-o,--out", out, "TREC run output")->required();
        cmd->add_option("--ann", ann_path, "IVF-PQ file for e2e; defaults to <index>/ivfpq.bin");
        cmd->add_option("--tag", tag, "Run tag");
        s.shorthand(cmd, "--mode", "retrieval.mode", "e2e or e2e-exact");
        s.shorthand(cmd, "-k,--k", "retrieval.k", "Results per query");
        s.shorthand(cmd, "--k-prime", "retrieval.k_prime", "Stage-1 depth per query vector; 0 means k");
        s.shorthand(cmd, "--probes", "retrieval.probes", "IVF cells scanned per query vector");
    }

    int run() const {
        const auto cfg = s.load();
        cfg.retrieval.validate();
        if (cfg.retrieval.mode == RetrievalMode::Rerank) {
            throw Error(ErrorKind::InvalidArgument, "search needs --mode e2e or e2e-exact; use `late rerank`");
        }
        const auto index = EmbeddingIndex::open(index_dir);
        const auto encoder = index_encoder(index, cfg);
        std::optional<IvfPqIndex> ann;
        if (cfg.retrieval.mode == RetrievalMode::EndToEnd) {
            Stage t("load ivf-pq");
            ann = IvfPqIndex::load(ann_path.empty() ? fs::path(index_dir) / kAnnFile : fs::path(ann_path));
        }
        const auto qs = read_queries(queries);
        const Searcher searcher(encoder, index, ann ? &*ann : nullptr);
        std::vector<RankedList> lists;
        {
            Stage t("search " + std::string(to_string(cfg.retrieval.mode)));
            lists = searcher.search_all(qs, cfg.retrieval);
        }
        write_run(out, qs, lists, tag);
        note(std::to_string(qs.size()) + " queries -> " + out);
        return kOk;
    }
};

struct RerankCmd {
    Settings s;
    std::string index_dir;
    std::string queries;
    std::string candidates;
    std::string out;
    std::string tag = "late";

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--index", index_dir, "Embedding index directory")->required();
        cmd->add_option("--queries", queries, "TSV: qid<TAB>text")->required();
        cmd->add_option("--candidates", candidates, "TSV: qid<TAB>docid")->required();
        cmd->add_option("-o,--out", out, "TREC run output")->required();
        cmd->add_option("--tag", tag, "Run tag");
        s.shorthand(cmd, "-k,--k", "retrieval.k", "Results per query");
    }

    int run() const {
        auto cfg = s.load();
        cfg.retrieval.mode = RetrievalMode::Rerank;
        cfg.retrieval.validate();
        const auto index = EmbeddingIndex::open(index_dir);
        const auto encoder = index_encoder(index, cfg);
        const auto qs = read_queries(queries);
        const auto by_query = read_candidates(candidates);
        std::vector<std::vector<std::string>> cands(qs.size());
        std::size_t unknown = 0;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            auto it = by_query.find(qs[i].id);
            if (it == by_query.end()) {
                note("query " + qs[i].id + " has no candidates");
                continue;
            }
            for (const auto& id : it->second) {
                if (index.ordinal_of(id)) {
                    cands[i].push_back(id);
                } else {
                    ++unknown;
                }
            }
        }
        if (unknown > 0) {
            note(std::to_string(unknown) + " candidate ids are not in the index and were skipped");
        }
        const Searcher searcher(encoder, index);
        std::vector<RankedList> lists;
        {
            Stage t("rerank");
            lists = searcher.search_all(qs, cfg.retrieval, cands);
        }
        write_run(out, qs, lists, tag);
        note(std::to_string(qs.size()) + " queries -> " + out);
        return kOk;
    }
};

struct EvalCmd {
    Settings s;
    std::string run_path;
    std::string qrels;
    std::string json_out;

    void attach(CLI::App* cmd) {
        s.attach(cmd);
        cmd->add_option("--run", run_path, "TREC run")->required();
        cmd->add_option("--qrels", qrels, "TREC qrels")->required();
        cmd->add_option("-o,--out", json_out, "Write the JSON report here instead of stdout");
        s.shorthand(cmd, "--sample", "eval.sample", "Evaluate a seeded subset of N queries");
        s.shorthand(cmd, "--seed", "eval.seed", "Sampling seed");
    }

    int run() const {
        const auto cfg = s.load();
        EvalOptions opt;
        opt.recall_depths = cfg.eval.recall_depths;
        if (cfg.eval.sample > 0) {
            opt.sample = cfg.eval.sample;
        }
        opt.seed = cfg.eval.seed;
        const auto report = evaluate(read_trec_run(run_path), read_qrels(qrels), opt);
        for (const auto& q : report.skipped) {
            note("query " + q + " has no judgments; skipped");
        }
        if (json_out.empty()) {
            std::cout << report.to_json();
        } else {
            create(json_out) << report.to_json();
        }
        std::cout << report.table();
        return kOk;
    }
};

int exit_code(const Error& e) {
    return e.kind() == ErrorKind::InvalidArgument ? kUsage : kData;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Late-interaction retrieval over multi-vector embeddings."};
    app.name("late");
    app.require_subcommand(1);

    SynthCmd synth;
    IndexCmd index;
    AnnBuildCmd ann_build;
    TrainCmd train_cmd;
    SearchCmd search;
    RerankCmd rerank_cmd;
    EvalCmd eval;

    struct Entry {
        CLI::App* cmd;
        std::function<int()> run;
    };
    std::vector<Entry> entries;
    auto add = [&](const char* name, const char* help, auto& c) {
        auto* cmd = app.add_subcommand(name, help);
        c.attach(cmd);
        entries.push_back({cmd, [&c] { return c.run(); }});
    };
    add("synth", "Generate a seeded synthetic collection, queries, qrels, triples and candidates", synth);
    add("index", "Encode a corpus into an embedding index", index);
    add("ann-build", "Build an IVF-PQ index over an embedding index", ann_build);
    add("train", "Train the projection on triples", train_cmd);
    add("search", "End-to-end retrieval for a query file", search);
    add("rerank", "Re-rank supplied candidates for a query file", rerank_cmd);
    add("eval", "Score a run against qrels", eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
        }
        return kUsage;
    }

    for (const auto& e : entries) {
        if (!e.cmd->parsed()) {
            continue;
        }
        try {
            return e.run();
        } catch (const Error& err) {
            std::cerr << "late " << e.cmd->get_name() << ": " << err.what() << "\n";
            return exit_code(err);
        } catch (const std::exception& err) {
            std::cerr << "late " << e.cmd->get_name() << ": " << err.what() << "\n";
            return kData;
        }
    }
    return kUsage;
}

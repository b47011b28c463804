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

#include "late/config.hpp"

#include <charconv>
#include <functional>
#include <limits>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace late {

namespace {

[[noreturn]] void bad_value(std::string_view name, std::string_view value, const char* what) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(name) + ": '" + std::string(value) + "' is not " + what);
}

template <class Int>
Int parse_int(std::string_view name, std::string_view v) {
    Int out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || p != end) {
        bad_value(name, v, "a non-negative integer in range");
    }
    return out;
}

double parse_double(std::string_view name, std::string_view v) {
    double out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || p != end) {
        bad_value(name, v, "a number");
    }
    return out;
}

std::vector<std::size_t> parse_list(std::string_view name, std::string_view v) {
    std::vector<std::size_t> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        auto item = v.substr(0, comma);
        while (!item.empty() && item.front() == ' ') {
            item.remove_prefix(1);
        }
        while (!item.empty() && item.back() == ' ') {
            item.remove_suffix(1);
        }
        out.push_back(parse_int<std::size_t>(name, item));
        if (comma == std::string_view::npos) {
            break;
        }
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) {
        bad_value(name, v, "a comma-separated list");
    }
    return out;
}

std::string show(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

template <class Int>
std::string show(Int v) {
    return std::to_string(v);
}

std::string show(const std::vector<std::size_t>& v) {
    std::string out;
    for (auto x : v) {
        out += (out.empty() ? "" : ",") + std::to_string(x);
    }
    return out;
}

struct Field {
    std::string_view section;
    std::string_view key;
    std::function<void(AppConfig&, std::string_view name, std::string_view value)> set;
    std::function<std::string(const AppConfig&)> get;
};

template <class T>
Field field(std::string_view section, std::string_view key, T AppConfig::*part, auto member) {
    using V = std::remove_cvref_t<decltype(std::declval<T&>().*member)>;
    Field f{section, key, {}, {}};
    f.set = [part, member](AppConfig& c, std::string_view name, std::string_view value) {
        auto& slot = (c.*part).*member;
        if constexpr (std::is_same_v<V, double>) {
            slot = parse_double(name, value);
        } else if constexpr (std::is_same_v<V, Metric>) {
            slot = parse_metric(value);
        } else if constexpr (std::is_same_v<V, RetrievalMode>) {
            slot = parse_mode(value);
        } else if constexpr (std::is_same_v<V, std::string>) {
            slot = std::string(value);
        } else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) {
            slot = parse_list(name, value);
        } else {
            slot = parse_int<V>(name, value);
        }
    };
    f.get = [part, member](const AppConfig& c) -> std::string {
        const auto& slot = (c.*part).*member;
        if constexpr (std::is_same_v<V, Metric> || std::is_same_v<V, RetrievalMode>) {
            return std::string(to_string(slot));
        } else if constexpr (std::is_same_v<V, std::string>) {
            return slot;
        } else {
            return show(slot);
        }
    };
    return f;
}

const std::vector<Field>& fields() {
    using A = AppConfig;
    static const std::vector<Field> all{
            field("encoder", "query_len", &A::encoder, &EncoderConfig::query_len),
            field("encoder", "dim", &A::encoder, &EncoderConfig::dim),
            field("encoder", "base_dim", &A::encoder, &EncoderConfig::base_dim),
            field("encoder", "context_window", &A::encoder, &EncoderConfig::context_window),
            field("encoder", "max_doc_len", &A::encoder, &EncoderConfig::max_doc_len),
            field("encoder", "metric", &A::encoder, &EncoderConfig::metric),
            field("encoder", "punctuation", &A::encoder, &EncoderConfig::punctuation),
            field("encoder", "seed", &A::encoder, &EncoderConfig::seed),
            field("encoder", "vocab_buckets", &A::encoder, &EncoderConfig::vocab_buckets),

            field("indexer", "group_size", &A::indexer, &IndexerConfig::group_size),
            field("indexer", "batch_size", &A::indexer, &IndexerConfig::batch_size),
            field("indexer", "bytes_per_dim", &A::indexer, &IndexerConfig::bytes_per_dim),
            field("indexer", "worker_count", &A::indexer, &IndexerConfig::worker_count),

            field("ann", "partitions", &A::ann, &AnnConfig::partitions),
            field("ann", "probes", &A::ann, &AnnConfig::probes),
            field("ann", "subvectors", &A::ann, &AnnConfig::subvectors),
            field("ann", "kmeans_iters", &A::ann, &AnnConfig::kmeans_iters),
            field("ann", "train_sample", &A::ann, &AnnConfig::train_sample),
            field("ann", "seed", &A::ann, &AnnConfig::seed),

            field("retrieval", "k", &A::retrieval, &RetrievalParams::k),
            field("retrieval", "k_prime", &A::retrieval, &RetrievalParams::k_prime),
            field("retrieval", "probes", &A::retrieval, &RetrievalParams::probes),
            field("retrieval", "mode", &A::retrieval, &RetrievalParams::mode),
            field("retrieval", "minibatch", &A::retrieval, &RetrievalParams::minibatch),

            field("train", "learning_rate", &A::train, &TrainConfig::learning_rate),
            field("train", "batch_size", &A::train, &TrainConfig::batch_size),
            field("train", "iterations", &A::train, &TrainConfig::iterations),
            field("train", "seed", &A::train, &TrainConfig::seed),

            field("synth", "docs", &A::synth, &SynthConfig::docs),
            field("synth", "queries", &A::synth, &SynthConfig::queries),
            field("synth", "min_len", &A::synth, &SynthConfig::min_len),
            field("synth", "max_len", &A::synth, &SynthConfig::max_len),
            field("synth", "vocab", &A::synth, &SynthConfig::vocab),
            field("synth", "query_min_words", &A::synth, &SynthConfig::query_min_words),
            field("synth", "query_max_words", &A::synth, &SynthConfig::query_max_words),
            field("synth", "triples", &A::synth, &SynthConfig::triples),
            field("synth", "candidates", &A::synth, &SynthConfig::candidates),
            field("synth", "punctuation_rate", &A::synth, &SynthConfig::punctuation_rate),
            field("synth", "seed", &A::synth, &SynthConfig::seed),

            field("eval", "recall_depths", &A::eval, &EvalConfig::recall_depths),
            field("eval", "sample", &A::eval, &EvalConfig::sample),
            field("eval", "seed", &A::eval, &EvalConfig::seed),
    };
    return all;
}

} // namespace

void apply_setting(AppConfig& cfg, std::string_view section, std::string_view key, std::string_view value) {
    const std::string name = std::string(section) + "." + std::string(key);
    for (const auto& f : fields()) {
        if (f.section == section && f.key == key) {
            f.set(cfg, name, value);
            return;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown config key '" + name + "'");
}

void apply_override(AppConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.substr(0, eq).find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot == 0 || dot + 1 == eq) {
        throw Error(ErrorKind::InvalidArgument,
                    "override '" + std::string(assignment) + "' is not section.key=value");
    }
    apply_setting(cfg, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1),
                  assignment.substr(eq + 1));
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
    AppConfig cfg;
    if (file) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::read_ini(file->string(), tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw Error(ErrorKind::InvalidArgument, "config " + std::string(e.what()));
        }
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty()) {
                throw Error(ErrorKind::InvalidArgument,
                            file->string() + ": key '" + section + "' is outside any section");
            }
            for (const auto& [key, value] : body) {
                apply_setting(cfg, section, key, value.data());
            }
        }
    }
    for (const auto& o : overrides) {
        apply_override(cfg, o);
    }
    return cfg;
}

std::string render_config(const AppConfig& cfg) {
    std::string out;
    std::string_view current;
    for (const auto& f : fields()) {
        if (f.section != current) {
            out += (out.empty() ? "[" : "\n[") + std::string(f.section) + "]\n";
            current = f.section;
        }
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

} // namespace late

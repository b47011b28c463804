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

// Shared by the trainer unit tests and the acceptance suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "late/trainer.hpp"

namespace late::testing {

inline EncoderConfig tiny_encoder_config(std::size_t dim, std::size_t base_dim, std::uint64_t seed) {
    EncoderConfig cfg;
    cfg.query_len = 6;
    cfg.dim = dim;
    cfg.base_dim = base_dim;
    cfg.seed = seed;
    return cfg;
}

inline std::string word(std::size_t i) {
    return "w" + std::to_string(i);
}

inline Triple random_triple(std::uint64_t seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    std::uniform_int_distribution<std::size_t> w(0, 50);
    auto sentence = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) {
            s += (i ? " " : "") + word(w(rng));
            if (i % 4 == 3) {
                s += ",";
            }
        }
        return s;
    };
    return {sentence(3), sentence(7), sentence(6)};
}

struct FiniteDifferenceCheck {
    double pass_fraction = 0;
    double worst = 0;
};

/// Central differences of the loss with respect to every projection weight.
inline FiniteDifferenceCheck finite_difference_check(
        const PreparedTriple& t,
        const ProjectionLayer& proj,
        Metric metric,
        double h = 1e-4,
        double tolerance = 1e-4) {
    const WeightGradient analytic = loss_gradient(t, proj, metric);
    std::size_t pass = 0;
    FiniteDifferenceCheck out;
    for (std::size_t k = 0; k < proj.weights.size(); ++k) {
        ProjectionLayer plus = proj;
        ProjectionLayer minus = proj;
        plus.weights[k] += h;
        minus.weights[k] -= h;
        const double numeric =
                (evaluate_triple(t, plus, metric).loss - evaluate_triple(t, minus, metric).loss) /
                (2 * h);
        const double a = analytic.values[k];
        // relative error, with an absolute floor for entries that are ~0
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        out.worst = std::max(out.worst, rel);
        if (rel <= tolerance) {
            ++pass;
        }
    }
    out.pass_fraction = double(pass) / double(proj.weights.size());
    return out;
}

/// Positives contain the query's words; negatives never do.
inline std::vector<Triple> separable_triples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> w(0, 199);
    std::vector<Triple> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> q{w(rng), w(rng), w(rng)};
        auto in_query = [&](std::size_t x) { return std::find(q.begin(), q.end(), x) != q.end(); };
        std::vector<std::size_t> pos = q;
        while (pos.size() < 8) {
            pos.push_back(w(rng));
        }
        std::shuffle(pos.begin(), pos.end(), rng);
        std::vector<std::size_t> neg;
        while (neg.size() < 8) {
            auto x = w(rng);
            if (!in_query(x)) {
                neg.push_back(x);
            }
        }
        auto text = [](const std::vector<std::size_t>& ids) {
            std::string s;
            for (auto id : ids) {
                s += (s.empty() ? "" : " ") + word(id);
            }
            return s;
        };
        out.push_back({text(q), text(pos), text(neg)});
    }
    return out;
}

struct TrainingRun {
    std::vector<double> batch_loss;
    /// Mean loss over the whole training set after each update.
    std::vector<double> smoothed;
};

inline TrainingRun run_separable_training(std::size_t iterations = 50) {
    EncoderConfig cfg = tiny_encoder_config(16, 32, 11);
    cfg.query_len = 8;
    const auto triples = separable_triples(200, 5);
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.batch_size = 32;
    tc.seed = 3;

    const auto vocab = Vocabulary::hashed(cfg.vocab_buckets);
    std::vector<PreparedTriple> prepared;
    for (const auto& t : triples) {
        prepared.push_back(prepare_triple(t, cfg, vocab));
    }
    auto mean_loss = [&](const ProjectionLayer& p) {
        double total = 0;
        for (const auto& t : prepared) {
            total += evaluate_triple(t, p, cfg.metric).loss;
        }
        return total / double(prepared.size());
    };

    TrainingRun run;
    ProjectionLayer proj = ProjectionLayer::random(cfg.base_dim, cfg.dim, 1);
    run.smoothed.push_back(mean_loss(proj));
    tc.iterations = iterations;
    train(triples, tc, cfg, proj, [&](const IterationStats& s) {
        run.batch_loss.push_back(s.mean_loss);
        run.smoothed.push_back(mean_loss(*s.projection));
    });
    return run;
}

} // namespace late::testing

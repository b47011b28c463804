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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "late/encoder.hpp"

namespace late {

/// <query, positive passage, negative passage>.
struct Triple {
    std::string query;
    std::string positive;
    std::string negative;
};

/// Reads `query \t positive \t negative` lines.
std::vector<Triple> read_triples(const std::filesystem::path& path);

struct TrainConfig {
    double learning_rate = 3e-3;
    std::size_t batch_size = 32;
    std::size_t iterations = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Gradient with respect to ProjectionLayer::weights, same layout.
struct WeightGradient {
    std::size_t base_dim = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const noexcept {
        return values[r * dim + c];
    }
};

/// -log softmax of the positive score over {positive, negative}, i.e.
/// softplus(s_neg - s_pos), evaluated without overflow.
double pairwise_loss(double s_pos, double s_neg);

/// Frozen toy-embedder outputs for one triple, with punctuation rows already
/// dropped from the documents. Only the projection is trainable.
struct PreparedTriple {
    Matrix query;
    Matrix positive;
    Matrix negative;
};

PreparedTriple prepare_triple(const Triple& t, const EncoderConfig& cfg, const Vocabulary& vocab);

struct TripleScores {
    double positive = 0;
    double negative = 0;
    double loss = 0;
};

/// Double-precision forward pass: project, normalize, MaxSim, loss.
TripleScores evaluate_triple(const PreparedTriple& t, const ProjectionLayer& proj, Metric metric);

/// d(s_pos - s_neg)/dW with argmax winners held fixed (first index on ties).
WeightGradient score_difference_gradient(
        const PreparedTriple& t,
        const ProjectionLayer& proj,
        Metric metric);

/// d loss / dW.
WeightGradient loss_gradient(const PreparedTriple& t, const ProjectionLayer& proj, Metric metric);
WeightGradient loss_gradient(
        const Triple& t,
        const ProjectionLayer& proj,
        const EncoderConfig& cfg);

struct IterationStats {
    std::size_t iteration = 0;
    double mean_loss = 0; // over the batch, before the update
    const ProjectionLayer* projection = nullptr; // after the update
};

/// Mini-batch gradient descent on the projection. Triples whose positive and
/// negative texts coincide are skipped; if none remain this throws.
ProjectionLayer train(
        std::span<const Triple> triples,
        const TrainConfig& cfg,
        const EncoderConfig& enc_cfg,
        ProjectionLayer init,
        const std::function<void(const IterationStats&)>& on_iteration = {});

} // namespace late

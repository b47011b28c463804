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

// INI configuration shared by every CLI subcommand.
//
//   [section]
//   key = value
//
// Sections: encoder, indexer, ann, retrieval, train, synth, eval. Unknown
// sections and keys are errors.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "late/ann.hpp"
#include "late/encoder.hpp"
#include "late/indexer.hpp"
#include "late/retrieval.hpp"
#include "late/synth.hpp"
#include "late/trainer.hpp"

namespace late {

struct EvalConfig {
    std::vector<std::size_t> recall_depths{50, 200, 1000};
    std::size_t sample = 0; // 0 evaluates every query
    std::uint64_t seed = 0;
};

struct AppConfig {
    EncoderConfig encoder;
    IndexerConfig indexer;
    AnnConfig ann;
    RetrievalParams retrieval;
    TrainConfig train;
    SynthConfig synth;
    EvalConfig eval;
};

/// Throws InvalidArgument for an unknown key or an unparsable value.
void apply_setting(AppConfig& cfg, std::string_view section, std::string_view key, std::string_view value);

/// `section.key=value`.
void apply_override(AppConfig& cfg, std::string_view assignment);

/// Defaults, then `file` if given, then each override in order.
AppConfig load_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides = {});

/// Every key with its current value, in INI form; parses back to `cfg`.
std::string render_config(const AppConfig& cfg);

} // namespace late

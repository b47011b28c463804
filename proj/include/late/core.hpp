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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "late/error.hpp"

namespace late {

enum class Metric {
    Cosine,       // dot product over unit-norm embeddings
    NegSquaredL2, // -||a - b||^2
};

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Norm tolerance for embeddings under Metric::Cosine.
inline constexpr double kUnitNormTolerance = 1e-5;

/// Dense row-major float matrix. One row per token embedding.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
            : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const noexcept {
        return rows_;
    }
    std::size_t cols() const noexcept {
        return cols_;
    }
    bool empty() const noexcept {
        return rows_ == 0;
    }

    std::span<float> row(std::size_t i) noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const float> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    float& operator()(std::size_t i, std::size_t j) noexcept {
        return data_[i * cols_ + j];
    }
    float operator()(std::size_t i, std::size_t j) const noexcept {
        return data_[i * cols_ + j];
    }

    std::span<const float> data() const noexcept {
        return data_;
    }
    std::span<float> data() noexcept {
        return data_;
    }

    void append_row(std::span<const float> values);

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// E_q: a fixed-size bag of query embeddings.
struct QueryRepresentation {
    std::string query_id;
    Matrix embeddings;

    bool operator==(const QueryRepresentation&) const = default;
};

/// E_d: a variable-length bag of document embeddings after filtering.
struct DocRepresentation {
    std::string doc_id;
    Matrix embeddings;
    /// Rows that came from document text rather than the [CLS]/[D] markers.
    std::size_t content_rows = 0;

    std::size_t length() const noexcept {
        return embeddings.rows();
    }

    bool operator==(const DocRepresentation&) const = default;
};

/// Throws NonFinite / DimensionMismatch / InvalidArgument when rows are not
/// finite, not `dim` wide, or (under Cosine) not unit norm within `tolerance`.
void validate_embeddings(
        const Matrix& m,
        std::size_t dim,
        Metric metric,
        double tolerance = kUnitNormTolerance);

double pair_similarity(
        std::span<const float> a,
        std::span<const float> b,
        Metric metric);

/// Sum over query rows of the best-matching document row.
double maxsim_score(const Matrix& query, const Matrix& doc, Metric metric);
double maxsim_score(
        const QueryRepresentation& q,
        const DocRepresentation& d,
        Metric metric);

/// Same as maxsim_score with the max replaced by the mean over doc rows.
double avgsim_score(const Matrix& query, const Matrix& doc, Metric metric);

/// Per query row, the index of the winning doc row (first index on ties).
std::vector<std::size_t> maxsim_argmax(
        const Matrix& query,
        const Matrix& doc,
        Metric metric);

/// A stack of documents padded to a common width. Rows at or beyond a
/// document's true length are padding and never take part in the max.
class PaddedDocBatch {
  public:
    PaddedDocBatch(std::size_t width, std::size_t dim);

    static PaddedDocBatch from(std::span<const Matrix* const> docs);

    /// Appends `doc`, padding it up to the batch width.
    void add(const Matrix& doc);
    /// Appends `length` contiguous rows of width dim().
    void add(std::span<const float> rows, std::size_t length);
    /// Appends `doc` with `extra` padding rows beyond its content, growing the
    /// batch width if needed. Padding rows are filled with `fill`.
    void add_padded(const Matrix& doc, std::size_t extra, float fill);

    std::size_t size() const noexcept {
        return lengths_.size();
    }
    std::size_t width() const noexcept {
        return width_;
    }
    std::size_t dim() const noexcept {
        return dim_;
    }
    std::size_t length(std::size_t i) const noexcept {
        return lengths_[i];
    }
    std::span<const float> doc_row(std::size_t doc, std::size_t row) const noexcept {
        return {data_.data() + (doc * width_ + row) * dim_, dim_};
    }
    /// Number of padding cells, i.e. width * size - sum of true lengths.
    std::size_t padding_rows() const noexcept;

  private:
    void grow_width(std::size_t width);

    std::size_t width_;
    std::size_t dim_;
    std::vector<std::size_t> lengths_;
    std::vector<float> data_;
};

std::vector<double> batch_maxsim(
        const Matrix& query,
        const PaddedDocBatch& docs,
        Metric metric);

} // namespace late

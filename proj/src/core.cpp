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

#include "late/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace late {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument:
            return "InvalidArgument";
        case ErrorKind::DimensionMismatch:
            return "DimensionMismatch";
        case ErrorKind::EmptyDocument:
            return "EmptyDocument";
        case ErrorKind::NonFinite:
            return "NonFinite";
        case ErrorKind::MalformedFile:
            return "MalformedFile";
        case ErrorKind::ChecksumMismatch:
            return "ChecksumMismatch";
        case ErrorKind::VersionMismatch:
            return "VersionMismatch";
        case ErrorKind::DuplicateOrdinal:
            return "DuplicateOrdinal";
        case ErrorKind::Untrained:
            return "Untrained";
        case ErrorKind::Io:
            return "Io";
        case ErrorKind::Data:
            return "Data";
    }
    return "Unknown";
}

std::string_view to_string(Metric metric) {
    return metric == Metric::Cosine ? "cosine" : "l2";
}

Metric parse_metric(std::string_view name) {
    if (name == "cosine") {
        return Metric::Cosine;
    }
    if (name == "l2" || name == "neg_squared_l2") {
        return Metric::NegSquaredL2;
    }
    LATE_THROW(InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
    LATE_REQUIRE(
            data_.size() == rows * cols,
            DimensionMismatch,
            "matrix data size does not match shape");
}

void Matrix::append_row(std::span<const float> values) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = values.size();
    }
    LATE_REQUIRE(
            values.size() == cols_,
            DimensionMismatch,
            "row width " + std::to_string(values.size()) + " != " +
                    std::to_string(cols_));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void validate_embeddings(
        const Matrix& m,
        std::size_t dim,
        Metric metric,
        double tolerance) {
    LATE_REQUIRE(
            m.cols() == dim || m.rows() == 0,
            DimensionMismatch,
            "embedding width " + std::to_string(m.cols()) + ", expected " +
                    std::to_string(dim));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sq = 0;
        for (float v : m.row(i)) {
            LATE_REQUIRE(
                    std::isfinite(v),
                    NonFinite,
                    "row " + std::to_string(i) + " has a non-finite value");
            sq += double(v) * double(v);
        }
        if (metric == Metric::Cosine) {
            double norm = std::sqrt(sq);
            LATE_REQUIRE(
                    std::abs(norm - 1.0) <= tolerance,
                    InvalidArgument,
                    "row " + std::to_string(i) + " has norm " +
                            std::to_string(norm) + " under cosine metric");
        }
    }
}

namespace {

// Shared by every scoring path so that exhaustive and batched scores agree
// bit for bit.
inline double similarity(const float* a, const float* b, std::size_t d, Metric metric) {
    double acc = 0;
    if (metric == Metric::Cosine) {
        for (std::size_t k = 0; k < d; ++k) {
            acc += double(a[k]) * double(b[k]);
        }
        return acc;
    }
    for (std::size_t k = 0; k < d; ++k) {
        double diff = double(a[k]) - double(b[k]);
        acc += diff * diff;
    }
    return -acc;
}

void check_shapes(const Matrix& query, std::size_t doc_rows, std::size_t doc_cols) {
    LATE_REQUIRE(doc_rows > 0, EmptyDocument, "document has no embeddings");
    LATE_REQUIRE(
            query.cols() == doc_cols,
            DimensionMismatch,
            "query dim " + std::to_string(query.cols()) + " != doc dim " +
                    std::to_string(doc_cols));
}

} // namespace

double pair_similarity(
        std::span<const float> a,
        std::span<const float> b,
        Metric metric) {
    LATE_REQUIRE(
            a.size() == b.size(),
            DimensionMismatch,
            std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    return similarity(a.data(), b.data(), a.size(), metric);
}

double maxsim_score(const Matrix& query, const Matrix& doc, Metric metric) {
    check_shapes(query, doc.rows(), doc.cols());
    const std::size_t d = query.cols();
    double score = 0;
    for (std::size_t i = 0; i < query.rows(); ++i) {
        const float* q = query.row(i).data();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < doc.rows(); ++j) {
            best = std::max(best, similarity(q, doc.row(j).data(), d, metric));
        }
        score += best;
    }
    return score;
}

double maxsim_score(
        const QueryRepresentation& q,
        const DocRepresentation& d,
        Metric metric) {
    return maxsim_score(q.embeddings, d.embeddings, metric);
}

double avgsim_score(const Matrix& query, const Matrix& doc, Metric metric) {
    check_shapes(query, doc.rows(), doc.cols());
    const std::size_t d = query.cols();
    double score = 0;
    for (std::size_t i = 0; i < query.rows(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < doc.rows(); ++j) {
            sum += similarity(query.row(i).data(), doc.row(j).data(), d, metric);
        }
        score += sum / double(doc.rows());
    }
    return score;
}

std::vector<std::size_t> maxsim_argmax(
        const Matrix& query,
        const Matrix& doc,
        Metric metric) {
    check_shapes(query, doc.rows(), doc.cols());
    std::vector<std::size_t> winners(query.rows(), 0);
    for (std::size_t i = 0; i < query.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < doc.rows(); ++j) {
            double s = similarity(query.row(i).data(), doc.row(j).data(), query.cols(), metric);
            if (s > best) {
                best = s;
                winners[i] = j;
            }
        }
    }
    return winners;
}

PaddedDocBatch::PaddedDocBatch(std::size_t width, std::size_t dim)
        : width_(width), dim_(dim) {}

PaddedDocBatch PaddedDocBatch::from(std::span<const Matrix* const> docs) {
    std::size_t width = 0;
    std::size_t dim = docs.empty() ? 0 : docs.front()->cols();
    for (const Matrix* m : docs) {
        width = std::max(width, m->rows());
    }
    PaddedDocBatch batch(width, dim);
    for (const Matrix* m : docs) {
        batch.add(*m);
    }
    return batch;
}

void PaddedDocBatch::grow_width(std::size_t width) {
    if (width <= width_) {
        return;
    }
    std::vector<float> grown(lengths_.size() * width * dim_, 0.0f);
    for (std::size_t doc = 0; doc < lengths_.size(); ++doc) {
        std::copy_n(
                data_.begin() + doc * width_ * dim_,
                width_ * dim_,
                grown.begin() + doc * width * dim_);
    }
    data_ = std::move(grown);
    width_ = width;
}

void PaddedDocBatch::add(const Matrix& doc) {
    LATE_REQUIRE(
            doc.rows() == 0 || doc.cols() == dim_,
            DimensionMismatch,
            "doc dim " + std::to_string(doc.cols()) + " != batch dim " +
                    std::to_string(dim_));
    add(doc.data(), doc.rows());
}

void PaddedDocBatch::add(std::span<const float> rows, std::size_t length) {
    LATE_REQUIRE(
            rows.size() == length * dim_,
            DimensionMismatch,
            "row data does not match length x dim");
    grow_width(length);
    data_.resize(data_.size() + width_ * dim_, 0.0f);
    std::copy(rows.begin(), rows.end(), data_.end() - std::ptrdiff_t(width_ * dim_));
    lengths_.push_back(length);
}

void PaddedDocBatch::add_padded(const Matrix& doc, std::size_t extra, float fill) {
    grow_width(doc.rows() + extra);
    const std::size_t start = data_.size();
    add(doc);
    std::fill(
            data_.begin() + std::ptrdiff_t(start + doc.rows() * dim_),
            data_.end(),
            fill);
}

std::size_t PaddedDocBatch::padding_rows() const noexcept {
    std::size_t real = 0;
    for (std::size_t len : lengths_) {
        real += len;
    }
    return width_ * lengths_.size() - real;
}

std::vector<double> batch_maxsim(
        const Matrix& query,
        const PaddedDocBatch& docs,
        Metric metric) {
    const std::size_t n = docs.size();
    const std::size_t d = query.cols();
    for (std::size_t doc = 0; doc < n; ++doc) {
        check_shapes(query, docs.length(doc), docs.dim());
    }
    std::vector<double> scores(n, 0.0);
    // Cross-match each query row against all rows of the padded tensor; rows
    // past the true length get -inf and so never win the max-pool.
    constexpr double kPad = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) if (n >= 64)
    for (std::ptrdiff_t doc = 0; doc < std::ptrdiff_t(n); ++doc) {
        const std::size_t len = docs.length(std::size_t(doc));
        double score = 0;
        for (std::size_t i = 0; i < query.rows(); ++i) {
            const float* q = query.row(i).data();
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < docs.width(); ++j) {
                double s = j < len
                        ? similarity(q, docs.doc_row(std::size_t(doc), j).data(), d, metric)
                        : kPad;
                best = std::max(best, s);
            }
            score += best;
        }
        scores[std::size_t(doc)] = score;
    }
    return scores;
}

} // namespace late

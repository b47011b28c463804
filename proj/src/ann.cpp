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

#include "late/ann.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

#include "late/binary_io.hpp"
#include "late/indexer.hpp"
#include "late/random.hpp"

namespace late {

void AnnConfig::validate(std::size_t dim) const {
    LATE_REQUIRE(partitions > 0, InvalidArgument, "partitions must be positive");
    LATE_REQUIRE(probes >= 1 && probes <= partitions, InvalidArgument,
                 "probes must lie in [1, partitions]");
    LATE_REQUIRE(subvectors > 0 && dim % subvectors == 0, InvalidArgument,
                 "subvectors (" + std::to_string(subvectors) + ") must divide dim (" +
                         std::to_string(dim) + ")");
    LATE_REQUIRE(subvectors <= dim, InvalidArgument, "subvectors must not exceed dim");
}

namespace {

double sqdist(const float* a, const double* c, std::size_t d) noexcept {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = double(a[i]) - c[i];
        s += t * t;
    }
    return s;
}

double sqdist(const float* a, const float* b, std::size_t d) noexcept {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = double(a[i]) - double(b[i]);
        s += t * t;
    }
    return s;
}

// Strict (distance, ordinal) order shared by every search path.
struct HitLess {
    bool operator()(const AnnHit& a, const AnnHit& b) const noexcept {
        return a.distance < b.distance || (a.distance == b.distance && a.ordinal < b.ordinal);
    }
};

class TopK {
  public:
    explicit TopK(std::size_t k) : k_(k) {}

    void push(AnnHit h) {
        if (heap_.size() < k_) {
            heap_.push(h);
        } else if (HitLess{}(h, heap_.top())) {
            heap_.pop();
            heap_.push(h);
        }
    }

    std::vector<AnnHit> sorted() && {
        std::vector<AnnHit> out;
        out.reserve(heap_.size());
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

  private:
    std::size_t k_;
    std::priority_queue<AnnHit, std::vector<AnnHit>, HitLess> heap_; // worst on top
};

} // namespace

// ---------------------------------------------------------------------------
// k-means

KMeansResult kmeans(const Matrix& x, std::size_t k, std::size_t iters, std::uint64_t seed) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    LATE_REQUIRE(k > 0, InvalidArgument, "k must be positive");
    LATE_REQUIRE(n >= k, InvalidArgument,
                 "need at least " + std::to_string(k) + " vectors, got " + std::to_string(n));
    const float* px = x.data().data();
    auto point = [&](std::size_t i) { return px + i * d; };

    std::vector<double> c(k * d);
    auto set_centroid = [&](std::size_t j, std::size_t i) {
        std::copy(point(i), point(i) + d, c.begin() + std::ptrdiff_t(j * d));
    };

    // k-means++ seeding
    SeededRng rng(mix64(seed ^ 0x6b6d65616e73ull));
    std::vector<double> d2(n);
    std::vector<char> chosen(n, 0);
    std::size_t first = rng.below(n);
    set_centroid(0, first);
    chosen[first] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = sqdist(point(i), c.data(), d);
    }
    for (std::size_t j = 1; j < k; ++j) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0) {
            double r = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0) {
                    continue;
                }
                pick = i;
                r -= d2[i];
                if (r < 0) {
                    break;
                }
            }
        } else {
            // every point coincides with a centroid; take the first unused one
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                }
            }
        }
        set_centroid(j, pick);
        chosen[pick] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sqdist(point(i), c.data() + j * d, d));
        }
    }

    KMeansResult out;
    out.assignment.assign(n, 0);
    std::vector<double> best(n);
    std::vector<std::size_t> counts(k);
    const auto nn = std::ptrdiff_t(n);

    for (std::size_t t = 0;; ++t) {
        std::size_t changed = 0;
#pragma omp parallel for schedule(static) reduction(+ : changed)
        for (std::ptrdiff_t ii = 0; ii < nn; ++ii) {
            const auto i = std::size_t(ii);
            std::uint32_t arg = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double dist = sqdist(point(i), c.data() + j * d, d);
                if (dist < bd) {
                    bd = dist;
                    arg = std::uint32_t(j);
                }
            }
            if (t == 0 || arg != out.assignment[i]) {
                ++changed;
            }
            out.assignment[i] = arg;
            best[i] = bd;
        }
        out.sse_history.push_back(std::accumulate(best.begin(), best.end(), 0.0));
        if (t == iters || (t > 0 && changed == 0)) {
            break;
        }

        std::fill(counts.begin(), counts.end(), 0);
        for (auto a : out.assignment) {
            ++counts[a];
        }
        for (std::size_t e = 0; e < k; ++e) {
            if (counts[e] != 0) {
                continue;
            }
            const auto largest = std::size_t(std::max_element(counts.begin(), counts.end()) - counts.begin());
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (out.assignment[i] == largest && (far == n || best[i] > best[far])) {
                    far = i;
                }
            }
            set_centroid(e, far);
            out.assignment[far] = std::uint32_t(e);
            best[far] = 0;
            --counts[largest];
            counts[e] = 1;
        }

        std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* cj = c.data() + out.assignment[i] * d;
            for (std::size_t q = 0; q < d; ++q) {
                cj[q] += double(point(i)[q]);
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t q = 0; q < d; ++q) {
                c[j * d + q] /= double(counts[j]);
            }
        }
    }

    out.centroids = Matrix(k, d);
    std::transform(c.begin(), c.end(), out.centroids.data().begin(), [](double v) { return float(v); });
    return out;
}

Matrix sample_rows(std::span<const float> rows, std::size_t dim, std::size_t n, std::uint64_t seed) {
    LATE_REQUIRE(dim > 0 && rows.size() % dim == 0, DimensionMismatch, "rows are not a multiple of dim");
    const std::size_t total = rows.size() / dim;
    Matrix out;
    if (n >= total) {
        return Matrix(total, dim, std::vector<float>(rows.begin(), rows.end()));
    }
    // selection sampling: each row kept with probability needed / remaining
    SeededRng rng(mix64(seed ^ 0x73616d706c65ull));
    std::vector<float> data;
    data.reserve(n * dim);
    std::size_t needed = n;
    for (std::size_t i = 0; i < total && needed > 0; ++i) {
        if (rng.below(total - i) < needed) {
            data.insert(data.end(), rows.begin() + std::ptrdiff_t(i * dim),
                        rows.begin() + std::ptrdiff_t((i + 1) * dim));
            --needed;
        }
    }
    return Matrix(n, dim, std::move(data));
}

// ---------------------------------------------------------------------------
// Product quantization

ProductQuantizer::ProductQuantizer(std::size_t dim, std::size_t subvectors, std::vector<float> codebooks)
        : dim_(dim), subvectors_(subvectors), codebooks_(std::move(codebooks)) {
    LATE_REQUIRE(subvectors > 0 && dim % subvectors == 0, InvalidArgument,
                 "subvectors (" + std::to_string(subvectors) + ") must divide dim (" +
                         std::to_string(dim) + ")");
    sub_dim_ = dim / subvectors;
    LATE_REQUIRE(codebooks_.size() == subvectors * kCodewords * sub_dim_, DimensionMismatch,
                 "codebook size does not match dim and subvectors");
}

ProductQuantizer ProductQuantizer::train(
        const Matrix& vectors,
        std::size_t subvectors,
        std::size_t iters,
        std::uint64_t seed) {
    const std::size_t dim = vectors.cols();
    LATE_REQUIRE(subvectors > 0 && dim % subvectors == 0, InvalidArgument,
                 "subvectors (" + std::to_string(subvectors) + ") must divide dim (" +
                         std::to_string(dim) + ")");
    LATE_REQUIRE(vectors.rows() >= kCodewords, InvalidArgument,
                 "product quantizer needs at least 256 training vectors, got " +
                         std::to_string(vectors.rows()));
    const std::size_t sub = dim / subvectors;
    std::vector<float> books(subvectors * kCodewords * sub);
    for (std::size_t j = 0; j < subvectors; ++j) {
        Matrix slice(vectors.rows(), sub);
        for (std::size_t i = 0; i < vectors.rows(); ++i) {
            const auto r = vectors.row(i);
            std::copy(r.begin() + std::ptrdiff_t(j * sub), r.begin() + std::ptrdiff_t((j + 1) * sub),
                      slice.row(i).begin());
        }
        const auto km = kmeans(slice, kCodewords, iters, mix64(seed + j));
        std::copy(km.centroids.data().begin(), km.centroids.data().end(),
                  books.begin() + std::ptrdiff_t(j * kCodewords * sub));
    }
    return ProductQuantizer(dim, subvectors, std::move(books));
}

void ProductQuantizer::encode_into(std::span<const float> v, std::uint8_t* out) const {
    LATE_REQUIRE(v.size() == dim_, DimensionMismatch,
                 "vector has dim " + std::to_string(v.size()) + ", quantizer " + std::to_string(dim_));
    for (std::size_t j = 0; j < subvectors_; ++j) {
        const float* s = v.data() + j * sub_dim_;
        std::size_t arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < kCodewords; ++c) {
            const double dist = sqdist(s, codeword(j, c).data(), sub_dim_);
            if (dist < bd) {
                bd = dist;
                arg = c;
            }
        }
        out[j] = std::uint8_t(arg);
    }
}

std::vector<std::uint8_t> ProductQuantizer::encode(std::span<const float> v) const {
    std::vector<std::uint8_t> out(subvectors_);
    encode_into(v, out.data());
    return out;
}

std::vector<float> ProductQuantizer::reconstruct(std::span<const std::uint8_t> code) const {
    LATE_REQUIRE(code.size() == subvectors_, DimensionMismatch, "code length does not match subvectors");
    std::vector<float> out;
    out.reserve(dim_);
    for (std::size_t j = 0; j < subvectors_; ++j) {
        const auto w = codeword(j, code[j]);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

std::vector<double> ProductQuantizer::distance_table(std::span<const float> query) const {
    LATE_REQUIRE(query.size() == dim_, DimensionMismatch,
                 "query has dim " + std::to_string(query.size()) + ", quantizer " + std::to_string(dim_));
    std::vector<double> table(subvectors_ * kCodewords);
    for (std::size_t j = 0; j < subvectors_; ++j) {
        for (std::size_t c = 0; c < kCodewords; ++c) {
            table[j * kCodewords + c] = sqdist(query.data() + j * sub_dim_, codeword(j, c).data(), sub_dim_);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// IVF-PQ

IvfPqIndex::IvfPqIndex(Matrix centroids, ProductQuantizer pq, Metric metric, AnnConfig cfg)
        : centroids_(std::move(centroids)),
          pq_(std::move(pq)),
          metric_(metric),
          cfg_(cfg),
          lists_(centroids_.rows()) {
    cfg_.partitions = centroids_.rows();
    LATE_REQUIRE(pq_.dim() == centroids_.cols(), DimensionMismatch,
                 "quantizer and centroids disagree on dim");
    cfg_.validate(centroids_.cols());
}

IvfPqIndex IvfPqIndex::train(const Matrix& sample, const AnnConfig& cfg, Metric metric) {
    cfg.validate(sample.cols());
    auto coarse = kmeans(sample, cfg.partitions, cfg.kmeans_iters, cfg.seed);
    auto pq = ProductQuantizer::train(sample, cfg.subvectors, cfg.kmeans_iters, mix64(cfg.seed ^ 0x7071ull));
    return IvfPqIndex(std::move(coarse.centroids), std::move(pq), metric, cfg);
}

std::vector<std::uint32_t> IvfPqIndex::nearest_cells(std::span<const float> query, std::size_t n) const {
    LATE_REQUIRE(query.size() == dim(), DimensionMismatch,
                 "query has dim " + std::to_string(query.size()) + ", index " + std::to_string(dim()));
    n = std::min(n, partitions());
    std::vector<AnnHit> cells(partitions());
    for (std::size_t c = 0; c < partitions(); ++c) {
        cells[c] = {std::uint32_t(c), sqdist(query.data(), centroids_.row(c).data(), dim())};
    }
    std::partial_sort(cells.begin(), cells.begin() + std::ptrdiff_t(n), cells.end(), HitLess{});
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = cells[i].ordinal;
    }
    return out;
}

void IvfPqIndex::add(std::uint32_t ordinal, std::span<const float> vec) {
    if (partitions() == 0) {
        throw Error(ErrorKind::Untrained, "add() on an untrained IVF-PQ index");
    }
    LATE_REQUIRE(vec.size() == dim(), DimensionMismatch,
                 "vector has dim " + std::to_string(vec.size()) + ", index " + std::to_string(dim()));
    if (ordinal < present_.size() && present_[ordinal]) {
        throw Error(ErrorKind::DuplicateOrdinal, "ordinal " + std::to_string(ordinal) + " already indexed");
    }
    const auto cell = nearest_cells(vec, 1)[0];
    auto& list = lists_[cell];
    list.ordinals.push_back(ordinal);
    const auto at = list.codes.size();
    list.codes.resize(at + pq_.subvectors());
    pq_.encode_into(vec, list.codes.data() + at);
    if (ordinal >= present_.size()) {
        present_.resize(std::size_t(ordinal) + 1, false);
    }
    present_[ordinal] = true;
    ++count_;
}

void IvfPqIndex::add_rows(std::span<const float> rows, std::uint32_t first) {
    LATE_REQUIRE(dim() > 0 && rows.size() % dim() == 0, DimensionMismatch,
                 "rows are not a multiple of the index dim");
    const std::size_t n = rows.size() / dim();
    LATE_REQUIRE(std::uint64_t(first) + n <= std::uint64_t(std::numeric_limits<std::uint32_t>::max()) + 1,
                 InvalidArgument, "ordinals exceed 32 bits");
    for (std::size_t i = 0; i < n; ++i) {
        add(std::uint32_t(first + i), rows.subspan(i * dim(), dim()));
    }
}

std::vector<AnnHit> IvfPqIndex::search(
        std::span<const float> query,
        std::size_t k_prime,
        std::size_t probes) const {
    LATE_REQUIRE(k_prime > 0, InvalidArgument, "k' must be positive");
    LATE_REQUIRE(probes >= 1 && probes <= partitions(), InvalidArgument,
                 "probes must lie in [1, " + std::to_string(partitions()) + "]");
    LATE_REQUIRE(count_ > 0, InvalidArgument, "search on an empty IVF-PQ index");
    const auto cells = nearest_cells(query, probes);
    const auto table = pq_.distance_table(query);
    const std::size_t s = pq_.subvectors();

    TopK top(k_prime);
    for (auto cell : cells) {
        const auto& list = lists_[cell];
        for (std::size_t e = 0; e < list.ordinals.size(); ++e) {
            const std::uint8_t* code = list.codes.data() + e * s;
            double dist = 0;
            for (std::size_t j = 0; j < s; ++j) {
                dist += table[j * ProductQuantizer::kCodewords + code[j]];
            }
            top.push({list.ordinals[e], dist});
        }
    }
    return std::move(top).sorted();
}

namespace {
constexpr std::string_view kIvfMagic = "LSIVFPQ1";
constexpr std::uint32_t kIvfVersion = 1;
} // namespace

void IvfPqIndex::save(const std::filesystem::path& path) const {
    io::ByteWriter w;
    w.raw(kIvfMagic);
    w.u32(kIvfVersion);
    w.u32(std::uint32_t(partitions()));
    w.u32(std::uint32_t(cfg_.probes));
    w.u32(std::uint32_t(pq_.subvectors()));
    w.u32(std::uint32_t(dim()));
    w.u8(std::uint8_t(metric_));
    w.u64(cfg_.seed);
    for (float v : centroids_.data()) {
        w.f32(v);
    }
    for (float v : pq_.codebooks()) {
        w.f32(v);
    }
    w.u64(count_);
    for (const auto& list : lists_) {
        w.u32(std::uint32_t(list.ordinals.size()));
        for (std::size_t e = 0; e < list.ordinals.size(); ++e) {
            w.u32(list.ordinals[e]);
            w.raw(std::span(list.codes).subspan(e * pq_.subvectors(), pq_.subvectors()));
        }
    }
    w.seal();
    io::write_file(path, w.bytes());
}

IvfPqIndex IvfPqIndex::load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(io::verify_sealed(bytes, path.string()), path.string());
    if (r.remaining() < kIvfMagic.size() || r.str(kIvfMagic.size()) != kIvfMagic) {
        throw Error(ErrorKind::MalformedFile, path.string() + ": not an IVF-PQ file");
    }
    const auto version = r.u32();
    if (version != kIvfVersion) {
        r.fail(ErrorKind::VersionMismatch, "version " + std::to_string(version) + ", expected " +
                                                   std::to_string(kIvfVersion));
    }
    AnnConfig cfg;
    cfg.partitions = r.u32();
    cfg.probes = r.u32();
    cfg.subvectors = r.u32();
    const std::size_t dim = r.u32();
    const auto metric_byte = r.u8();
    if (metric_byte > std::uint8_t(Metric::NegSquaredL2)) {
        r.fail(ErrorKind::MalformedFile, "unknown metric " + std::to_string(metric_byte));
    }
    cfg.seed = r.u64();
    if (cfg.partitions == 0 || dim == 0 || cfg.subvectors == 0 || dim % cfg.subvectors != 0 ||
        cfg.probes == 0 || cfg.probes > cfg.partitions) {
        r.fail(ErrorKind::MalformedFile, "inconsistent header");
    }
    auto read_floats = [&](std::size_t n) {
        if (r.remaining() / 4 < n) {
            r.fail(ErrorKind::MalformedFile, "truncated");
        }
        std::vector<float> out(n);
        for (auto& v : out) {
            v = r.f32();
        }
        return out;
    };
    Matrix centroids(cfg.partitions, dim, read_floats(cfg.partitions * dim));
    ProductQuantizer pq(dim, cfg.subvectors, read_floats(ProductQuantizer::kCodewords * dim));
    IvfPqIndex idx(std::move(centroids), std::move(pq), Metric(metric_byte), cfg);

    const auto total = r.u64();
    const std::size_t s = cfg.subvectors;
    for (auto& list : idx.lists_) {
        const auto n = r.u32();
        if (r.remaining() / (4 + s) < n) {
            r.fail(ErrorKind::MalformedFile, "truncated inverted list");
        }
        list.ordinals.resize(n);
        list.codes.resize(std::size_t(n) * s);
        for (std::uint32_t e = 0; e < n; ++e) {
            const auto ord = r.u32();
            if (ord < idx.present_.size() && idx.present_[ord]) {
                r.fail(ErrorKind::DuplicateOrdinal, "ordinal " + std::to_string(ord) + " appears twice");
            }
            if (ord >= idx.present_.size()) {
                idx.present_.resize(std::size_t(ord) + 1, false);
            }
            idx.present_[ord] = true;
            list.ordinals[e] = ord;
            const auto code = r.raw(s);
            std::copy(code.begin(), code.end(), list.codes.begin() + std::ptrdiff_t(e * s));
        }
        idx.count_ += n;
    }
    if (idx.count_ != total) {
        r.fail(ErrorKind::MalformedFile, "list lengths sum to " + std::to_string(idx.count_) +
                                                 ", header says " + std::to_string(total));
    }
    if (r.remaining() != 0) {
        r.fail(ErrorKind::MalformedFile, "trailing bytes");
    }
    return idx;
}

IvfPqIndex build_ivfpq(const EmbeddingIndex& index, const AnnConfig& cfg) {
    const auto sample = sample_rows(index.embeddings(), index.dim(), cfg.sample_size(), cfg.seed);
    auto ivf = IvfPqIndex::train(sample, cfg, index.metric());
    ivf.add_rows(index.embeddings(), 0);
    return ivf;
}

// ---------------------------------------------------------------------------
// Exact search

std::vector<AnnHit> exact_flat_search(
        std::span<const float> rows,
        std::size_t dim,
        std::span<const float> query,
        std::size_t k_prime,
        Metric metric) {
    LATE_REQUIRE(k_prime > 0, InvalidArgument, "k' must be positive");
    LATE_REQUIRE(dim > 0 && rows.size() % dim == 0, DimensionMismatch, "rows are not a multiple of dim");
    LATE_REQUIRE(query.size() == dim, DimensionMismatch,
                 "query has dim " + std::to_string(query.size()) + ", rows " + std::to_string(dim));
    const std::size_t n = rows.size() / dim;
    LATE_REQUIRE(n <= std::size_t(std::numeric_limits<std::uint32_t>::max()) + 1, InvalidArgument,
                 "ordinals exceed 32 bits");
    TopK top(k_prime);
    for (std::size_t i = 0; i < n; ++i) {
        top.push({std::uint32_t(i), -pair_similarity(query, rows.subspan(i * dim, dim), metric)});
    }
    return std::move(top).sorted();
}

} // namespace late

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

#include "late/indexer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "late/binary_io.hpp"
#include "late/half.hpp"
#include "test_util.hpp"

namespace late {
namespace {

using testing::TempDir;

std::vector<CorpusDoc> random_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> len(3, 40);
    std::uniform_int_distribution<int> w(0, 300);
    std::uniform_int_distribution<int> p(0, 9);
    std::vector<CorpusDoc> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const int l = len(rng);
        for (int t = 0; t < l; ++t) {
            text += "w" + std::to_string(w(rng));
            text += p(rng) == 0 ? ", " : " ";
        }
        out.push_back({"d" + std::to_string(i), text});
    }
    return out;
}

Encoder small_encoder(std::size_t dim = 16) {
    EncoderConfig cfg;
    cfg.dim = dim;
    cfg.base_dim = 32;
    cfg.query_len = 8;
    cfg.seed = 5;
    return Encoder(cfg, ProjectionLayer::random(cfg.base_dim, cfg.dim, 9));
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
    return io::read_file(p);
}

void flip_byte(const std::filesystem::path& p, std::size_t offset) {
    auto bytes = io::read_file(p);
    bytes.at(offset) ^= 0x01;
    io::write_file(p, bytes);
}

// ---------------------------------------------------------------------------
// Half precision oracle: brute force over every finite half.

struct HalfTable {
    std::vector<std::pair<double, std::uint16_t>> finite; // sorted by value, -0 dropped

    HalfTable() {
        for (std::uint32_t h = 0; h < 0x10000; ++h) {
            const std::uint32_t exp = (h >> 10) & 0x1f;
            if (exp == 0x1f || h == 0x8000) {
                continue;
            }
            const std::uint32_t mant = h & 0x3ff;
            double v = exp == 0 ? std::ldexp(double(mant), -24)
                                : std::ldexp(double(mant | 0x400), int(exp) - 25);
            if (h & 0x8000) {
                v = -v;
            }
            finite.emplace_back(v, std::uint16_t(h));
        }
        std::sort(finite.begin(), finite.end());
    }

    // Nearest finite half, ties to the even mantissa.
    std::uint16_t nearest(double x) const {
        auto it = std::lower_bound(finite.begin(), finite.end(), std::make_pair(x, std::uint16_t(0)));
        if (it == finite.end()) {
            return std::prev(it)->second;
        }
        if (it == finite.begin()) {
            return it->second;
        }
        auto lo = std::prev(it);
        const double dlo = x - lo->first;
        const double dhi = it->first - x;
        if (dlo < dhi) {
            return lo->second;
        }
        if (dhi < dlo) {
            return it->second;
        }
        return (lo->second & 1) == 0 ? lo->second : it->second;
    }
};

TEST(HalfTest, MatchesBruteForceNearestOnUnitRange) {
    static const HalfTable table;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int i = 0; i < 200000; ++i) {
        const float x = u(rng);
        const std::uint16_t got = float_to_half(x);
        const std::uint16_t want = table.nearest(double(x));
        // signed zero: both encodings compare equal as values
        if (half_to_float(got) == 0.0f && half_to_float(want) == 0.0f) {
            continue;
        }
        ASSERT_EQ(got, want) << "x=" << x;
    }
}

TEST(HalfTest, ExactTiesRoundToEven) {
    static const HalfTable table;
    // midpoints between consecutive halves are exactly representable in float
    for (std::size_t i = 0; i + 1 < table.finite.size(); i += 37) {
        const double mid = (table.finite[i].first + table.finite[i + 1].first) / 2;
        const float f = float(mid);
        ASSERT_EQ(double(f), mid);
        const std::uint16_t got = float_to_half(f);
        if (half_to_float(got) == 0.0f) {
            continue;
        }
        ASSERT_EQ(got, table.nearest(mid)) << "mid=" << mid;
    }
}

TEST(HalfTest, EveryHalfRoundTrips) {
    for (std::uint32_t h = 0; h < 0x10000; ++h) {
        const float f = half_to_float(std::uint16_t(h));
        if (std::isnan(f)) {
            EXPECT_TRUE(std::isnan(half_to_float(float_to_half(f))));
            continue;
        }
        ASSERT_EQ(float_to_half(f), h) << std::hex << h;
    }
}

TEST(HalfTest, OverflowSaturatesToInfinity) {
    EXPECT_EQ(float_to_half(1e6f), 0x7c00);
    EXPECT_EQ(float_to_half(-1e6f), 0xfc00);
    EXPECT_EQ(float_to_half(65504.0f), 0x7bff);
}

// ---------------------------------------------------------------------------
// Bucketing

TEST(BucketBatchesTest, SortsThenChunks) {
    const std::vector<std::size_t> lengths{5, 50, 7, 49};
    const auto batches = bucket_batches(lengths, 2);
    ASSERT_EQ(batches.size(), 2u);
    EXPECT_EQ(batches[0].members, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(batches[1].members, (std::vector<std::size_t>{3, 1}));
    EXPECT_EQ(batches[0].padded_width, 7u);
    EXPECT_EQ(batches[1].padded_width, 50u);
}

TEST(BucketBatchesTest, UniformLengthsWasteNothing) {
    const std::vector<std::size_t> lengths(37, 12);
    EXPECT_EQ(padding_waste(bucket_batches(lengths, 8), lengths), 0u);
}

TEST(BucketBatchesTest, NeverWastesMoreThanUnsortedBatching) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> len(1, 180);
        std::vector<std::size_t> lengths(1000);
        for (auto& l : lengths) {
            l = len(rng);
        }
        const auto sorted = padding_waste(bucket_batches(lengths, 32), lengths);
        const auto unsorted = padding_waste(sequential_batches(lengths, 32), lengths);
        EXPECT_LE(sorted, unsorted) << "seed " << seed;
    }
}

TEST(BucketBatchesTest, EveryDocAppearsOnceAndBatchesRespectSize) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 60);
    std::vector<std::size_t> lengths(101);
    for (auto& l : lengths) {
        l = len(rng);
    }
    std::vector<std::size_t> seen;
    std::size_t prev_max = 0;
    for (const auto& b : bucket_batches(lengths, 10)) {
        EXPECT_LE(b.members.size(), 10u);
        EXPECT_GE(b.padded_width, prev_max);
        prev_max = b.padded_width;
        for (auto m : b.members) {
            EXPECT_LE(lengths[m], b.padded_width);
            seen.push_back(m);
        }
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        ASSERT_EQ(seen[i], i);
    }
}

TEST(IndexerConfigTest, Validation) {
    IndexerConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.batch_size = cfg.group_size + 1;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.bytes_per_dim = 3;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.worker_count = 0;
    EXPECT_THROW(cfg.validate(), Error);
}

// ---------------------------------------------------------------------------
// Index files

DocRepresentation doc_with_rows(std::string id, std::size_t rows, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix m = testing::random_unit_rows(rows, dim, rng);
    return {std::move(id), std::move(m), rows};
}

TEST(IndexWriterTest, PayloadSizeFollowsRowCount) {
    TempDir tmp;
    std::vector<DocRepresentation> docs{
            doc_with_rows("a", 4, 8, 1), doc_with_rows("b", 2, 8, 2), doc_with_rows("c", 7, 8, 3)};
    const auto m = write_index(docs, 8, Metric::Cosine, 4, tmp.path());
    EXPECT_EQ(m.embedding_count, 13u);
    EXPECT_EQ(payload_bytes(m.embedding_count, 8, 4), 416u);
    // body plus the 4-byte checksum
    EXPECT_EQ(std::filesystem::file_size(tmp.path() / "payload.bin"), 416u + 4);

    const auto idx = EmbeddingIndex::open(tmp.path());
    EXPECT_EQ(idx.doc_count(), 3u);
    EXPECT_EQ(idx.embedding_count(), 13u);
    EXPECT_EQ(std::vector<std::uint32_t>(idx.doclens().begin(), idx.doclens().end()),
              (std::vector<std::uint32_t>{4, 2, 7}));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        EXPECT_EQ(idx.doc_matrix(i), docs[i].embeddings);
        EXPECT_EQ(idx.doc_id(i), docs[i].doc_id);
        EXPECT_EQ(idx.ordinal_of(docs[i].doc_id), std::uint32_t(i));
    }
    EXPECT_FALSE(idx.ordinal_of("zzz").has_value());
}

TEST(IndexWriterTest, EmptyIndexIsMetadataOnly) {
    TempDir tmp;
    write_index({}, 8, Metric::Cosine, 4, tmp.path());
    const auto idx = EmbeddingIndex::open(tmp.path());
    EXPECT_EQ(idx.doc_count(), 0u);
    EXPECT_EQ(std::filesystem::file_size(tmp.path() / "payload.bin"), 4u);
    std::uint64_t metadata = 0;
    for (auto name : index_files()) {
        if (name != "payload.bin") {
            metadata += std::filesystem::file_size(tmp.path() / name);
        }
    }
    EXPECT_EQ(footprint(idx), metadata + 4);
}

TEST(IndexWriterTest, RejectsBadDocuments) {
    TempDir tmp;
    IndexWriter w(tmp.path(), 8, Metric::Cosine, 4);
    w.add(doc_with_rows("a", 2, 8, 1));
    EXPECT_THROW(w.add(doc_with_rows("a", 2, 8, 2)), Error);
    try {
        w.add(doc_with_rows("b", 2, 4, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
    try {
        w.add(DocRepresentation{"c", Matrix(0, 8), 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyDocument);
    }
    EXPECT_THROW(w.add(doc_with_rows("tab\there", 2, 8, 3)), Error);
}

TEST(IndexWriterTest, FootprintIsExact) {
    TempDir tmp;
    std::vector<DocRepresentation> docs;
    for (int i = 0; i < 20; ++i) {
        docs.push_back(doc_with_rows("doc" + std::to_string(i), 1 + i % 7, 16, i));
    }
    std::uint64_t payload[2];
    for (std::size_t bpd : {2u, 4u}) {
        const auto dir = tmp.path() / std::to_string(bpd);
        const auto m = write_index(docs, 16, Metric::NegSquaredL2, bpd, dir);
        std::uint64_t sum = 0;
        for (auto name : index_files()) {
            sum += std::filesystem::file_size(dir / name);
        }
        EXPECT_EQ(footprint(dir), sum);
        EXPECT_EQ(footprint(EmbeddingIndex::open(dir)), sum);

        // payload + doclens + emb2doc + checksums + text files
        const auto text = std::filesystem::file_size(dir / "manifest.json") +
                          std::filesystem::file_size(dir / "docids.tsv") +
                          std::filesystem::file_size(dir / "skipped.tsv");
        const auto expect = payload_bytes(m.embedding_count, 16, bpd) + 4 +
                            (4 + 4 * m.doc_count + 4) + (8 + 4 * m.embedding_count + 4) + text;
        EXPECT_EQ(sum, expect);
        payload[bpd / 4] = std::filesystem::file_size(dir / "payload.bin") - 4;
    }
    EXPECT_EQ(payload[0] * 2, payload[1]);
}

TEST(FootprintTest, LargeCollectionEstimate) {
    // 8.8M passages at about 68 stored rows each
    constexpr double kGiB = double(1ull << 30);
    const double gib128 = double(estimated_rerank_bytes(8'800'000, 68, 128, 2)) / kGiB;
    EXPECT_NEAR(gib128, 143, 1.0);
    const double gib24 = double(estimated_rerank_bytes(8'800'000, 68, 24, 2)) / kGiB;
    EXPECT_NEAR(gib24, 27, 1.0);
    EXPECT_EQ(payload_bytes(600'000'000, 128, 2), 153'600'000'000ull);
}

// ---------------------------------------------------------------------------
// Building from text

TEST(BuildIndexTest, RoundTripIsBitExactInF32) {
    TempDir tmp;
    const auto corpus = random_corpus(60, 1);
    const auto enc = small_encoder();
    IndexerConfig cfg;
    cfg.batch_size = 8;
    const auto stats = build_index(corpus, enc, cfg, tmp.path());
    EXPECT_EQ(stats.indexed, corpus.size());
    EXPECT_EQ(enc.doc_encodes(), corpus.size());

    const auto idx = EmbeddingIndex::open(tmp.path());
    ASSERT_EQ(idx.doc_count(), corpus.size());
    ASSERT_TRUE(idx.manifest().encoder.has_value());
    EXPECT_EQ(idx.manifest().encoder->seed, 5u);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto rep = encode_doc(corpus[i].text, enc.config(), enc.projection());
        ASSERT_EQ(idx.doc_matrix(i), rep.embeddings) << i;
        EXPECT_EQ(idx.doc_id(i), corpus[i].id);
    }
}

TEST(BuildIndexTest, HalfPrecisionErrorIsBounded) {
    TempDir tmp;
    const auto corpus = random_corpus(40, 2);
    const auto enc = small_encoder();
    IndexerConfig cfg;
    cfg.bytes_per_dim = 2;
    build_index(corpus, enc, cfg, tmp.path());
    const auto idx = EmbeddingIndex::open(tmp.path());
    double worst = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto rep = encode_doc(corpus[i].text, enc.config(), enc.projection());
        const auto got = idx.doc_rows(i);
        const auto want = rep.embeddings.data();
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            worst = std::max(worst, double(std::abs(got[k] - want[k])));
        }
    }
    EXPECT_LE(worst, std::ldexp(1.0, -10));
}

TEST(BuildIndexTest, DeterministicAcrossRunsWorkersAndGroups) {
    TempDir tmp;
    const auto corpus = random_corpus(150, 3);
    const auto enc = small_encoder();
    IndexerConfig base;
    base.batch_size = 16;
    base.worker_count = 1;
    build_index(corpus, enc, base, tmp.path() / "a");
    build_index(corpus, enc, base, tmp.path() / "b");

    IndexerConfig other = base;
    other.worker_count = 8;
    other.group_size = 40;
    other.batch_size = 7;
    build_index(corpus, enc, other, tmp.path() / "c");

    for (auto name : index_files()) {
        const auto a = file_bytes(tmp.path() / "a" / name);
        EXPECT_EQ(a, file_bytes(tmp.path() / "b" / name)) << name;
        EXPECT_EQ(a, file_bytes(tmp.path() / "c" / name)) << name;
    }
}

TEST(BuildIndexTest, PunctuationOnlyDocumentIsSkipped) {
    TempDir tmp;
    auto corpus = random_corpus(10, 4);
    corpus.insert(corpus.begin() + 3, CorpusDoc{"punct", ", . ; !!"});
    const auto enc = small_encoder();
    const auto stats = build_index(corpus, enc, IndexerConfig{}, tmp.path());
    EXPECT_EQ(stats.indexed, 10u);
    ASSERT_EQ(stats.skipped.size(), 1u);
    EXPECT_EQ(stats.skipped[0].id, "punct");

    const auto idx = EmbeddingIndex::open(tmp.path());
    EXPECT_EQ(idx.doc_count(), corpus.size() - 1);
    ASSERT_EQ(idx.skipped().size(), 1u);
    EXPECT_EQ(idx.skipped()[0].id, "punct");
    EXPECT_FALSE(idx.ordinal_of("punct").has_value());
    EXPECT_EQ(idx.doc_id(3), "d3");
}

TEST(BuildIndexTest, EmbToDocIsMonotoneAndOnto) {
    TempDir tmp;
    const auto corpus = random_corpus(30, 5);
    build_index(corpus, small_encoder(), IndexerConfig{}, tmp.path());
    const auto idx = EmbeddingIndex::open(tmp.path());
    const auto e2d = idx.emb2doc();
    EXPECT_TRUE(std::is_sorted(e2d.begin(), e2d.end()));
    std::vector<std::size_t> counts(idx.doc_count(), 0);
    for (auto d : e2d) {
        ++counts.at(d);
    }
    for (std::size_t d = 0; d < idx.doc_count(); ++d) {
        EXPECT_EQ(counts[d], idx.doclens()[d]);
    }
    std::uint64_t total = 0;
    for (auto l : idx.doclens()) {
        total += l;
    }
    EXPECT_EQ(total, idx.embedding_count());
    EXPECT_EQ(idx.embeddings().size(), total * idx.dim());
}

TEST(BuildIndexTest, RejectsEmptyCorpus) {
    TempDir tmp;
    EXPECT_THROW(build_index({}, small_encoder(), IndexerConfig{}, tmp.path()), Error);
}

TEST(BuildIndexTest, ReportsBucketingWaste) {
    TempDir tmp;
    const auto corpus = random_corpus(100, 6);
    IndexerConfig cfg;
    cfg.batch_size = 10;
    const auto stats = build_index(corpus, small_encoder(), cfg, tmp.path());
    EXPECT_GE(stats.padded_cells, stats.real_cells);
    EXPECT_GT(stats.real_cells, 0u);
}

// ---------------------------------------------------------------------------
// Corruption

class CorruptionTest : public ::testing::Test {
  protected:
    void SetUp() override {
        auto corpus = random_corpus(12, 7);
        corpus.push_back({"empty", "?!"});
        build_index(corpus, small_encoder(), IndexerConfig{}, tmp_.path());
    }

    ErrorKind open_error() {
        try {
            EmbeddingIndex::open(tmp_.path());
        } catch (const Error& e) {
            return e.kind();
        }
        ADD_FAILURE() << "open succeeded";
        return ErrorKind::InvalidArgument;
    }

    TempDir tmp_;
};

TEST_F(CorruptionTest, ManifestChecksum) {
    flip_byte(tmp_.path() / "manifest.json", 10);
    EXPECT_EQ(open_error(), ErrorKind::ChecksumMismatch);
}

TEST_F(CorruptionTest, PayloadChecksum) {
    flip_byte(tmp_.path() / "payload.bin", 100);
    EXPECT_EQ(open_error(), ErrorKind::ChecksumMismatch);
}

TEST_F(CorruptionTest, EveryFileIsChecked) {
    for (auto name : index_files()) {
        const auto path = tmp_.path() / name;
        const auto original = io::read_file(path);
        flip_byte(path, 0);
        EXPECT_EQ(open_error(), ErrorKind::ChecksumMismatch) << name;
        io::write_file(path, original);
    }
    EXPECT_NO_THROW(EmbeddingIndex::open(tmp_.path()));
}

TEST_F(CorruptionTest, VersionMismatch) {
    const auto path = tmp_.path() / "manifest.json";
    const auto bytes = io::read_file(path);
    auto body = io::verify_sealed_text(std::string(bytes.begin(), bytes.end()), "m");
    const auto at = body.find("\"version\": 1");
    ASSERT_NE(at, std::string::npos);
    body.replace(at, 12, "\"version\": 2");
    io::write_file(path, io::seal_text(body));
    EXPECT_EQ(open_error(), ErrorKind::VersionMismatch);
}

TEST_F(CorruptionTest, MissingFile) {
    std::filesystem::remove(tmp_.path() / "emb2doc.bin");
    EXPECT_EQ(open_error(), ErrorKind::Io);
}

TEST_F(CorruptionTest, TruncatedPayloadIsDetected) {
    // a resealed but shortened payload passes the checksum, not the size check
    const auto path = tmp_.path() / "payload.bin";
    auto bytes = io::read_file(path);
    bytes.resize(bytes.size() - 4 - 8);
    io::ByteWriter w;
    w.raw(bytes);
    w.seal();
    io::write_file(path, w.bytes());
    EXPECT_EQ(open_error(), ErrorKind::MalformedFile);
}

TEST(ReadCorpusTest, ParsesTsv) {
    TempDir tmp;
    const auto path = tmp.path() / "c.tsv";
    io::write_file(path, std::string_view("1\thello world\r\n\n2\tsecond\tdoc\n"));
    const auto docs = read_corpus(path);
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].id, "1");
    EXPECT_EQ(docs[0].text, "hello world");
    EXPECT_EQ(docs[1].text, "second\tdoc");

    io::write_file(path, std::string_view("no tab here\n"));
    EXPECT_THROW(read_corpus(path), Error);
}

} // namespace
} // namespace late

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

#include "late/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "late/random.hpp"

namespace late {

std::vector<Triple> read_triples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<Triple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto a = line.find('\t');
        const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
        if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
            throw Error(
                    ErrorKind::Data,
                    path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
    }
    return out;
}

void TrainConfig::validate() const {
    LATE_REQUIRE(learning_rate >= 0 && std::isfinite(learning_rate), InvalidArgument,
                 "learning_rate must be finite and non-negative");
    LATE_REQUIRE(batch_size > 0, InvalidArgument, "batch_size must be positive");
    LATE_REQUIRE(iterations > 0, InvalidArgument, "iterations must be positive");
}

double pairwise_loss(double s_pos, double s_neg) {
    LATE_REQUIRE(std::isfinite(s_pos) && std::isfinite(s_neg), NonFinite, "non-finite score");
    const double delta = s_pos - s_neg;
    // softplus(-delta)
    return delta > 0 ? std::log1p(std::exp(-delta)) : -delta + std::log1p(std::exp(delta));
}

namespace {

struct Projected {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> pre;   // base * W
    std::vector<double> unit;  // row-normalized
    std::vector<double> norms; // ||pre row||

    const double* row(std::size_t i) const {
        return unit.data() + i * dim;
    }
};

Projected project(const Matrix& base, const ProjectionLayer& proj) {
    Projected p;
    p.rows = base.rows();
    p.dim = proj.dim;
    p.pre.assign(p.rows * p.dim, 0.0);
    p.unit.assign(p.rows * p.dim, 0.0);
    p.norms.assign(p.rows, 0.0);
    for (std::size_t i = 0; i < p.rows; ++i) {
        double* x = p.pre.data() + i * p.dim;
        for (std::size_t a = 0; a < proj.base_dim; ++a) {
            const double b = base(i, a);
            const double* w = proj.weights.data() + a * proj.dim;
            for (std::size_t c = 0; c < p.dim; ++c) {
                x[c] += b * w[c];
            }
        }
        double sq = 0;
        for (std::size_t c = 0; c < p.dim; ++c) {
            sq += x[c] * x[c];
        }
        p.norms[i] = std::sqrt(sq);
        const double denom = p.norms[i] + kNormEpsilon;
        for (std::size_t c = 0; c < p.dim; ++c) {
            p.unit[i * p.dim + c] = x[c] / denom;
        }
    }
    return p;
}

double sim(const double* a, const double* b, std::size_t d, Metric metric) {
    double acc = 0;
    if (metric == Metric::Cosine) {
        for (std::size_t k = 0; k < d; ++k) {
            acc += a[k] * b[k];
        }
        return acc;
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return -acc;
}

double maxsim(const Projected& q, const Projected& d, Metric metric, std::vector<std::size_t>* winners) {
    LATE_REQUIRE(d.rows > 0, EmptyDocument, "training document has no embeddings");
    if (winners) {
        winners->assign(q.rows, 0);
    }
    double total = 0;
    for (std::size_t i = 0; i < q.rows; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d.rows; ++j) {
            const double s = sim(q.row(i), d.row(j), q.dim, metric);
            if (s > best) {
                best = s;
                if (winners) {
                    (*winners)[i] = j;
                }
            }
        }
        total += best;
    }
    return total;
}

// Adds dS/d(unit rows) for S = maxsim(q, d) into gq and gd, scaled by
// q_sign and d_sign respectively.
void maxsim_backward(
        const Projected& q,
        const Projected& d,
        const std::vector<std::size_t>& winners,
        Metric metric,
        double q_sign,
        double d_sign,
        std::vector<double>& gq,
        std::vector<double>& gd) {
    const std::size_t dim = q.dim;
    for (std::size_t i = 0; i < q.rows; ++i) {
        const std::size_t j = winners[i];
        const double* qi = q.row(i);
        const double* dj = d.row(j);
        double* gqi = gq.data() + i * dim;
        double* gdj = gd.data() + j * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            if (metric == Metric::Cosine) {
                gqi[c] += q_sign * dj[c];
                gdj[c] += d_sign * qi[c];
            } else {
                const double diff = qi[c] - dj[c];
                gqi[c] -= q_sign * 2.0 * diff;
                gdj[c] += d_sign * 2.0 * diff;
            }
        }
    }
}

// Chains d/d(unit) through y = x / (||x|| + eps) and x = base * W, adding
// the result into grad (base_dim x dim).
void normalize_project_backward(
        const Projected& p,
        const Matrix& base,
        const std::vector<double>& gunit,
        std::vector<double>& grad) {
    const std::size_t dim = p.dim;
    std::vector<double> gx(dim);
    for (std::size_t i = 0; i < p.rows; ++i) {
        const double n = p.norms[i];
        const double denom = n + kNormEpsilon;
        const double* x = p.pre.data() + i * dim;
        const double* gy = gunit.data() + i * dim;
        double dot = 0;
        for (std::size_t c = 0; c < dim; ++c) {
            dot += x[c] * gy[c];
        }
        // the x x^T term vanishes as x -> 0; skip it at exactly zero
        const double radial = n > 0 ? dot / (n * denom * denom) : 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            gx[c] = gy[c] / denom - x[c] * radial;
        }
        for (std::size_t a = 0; a < base.cols(); ++a) {
            const double b = base(i, a);
            if (b == 0) {
                continue;
            }
            double* g = grad.data() + a * dim;
            for (std::size_t c = 0; c < dim; ++c) {
                g[c] += b * gx[c];
            }
        }
    }
}

void check_prepared(const PreparedTriple& t, const ProjectionLayer& proj) {
    for (const Matrix* m : {&t.query, &t.positive, &t.negative}) {
        LATE_REQUIRE(
                m->rows() == 0 || m->cols() == proj.base_dim,
                DimensionMismatch,
                "triple base width " + std::to_string(m->cols()) + " != projection input " +
                        std::to_string(proj.base_dim));
    }
}

} // namespace

PreparedTriple prepare_triple(const Triple& t, const EncoderConfig& cfg, const Vocabulary& vocab) {
    auto filtered_doc = [&](const std::string& text) {
        const TokenSequence seq = document_tokens(tokenize(text), cfg);
        const Matrix full = toy_embed(seq, cfg, vocab);
        Matrix kept(0, cfg.base_dim);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (is_marker(seq[i]) || !cfg.is_punctuation(seq[i])) {
                kept.append_row(full.row(i));
            }
        }
        return kept;
    };
    return {toy_embed(augment_query(tokenize(t.query), cfg), cfg, vocab),
            filtered_doc(t.positive),
            filtered_doc(t.negative)};
}

TripleScores evaluate_triple(const PreparedTriple& t, const ProjectionLayer& proj, Metric metric) {
    check_prepared(t, proj);
    const Projected q = project(t.query, proj);
    TripleScores s;
    s.positive = maxsim(q, project(t.positive, proj), metric, nullptr);
    s.negative = maxsim(q, project(t.negative, proj), metric, nullptr);
    s.loss = pairwise_loss(s.positive, s.negative);
    return s;
}

WeightGradient score_difference_gradient(
        const PreparedTriple& t,
        const ProjectionLayer& proj,
        Metric metric) {
    check_prepared(t, proj);
    const Projected q = project(t.query, proj);
    const Projected pos = project(t.positive, proj);
    const Projected neg = project(t.negative, proj);

    std::vector<std::size_t> win_pos, win_neg;
    maxsim(q, pos, metric, &win_pos);
    maxsim(q, neg, metric, &win_neg);

    std::vector<double> gq(q.rows * q.dim, 0.0);
    std::vector<double> gpos(pos.rows * pos.dim, 0.0);
    std::vector<double> gneg(neg.rows * neg.dim, 0.0);
    maxsim_backward(q, pos, win_pos, metric, +1.0, +1.0, gq, gpos);
    maxsim_backward(q, neg, win_neg, metric, -1.0, +1.0, gq, gneg);

    // The two document paths go through separate buffers and are subtracted
    // at the end, so identical documents cancel exactly.
    WeightGradient g{proj.base_dim, proj.dim, std::vector<double>(proj.weights.size(), 0.0)};
    std::vector<double> wneg(proj.weights.size(), 0.0);
    normalize_project_backward(q, t.query, gq, g.values);
    normalize_project_backward(pos, t.positive, gpos, g.values);
    normalize_project_backward(neg, t.negative, gneg, wneg);
    for (std::size_t k = 0; k < wneg.size(); ++k) {
        g.values[k] -= wneg[k];
    }
    return g;
}

WeightGradient loss_gradient(const PreparedTriple& t, const ProjectionLayer& proj, Metric metric) {
    const TripleScores s = evaluate_triple(t, proj, metric);
    // dL/d(delta) = -sigmoid(-delta)
    const double delta = s.positive - s.negative;
    const double scale = -1.0 / (1.0 + std::exp(delta));
    WeightGradient g = score_difference_gradient(t, proj, metric);
    for (double& v : g.values) {
        v *= scale;
    }
    return g;
}

WeightGradient loss_gradient(
        const Triple& t,
        const ProjectionLayer& proj,
        const EncoderConfig& cfg) {
    const auto vocab = Vocabulary::hashed(cfg.vocab_buckets);
    return loss_gradient(prepare_triple(t, cfg, vocab), proj, cfg.metric);
}

ProjectionLayer train(
        std::span<const Triple> triples,
        const TrainConfig& cfg,
        const EncoderConfig& enc_cfg,
        ProjectionLayer init,
        const std::function<void(const IterationStats&)>& on_iteration) {
    cfg.validate();
    enc_cfg.validate();
    LATE_REQUIRE(!triples.empty(), InvalidArgument, "no training triples");
    LATE_REQUIRE(
            init.base_dim == enc_cfg.base_dim && init.dim == enc_cfg.dim,
            DimensionMismatch,
            "initial projection does not match encoder config");

    const auto vocab = Vocabulary::hashed(enc_cfg.vocab_buckets);
    std::vector<PreparedTriple> usable;
    for (const auto& t : triples) {
        if (t.positive == t.negative) {
            continue;
        }
        usable.push_back(prepare_triple(t, enc_cfg, vocab));
    }
    LATE_REQUIRE(!usable.empty(), InvalidArgument, "all triples are degenerate (positive == negative)");

    ProjectionLayer proj = std::move(init);
    SeededRng rng(mix64(cfg.seed ^ 0x747261696eull));
    std::vector<std::size_t> order(usable.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    const std::size_t batch = std::min(cfg.batch_size, usable.size());
    std::vector<std::size_t> members(batch);
    std::vector<WeightGradient> grads(batch);
    std::vector<double> losses(batch);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            members[b] = order[cursor++];
        }
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < std::ptrdiff_t(batch); ++b) {
            const auto& t = usable[members[std::size_t(b)]];
            losses[std::size_t(b)] = evaluate_triple(t, proj, enc_cfg.metric).loss;
            grads[std::size_t(b)] = loss_gradient(t, proj, enc_cfg.metric);
        }
        // fixed-order reduction keeps runs bitwise reproducible
        IterationStats stats{it, 0.0, &proj};
        std::vector<double> mean(proj.weights.size(), 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            stats.mean_loss += losses[b];
            for (std::size_t k = 0; k < mean.size(); ++k) {
                mean[k] += grads[b].values[k];
            }
        }
        stats.mean_loss /= double(batch);
        for (std::size_t k = 0; k < mean.size(); ++k) {
            proj.weights[k] -= cfg.learning_rate * mean[k] / double(batch);
        }
        if (on_iteration) {
            on_iteration(stats);
        }
    }
    return proj;
}

} // namespace late

#include "c2ae/losses.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace c2ae {

namespace {

std::atomic<std::uint64_t> g_latent_loss_calls{0};
std::atomic<std::uint64_t> g_latent_grad_calls{0};
std::atomic<std::uint64_t> g_output_loss_calls{0};
std::atomic<std::uint64_t> g_output_grad_calls{0};
std::atomic<std::uint64_t> g_bce_calls{0};
std::atomic<std::uint64_t> g_clamp_events{0};

double clamped_exp(double diff) {
    if (diff > kExpClamp || diff < -kExpClamp) {
        if (g_clamp_events.fetch_add(1, std::memory_order_relaxed) == 0)
            std::fprintf(stderr,
                         "warning: ranking-loss score difference clamped to +-%g\n", kExpClamp);
        diff = diff > kExpClamp ? kExpClamp : -kExpClamp;
    }
    return std::exp(diff);
}

void check_latent_shapes(const Matrix& cx, const Matrix& cy) {
    if (!cx.same_shape(cy))
        throw std::invalid_argument("latent loss: cx and cy shapes differ");
    if (cx.rows == 0 || cx.cols == 0)
        throw std::invalid_argument("latent loss: empty batch");
}

void check_score_shapes(const Matrix& scores, const LabelSets& sets) {
    if (scores.rows != sets.n_labels)
        throw std::invalid_argument("output loss: score rows differ from label count");
    if (scores.cols != sets.n_instances())
        throw std::invalid_argument("output loss: score columns differ from instance count");
}

}  // namespace

void LabelSets::validate() const {
    if (neg.size() != pos.size() || missing.size() != pos.size())
        throw std::invalid_argument("label sets: per-instance vectors differ in length");
    std::vector<int> seen(n_labels, -1);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        auto mark = [&](const std::vector<std::size_t>& idx) {
            for (std::size_t j : idx) {
                if (j >= n_labels)
                    throw std::out_of_range("label sets: label index out of range");
                if (seen[j] == static_cast<int>(i))
                    throw std::invalid_argument("label sets: index appears in two sets");
                seen[j] = static_cast<int>(i);
            }
        };
        mark(pos[i]);
        mark(neg[i]);
        mark(missing[i]);
    }
}

LatentPenaltyTerms latent_penalty_terms(const Matrix& cx, const Matrix& cy, bool normalize) {
    check_latent_shapes(cx, cy);
    LatentPenaltyTerms t;
    t.diff = cx - cy;
    const double scale = normalize ? 1.0 / static_cast<double>(cx.cols) : 1.0;
    t.whiten_x = scale * matmul_nt(cx, cx);
    add_identity(t.whiten_x, -1.0);
    t.whiten_y = scale * matmul_nt(cy, cy);
    add_identity(t.whiten_y, -1.0);
    return t;
}

double latent_loss(const Matrix& cx, const Matrix& cy, double lambda, bool normalize) {
    if (lambda < 0.0) throw std::invalid_argument("latent loss: lambda must be nonnegative");
    g_latent_loss_calls.fetch_add(1, std::memory_order_relaxed);
    const LatentPenaltyTerms t = latent_penalty_terms(cx, cy, normalize);
    return sum_squares(t.diff) + lambda * (sum_squares(t.whiten_x) + sum_squares(t.whiten_y));
}

void latent_grads(const Matrix& cx, const Matrix& cy, double lambda,
                  Matrix& d_cx, Matrix& d_cy, bool normalize) {
    if (lambda < 0.0) throw std::invalid_argument("latent grads: lambda must be nonnegative");
    g_latent_grad_calls.fetch_add(1, std::memory_order_relaxed);
    const LatentPenaltyTerms t = latent_penalty_terms(cx, cy, normalize);
    const double scale = normalize ? 1.0 / static_cast<double>(cx.cols) : 1.0;

    d_cx = matmul(t.whiten_x, cx);
    d_cy = matmul(t.whiten_y, cy);
    const double w = 4.0 * lambda * scale;
    for (std::size_t i = 0; i < d_cx.size(); ++i) {
        d_cx.data[i] = 2.0 * t.diff.data[i] + w * d_cx.data[i];
        d_cy.data[i] = -2.0 * t.diff.data[i] + w * d_cy.data[i];
    }
}

double output_loss(const Matrix& scores, const LabelSets& sets) {
    check_score_shapes(scores, sets);
    g_output_loss_calls.fetch_add(1, std::memory_order_relaxed);
    const std::size_t n = sets.n_instances();

    std::vector<double> per_instance(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const auto& pos = sets.pos[i];
        const auto& neg = sets.neg[i];
        if (pos.empty() || neg.empty()) continue;
        double e = 0.0;
        for (std::size_t p : pos)
            for (std::size_t q : neg) e += clamped_exp(scores(q, i) - scores(p, i));
        per_instance[i] = e / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    }

    // fixed-order reduction keeps the total independent of thread count
    double total = 0.0;
    for (double e : per_instance) total += e;
    return total;
}

Matrix output_grad(const Matrix& scores, const LabelSets& sets) {
    check_score_shapes(scores, sets);
    g_output_grad_calls.fetch_add(1, std::memory_order_relaxed);
    Matrix grad(scores.rows, scores.cols);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(sets.n_instances()); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const auto& pos = sets.pos[i];
        const auto& neg = sets.neg[i];
        if (pos.empty() || neg.empty()) continue;
        const double norm = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
        for (std::size_t p : pos) {
            double s = 0.0;
            for (std::size_t q : neg) s += clamped_exp(scores(q, i) - scores(p, i));
            grad(p, i) = -norm * s;
        }
        for (std::size_t q : neg) {
            double s = 0.0;
            for (std::size_t p : pos) s += clamped_exp(scores(q, i) - scores(p, i));
            grad(q, i) = norm * s;
        }
    }
    return grad;
}

double bce_loss(const Matrix& scores, const LabelSets& sets, Matrix* grad) {
    check_score_shapes(scores, sets);
    g_bce_calls.fetch_add(1, std::memory_order_relaxed);

    std::size_t known = 0;
    for (std::size_t i = 0; i < sets.n_instances(); ++i)
        known += sets.pos[i].size() + sets.neg[i].size();
    if (grad) *grad = Matrix(scores.rows, scores.cols);
    if (known == 0) return 0.0;

    const double inv = 1.0 / static_cast<double>(known);
    double total = 0.0;
    for (std::size_t i = 0; i < sets.n_instances(); ++i) {
        auto term = [&](std::size_t j, double target) {
            const double s = scores(j, i);
            // softplus(s) - target*s, stable for large |s|
            const double sp = std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
            total += sp - target * s;
            if (grad) {
                const double sig = 1.0 / (1.0 + std::exp(-s));
                (*grad)(j, i) = (sig - target) * inv;
            }
        };
        for (std::size_t j : sets.pos[i]) term(j, 1.0);
        for (std::size_t j : sets.neg[i]) term(j, 0.0);
    }
    return total * inv;
}

LossCounters loss_counters() {
    LossCounters c;
    c.latent_loss_calls = g_latent_loss_calls.load();
    c.latent_grad_calls = g_latent_grad_calls.load();
    c.output_loss_calls = g_output_loss_calls.load();
    c.output_grad_calls = g_output_grad_calls.load();
    c.bce_calls = g_bce_calls.load();
    c.clamp_events = g_clamp_events.load();
    return c;
}

void reset_loss_counters() {
    g_latent_loss_calls = 0;
    g_latent_grad_calls = 0;
    g_output_loss_calls = 0;
    g_output_grad_calls = 0;
    g_bce_calls = 0;
    g_clamp_events = 0;
}

}  // namespace c2ae

#pragma once

#include <cstdint>
#include <vector>

#include "c2ae/matrix.hpp"

namespace c2ae {

// Per-instance known-positive / known-negative / missing label index sets.
// Index vectors are kept sorted ascending; loss and gradient loops iterate in
// that order so results are reproducible bit-for-bit.
struct LabelSets {
    std::size_t n_labels = 0;
    std::vector<std::vector<std::size_t>> pos;
    std::vector<std::vector<std::size_t>> neg;
    std::vector<std::vector<std::size_t>> missing;

    std::size_t n_instances() const { return pos.size(); }
    void validate() const;  // disjoint, in range
};

// Alignment penalty pieces: diff = cx - cy, whiten_x = cx cx^T - I,
// whiten_y = cy cy^T - I. With normalize set, the Gram matrices are scaled
// by 1/n so the penalty is batch-size invariant (off by default).
struct LatentPenaltyTerms {
    Matrix diff;
    Matrix whiten_x;
    Matrix whiten_y;
};

LatentPenaltyTerms latent_penalty_terms(const Matrix& cx, const Matrix& cy,
                                        bool normalize = false);

// tr(diff^T diff) + lambda * (tr(whiten_x^T whiten_x) + tr(whiten_y^T whiten_y))
double latent_loss(const Matrix& cx, const Matrix& cy, double lambda,
                   bool normalize = false);

// d_cx = 2 diff + 4 lambda whiten_x cx, d_cy = -2 diff + 4 lambda whiten_y cy
// (per-batch, matching latent_loss; checked against finite differences)
void latent_grads(const Matrix& cx, const Matrix& cy, double lambda,
                  Matrix& d_cx, Matrix& d_cy, bool normalize = false);

// Pairwise exponential ranking loss over known label pairs:
//   sum_i (1/(|pos_i||neg_i|)) sum_{p in pos_i, q in neg_i} exp(s_qi - s_pi)
// scores: n_labels x n_instances. Instances with an empty known-positive or
// known-negative set contribute 0; missing labels never enter a pair.
double output_loss(const Matrix& scores, const LabelSets& sets);

// Gradient of output_loss w.r.t. scores; exactly 0 at missing labels and for
// instances with an empty pos or neg set.
Matrix output_grad(const Matrix& scores, const LabelSets& sets);

// Mean sigmoid cross-entropy over known labels (targets: pos=1, neg=0);
// missing labels are excluded from the mean. Optional analytic gradient.
double bce_loss(const Matrix& scores, const LabelSets& sets, Matrix* grad = nullptr);

// Score differences are clamped to +-kExpClamp before exponentiation so the
// loss stays finite; a warning is emitted the first time this triggers.
inline constexpr double kExpClamp = 50.0;

struct LossCounters {
    std::uint64_t latent_loss_calls = 0;
    std::uint64_t latent_grad_calls = 0;
    std::uint64_t output_loss_calls = 0;
    std::uint64_t output_grad_calls = 0;
    std::uint64_t bce_calls = 0;
    std::uint64_t clamp_events = 0;
};

LossCounters loss_counters();
void reset_loss_counters();

}  // namespace c2ae

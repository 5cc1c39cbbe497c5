#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "amr/core.hpp"

namespace amr {

struct LossWeights {
    double lambda_l1 = 10.0;
    double lambda_giou = 1.0;
    double lambda_score = 4.0;
};

void validate(const LossWeights &w);

// pairs[n] = (candidate index, ground-truth index), ordered by ground truth.
struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    friend bool operator==(const Assignment &, const Assignment &) = default;
};

inline constexpr double kLogEpsilon = 1e-7;

// |center error| + |width error|.
double l1_loss(const NormalizedMoment &pred, const NormalizedMoment &gt);

// Negated generalized IoU on normalized coordinates. A negative predicted
// width is treated as an empty interval at the predicted center.
double giou_loss(const NormalizedMoment &pred, const NormalizedMoment &gt);

double moment_loss(const NormalizedMoment &pred, const NormalizedMoment &gt,
                   const LossWeights &w);

// Cross-entropy over matched (target 1) and unmatched (target 0) candidates.
// Confidences are clamped to [kLogEpsilon, 1 - kLogEpsilon].
double score_loss(std::span<const double> confidences, const Assignment &assignment);

// Per-pair matching cost: -confidence + moment loss.
double matching_cost(const Candidate &pred, const NormalizedMoment &gt,
                     const LossWeights &w);

// N x K matrix of matching costs, row-major by ground truth.
std::vector<double> matching_cost_matrix(std::span<const Candidate> preds,
                                         std::span<const NormalizedMoment> gts,
                                         const LossWeights &w);

// Sum of matching costs over the assignment, accumulated in ground-truth order.
double matching_objective(std::span<const Candidate> preds,
                          std::span<const NormalizedMoment> gts,
                          const Assignment &assignment, const LossWeights &w);

// Minimum-cost injection of ground truths into candidates. Among optimal
// assignments the one whose candidate sequence (by ground truth) is
// lexicographically smallest is returned. Throws if N > K.
Assignment optimal_assignment(std::span<const Candidate> preds,
                              std::span<const NormalizedMoment> gts,
                              const LossWeights &w);

struct OverallLoss {
    double value = 0.0;
    double score_term = 0.0;  // already multiplied by lambda_score
    double moment_term = 0.0;
    Assignment assignment;
};

OverallLoss overall_loss(std::span<const Candidate> preds,
                         std::span<const NormalizedMoment> gts,
                         const LossWeights &w);

struct MomentGradient {
    double d_center = 0.0;
    double d_width = 0.0;
    // True when the pair lies within kKinkTolerance of a point where the loss
    // is not differentiable; the values are then right-hand derivatives.
    bool near_kink = false;
};

inline constexpr double kKinkTolerance = 1e-9;

MomentGradient moment_loss_gradient(const NormalizedMoment &pred,
                                    const NormalizedMoment &gt,
                                    const LossWeights &w);

} // namespace amr

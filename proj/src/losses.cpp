#include "amr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "amr/hungarian.hpp"

namespace amr {

namespace {

Span as_interval(const NormalizedMoment &m) {
    if (m.width < 0.0) {
        return {m.center, m.center};
    }
    return {m.start(), m.end()};
}

void check_candidates(std::span<const Candidate> preds,
                      std::span<const NormalizedMoment> gts) {
    if (gts.size() > preds.size()) {
        throw InvalidArgument("more ground truths (" + std::to_string(gts.size()) +
                              ") than candidates (" +
                              std::to_string(preds.size()) + ")");
    }
}

// Right-hand directional derivative of min(a, b) / max(a, b), where a and b
// move with rates da and db.
double d_min(double a, double da, double b, double db) {
    if (a < b) return da;
    if (b < a) return db;
    return std::min(da, db);
}

double d_max(double a, double da, double b, double db) {
    if (a > b) return da;
    if (b > a) return db;
    return std::max(da, db);
}

// Directional derivative of gIoU when the predicted bounds move at rates
// (ds, de) and the ground truth is fixed.
double giou_directional(const Span &p, const Span &g, double ds, double de) {
    const double lo_inter = std::max(p.start_s, g.start_s);
    const double hi_inter = std::min(p.end_s, g.end_s);
    const double overlap = hi_inter - lo_inter;
    const double d_overlap =
        d_min(p.end_s, de, g.end_s, 0.0) - d_max(p.start_s, ds, g.start_s, 0.0);

    double inter = 0.0;
    double d_inter = 0.0;
    if (overlap > 0.0) {
        inter = overlap;
        d_inter = d_overlap;
    } else if (overlap == 0.0) {
        d_inter = std::max(0.0, d_overlap);
    }

    const double uni = p.length() + g.length() - inter;
    const double d_uni = (de - ds) - d_inter;
    const double hull = std::max(p.end_s, g.end_s) - std::min(p.start_s, g.start_s);
    const double d_hull =
        d_max(p.end_s, de, g.end_s, 0.0) - d_min(p.start_s, ds, g.start_s, 0.0);

    return (d_inter * uni - inter * d_uni) / (uni * uni) +
           (d_uni * hull - uni * d_hull) / (hull * hull);
}

bool close(double a, double b) { return std::abs(a - b) <= kKinkTolerance; }

} // namespace

void validate(const LossWeights &w) {
    if (!(w.lambda_l1 >= 0.0) || !(w.lambda_giou >= 0.0) || !(w.lambda_score >= 0.0)) {
        throw InvalidArgument("loss weights must be non-negative");
    }
}

double l1_loss(const NormalizedMoment &pred, const NormalizedMoment &gt) {
    // ½|(ŝ+ê) − (s+e)| + |(ê−ŝ) − (e−s)|
    const double sum_err = (pred.start() + pred.end()) - (gt.start() + gt.end());
    const double len_err = (pred.end() - pred.start()) - (gt.end() - gt.start());
    return 0.5 * std::abs(sum_err) + std::abs(len_err);
}

double giou_loss(const NormalizedMoment &pred, const NormalizedMoment &gt) {
    if (!(gt.width > 0.0)) {
        throw InvalidArgument("ground-truth width must be positive");
    }
    return -giou(as_interval(pred), as_interval(gt));
}

double moment_loss(const NormalizedMoment &pred, const NormalizedMoment &gt,
                   const LossWeights &w) {
    return w.lambda_l1 * l1_loss(pred, gt) + w.lambda_giou * giou_loss(pred, gt);
}

double score_loss(std::span<const double> confidences, const Assignment &assignment) {
    std::vector<bool> matched(confidences.size(), false);
    for (const auto &[k, n] : assignment.pairs) {
        if (k >= confidences.size()) {
            throw InvalidArgument("assigned candidate index out of range");
        }
        if (matched[k]) {
            throw InvalidArgument("candidate assigned twice");
        }
        matched[k] = true;
    }
    double loss = 0.0;
    for (std::size_t k = 0; k < confidences.size(); ++k) {
        const double c = std::clamp(confidences[k], kLogEpsilon, 1.0 - kLogEpsilon);
        loss -= matched[k] ? std::log(c) : std::log1p(-c);
    }
    return loss;
}

double matching_cost(const Candidate &pred, const NormalizedMoment &gt,
                     const LossWeights &w) {
    return -pred.confidence + moment_loss(pred.moment, gt, w);
}

std::vector<double> matching_cost_matrix(std::span<const Candidate> preds,
                                         std::span<const NormalizedMoment> gts,
                                         const LossWeights &w) {
    std::vector<double> cost(gts.size() * preds.size());
    for (std::size_t n = 0; n < gts.size(); ++n) {
        for (std::size_t k = 0; k < preds.size(); ++k) {
            cost[n * preds.size() + k] = matching_cost(preds[k], gts[n], w);
        }
    }
    return cost;
}

double matching_objective(std::span<const Candidate> preds,
                          std::span<const NormalizedMoment> gts,
                          const Assignment &assignment, const LossWeights &w) {
    double total = 0.0;
    for (const auto &[k, n] : assignment.pairs) {
        total += matching_cost(preds[k], gts[n], w);
    }
    return total;
}

Assignment optimal_assignment(std::span<const Candidate> preds,
                              std::span<const NormalizedMoment> gts,
                              const LossWeights &w) {
    check_candidates(preds, gts);
    const auto cost = matching_cost_matrix(preds, gts, w);
    const auto cols = detail::lexicographic_min_assignment(cost, gts.size(), preds.size());
    Assignment out;
    out.pairs.reserve(cols.size());
    for (std::size_t n = 0; n < cols.size(); ++n) {
        out.pairs.emplace_back(cols[n], n);
    }
    return out;
}

OverallLoss overall_loss(std::span<const Candidate> preds,
                         std::span<const NormalizedMoment> gts,
                         const LossWeights &w) {
    validate(w);
    OverallLoss out;
    out.assignment = optimal_assignment(preds, gts, w);

    std::vector<double> conf;
    conf.reserve(preds.size());
    for (const auto &p : preds) {
        conf.push_back(p.confidence);
    }
    out.score_term = w.lambda_score * score_loss(conf, out.assignment);
    for (const auto &[k, n] : out.assignment.pairs) {
        out.moment_term += moment_loss(preds[k].moment, gts[n], w);
    }
    out.value = out.score_term + out.moment_term;
    return out;
}

MomentGradient moment_loss_gradient(const NormalizedMoment &pred,
                                    const NormalizedMoment &gt,
                                    const LossWeights &w) {
    if (!(gt.width > 0.0)) {
        throw InvalidArgument("ground-truth width must be positive");
    }
    MomentGradient grad;

    // L1 part: |Δc| + |Δw|, right-hand derivative +1 at zero.
    const double dc = pred.center - gt.center;
    const double dw = pred.width - gt.width;
    grad.d_center += w.lambda_l1 * (dc >= 0.0 ? 1.0 : -1.0);
    grad.d_width += w.lambda_l1 * (dw >= 0.0 ? 1.0 : -1.0);

    const Span p = as_interval(pred);
    const Span g = as_interval(gt);
    const bool collapsed = pred.width < 0.0;
    // Bounds move as (ds, de) = (1, 1) along center and (-½, ½) along width.
    grad.d_center -= w.lambda_giou * giou_directional(p, g, 1.0, 1.0);
    if (!collapsed) {
        grad.d_width -= w.lambda_giou * giou_directional(p, g, -0.5, 0.5);
    }

    grad.near_kink = std::abs(dc) <= kKinkTolerance || std::abs(dw) <= kKinkTolerance ||
                     std::abs(pred.width) <= kKinkTolerance ||
                     close(p.start_s, g.start_s) || close(p.end_s, g.end_s) ||
                     close(p.end_s, g.start_s) || close(p.start_s, g.end_s);
    return grad;
}

} // namespace amr

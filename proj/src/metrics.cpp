#include "amr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace amr {

std::vector<ScoredSpan> ranked(std::span<const ScoredSpan> candidates) {
    std::vector<ScoredSpan> out(candidates.begin(), candidates.end());
    std::stable_sort(out.begin(), out.end(), [](const ScoredSpan &a, const ScoredSpan &b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.span.start_s < b.span.start_s;
    });
    return out;
}

std::vector<double> average_map_thresholds() {
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) {
        out.push_back((50 + 5 * i) / 100.0);
    }
    return out;
}

double recall1_at(std::span<const QueryResult> results, double theta) {
    if (results.empty()) {
        throw InvalidArgument("no query results to evaluate");
    }
    std::size_t hits = 0;
    for (const auto &r : results) {
        if (r.candidates.empty()) continue;
        const ScoredSpan top = ranked(r.candidates).front();
        double best = 0.0;
        for (const auto &gt : r.ground_truths) {
            best = std::max(best, iou(top.span, gt));
        }
        if (best >= theta) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

double average_precision(const QueryResult &result, double theta) {
    if (result.ground_truths.empty()) {
        throw InvalidArgument("average precision needs at least one ground truth");
    }
    const auto order = ranked(result.candidates);
    std::vector<bool> used(result.ground_truths.size(), false);
    std::size_t tp = 0;
    double precision_sum = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        double best = -1.0;
        std::size_t best_gt = 0;
        for (std::size_t g = 0; g < result.ground_truths.size(); ++g) {
            if (used[g]) continue;
            const double v = iou(order[rank].span, result.ground_truths[g]);
            if (v > best) {
                best = v;
                best_gt = g;
            }
        }
        if (best >= theta) {
            used[best_gt] = true;
            ++tp;
            precision_sum += static_cast<double>(tp) / static_cast<double>(rank + 1);
        }
    }
    return precision_sum / static_cast<double>(result.ground_truths.size());
}

double map_at(std::span<const QueryResult> results, double theta) {
    if (results.empty()) {
        throw InvalidArgument("no query results to evaluate");
    }
    double sum = 0.0;
    for (const auto &r : results) {
        sum += average_precision(r, theta);
    }
    return 100.0 * sum / static_cast<double>(results.size());
}

double avg_map(std::span<const QueryResult> results) {
    const auto grid = average_map_thresholds();
    double sum = 0.0;
    for (double t : grid) {
        sum += map_at(results, t);
    }
    return sum / static_cast<double>(grid.size());
}

MetricReport evaluate(std::span<const QueryResult> results,
                      std::span<const double> r1_thresholds,
                      std::span<const double> map_thresholds) {
    MetricReport report;
    report.num_queries = results.size();
    for (double t : r1_thresholds) {
        report.r1_at[t] = recall1_at(results, t);
    }
    for (double t : map_thresholds) {
        report.map_at[t] = map_at(results, t);
    }
    report.avg_map = avg_map(results);
    return report;
}

namespace {

std::vector<bool> rasterize(const std::vector<Span> &spans, std::size_t frames,
                            double frame_s) {
    std::vector<bool> on(frames, false);
    for (std::size_t i = 0; i < frames; ++i) {
        const double mid = (static_cast<double>(i) + 0.5) * frame_s;
        for (const auto &s : spans) {
            if (s.start_s <= mid && mid <= s.end_s) {
                on[i] = true;
                break;
            }
        }
    }
    return on;
}

} // namespace

SedCounts sed_frame_counts(const std::map<std::string, std::vector<Span>> &predicted,
                           const std::map<std::string, std::vector<Span>> &ground_truth,
                           double duration_s, double frame_s) {
    if (!(frame_s > 0.0)) {
        throw InvalidArgument("frame length must be positive");
    }
    if (!(duration_s >= 0.0)) {
        throw InvalidArgument("duration must be non-negative");
    }
    const auto frames = static_cast<std::size_t>(std::ceil(duration_s / frame_s));
    std::set<std::string> labels;
    for (const auto &[label, _] : predicted) labels.insert(label);
    for (const auto &[label, _] : ground_truth) labels.insert(label);

    static const std::vector<Span> none;
    const auto lookup = [](const auto &m, const std::string &k) -> const std::vector<Span> & {
        auto it = m.find(k);
        return it == m.end() ? none : it->second;
    };

    SedCounts counts;
    for (const auto &label : labels) {
        const auto pred = rasterize(lookup(predicted, label), frames, frame_s);
        const auto gt = rasterize(lookup(ground_truth, label), frames, frame_s);
        for (std::size_t i = 0; i < frames; ++i) {
            if (pred[i] && gt[i]) ++counts.tp;
            else if (pred[i]) ++counts.fp;
            else if (gt[i]) ++counts.fn;
        }
    }
    return counts;
}

SedScores sed_scores(const SedCounts &c) {
    SedScores s;
    s.true_positives = c.tp;
    s.false_positives = c.fp;
    s.false_negatives = c.fn;
    const double tp = static_cast<double>(c.tp);
    s.precision = c.tp + c.fp > 0 ? 100.0 * tp / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = c.tp + c.fn > 0 ? 100.0 * tp / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

SedScores sed_frame_metrics(const std::map<std::string, std::vector<Span>> &predicted,
                            const std::map<std::string, std::vector<Span>> &ground_truth,
                            double duration_s, double frame_s) {
    return sed_scores(sed_frame_counts(predicted, ground_truth, duration_s, frame_s));
}

} // namespace amr

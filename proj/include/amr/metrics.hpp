#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "amr/core.hpp"

namespace amr {

struct QueryResult {
    std::vector<Span> ground_truths;
    std::vector<ScoredSpan> candidates;
    double duration_s = 0.0;
};

// Confidence descending, then earlier start, then input order.
std::vector<ScoredSpan> ranked(std::span<const ScoredSpan> candidates);

// Average-mAP IoU thresholds: 0.50, 0.55, ..., 0.95.
std::vector<double> average_map_thresholds();

// Percentage of queries whose top-ranked candidate reaches IoU >= theta
// with any ground truth. A query without candidates counts as a miss.
double recall1_at(std::span<const QueryResult> results, double theta);

// Greedy detection-style AP for one query, in [0, 1].
double average_precision(const QueryResult &result, double theta);

double map_at(std::span<const QueryResult> results, double theta);
double avg_map(std::span<const QueryResult> results);

struct MetricReport {
    std::map<double, double> r1_at;
    std::map<double, double> map_at;
    double avg_map = 0.0;
    std::size_t num_queries = 0;
};

MetricReport evaluate(std::span<const QueryResult> results,
                      std::span<const double> r1_thresholds,
                      std::span<const double> map_thresholds);

// Frame-level sound event detection scores, micro-averaged, in percent.
struct SedScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long true_positives = 0;
    long long false_positives = 0;
    long long false_negatives = 0;
};

// Counts for one audio item. Keys are class labels; a class present in only
// one of the maps is rasterized against an empty set.
struct SedCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;

    SedCounts &operator+=(const SedCounts &o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

SedCounts sed_frame_counts(const std::map<std::string, std::vector<Span>> &predicted,
                           const std::map<std::string, std::vector<Span>> &ground_truth,
                           double duration_s, double frame_s = 1.0);

SedScores sed_scores(const SedCounts &counts);

SedScores sed_frame_metrics(const std::map<std::string, std::vector<Span>> &predicted,
                            const std::map<std::string, std::vector<Span>> &ground_truth,
                            double duration_s, double frame_s = 1.0);

} // namespace amr

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amr/core.hpp"
#include "amr/embeddings.hpp"

namespace amr {

// Sliding-window similarity retriever: threshold, median filter, runs.
struct BaselineConfig {
    double threshold = 0.5;
    int median_len = 1;
    double window_s = 1.0;
    double hop_s = 1.0;
};

void validate(const BaselineConfig &cfg);

// Cosine similarity of the query against each window row, in temporal order.
std::vector<double> similarity_curve(const EmbeddingStore &audio,
                                     const EmbeddingStore &query);

std::vector<std::uint8_t> binarize(std::span<const double> sims, double threshold);

// Majority vote over an odd window, zero-padded at both ends.
std::vector<std::uint8_t> median_filter(std::span<const std::uint8_t> bits, int length);

// Maximal runs of ones become [first·hop, last·hop + window] clipped to the
// duration, scored by their mean similarity and sorted by score descending.
std::vector<ScoredSpan> extract_moments(std::span<const std::uint8_t> bits,
                                        std::span<const double> sims, double hop_s,
                                        double window_s, double duration_s);

std::vector<ScoredSpan> retrieve(const EmbeddingStore &audio, const EmbeddingStore &query,
                                 const BaselineConfig &cfg, double duration_s);

// Precomputed similarity curve of one validation query.
struct TuningQuery {
    std::vector<double> sims;
    std::vector<Span> ground_truths;
    double duration_s = 0.0;
};

struct TuningResult {
    BaselineConfig config;
    double avg_map = 0.0;
};

std::vector<double> default_threshold_grid();
std::vector<int> default_median_grid();

// Grid search maximizing average mAP; ties go to the smaller median length,
// then the smaller threshold. `base` supplies window and hop.
TuningResult tune(std::span<const TuningQuery> queries, std::span<const double> thresholds,
                  std::span<const int> median_lengths, const BaselineConfig &base);

} // namespace amr

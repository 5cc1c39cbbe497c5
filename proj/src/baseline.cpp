#include "amr/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amr/metrics.hpp"

namespace amr {

void validate(const BaselineConfig &cfg) {
    if (cfg.median_len < 1 || cfg.median_len % 2 == 0) {
        throw InvalidArgument("median filter length must be odd and positive, got " +
                              std::to_string(cfg.median_len));
    }
    if (!(cfg.window_s > 0.0) || !(cfg.hop_s > 0.0)) {
        throw InvalidArgument("window and hop must be positive");
    }
    if (!std::isfinite(cfg.threshold)) {
        throw InvalidArgument("threshold must be finite");
    }
}

std::vector<double> similarity_curve(const EmbeddingStore &audio,
                                     const EmbeddingStore &query) {
    if (audio.dim() != query.dim()) {
        throw InvalidArgument("embedding dim mismatch: audio " + std::to_string(audio.dim()) +
                              ", query " + std::to_string(query.dim()));
    }
    if (query.rows() != 1) {
        throw InvalidArgument("query store must hold a single pooled row");
    }
    std::vector<double> out;
    out.reserve(audio.rows());
    for (std::size_t i = 0; i < audio.rows(); ++i) {
        out.push_back(cosine(audio.row(i), query.row(0)));
    }
    return out;
}

std::vector<std::uint8_t> binarize(std::span<const double> sims, double threshold) {
    std::vector<std::uint8_t> bits(sims.size());
    std::transform(sims.begin(), sims.end(), bits.begin(),
                   [threshold](double s) { return s >= threshold ? 1 : 0; });
    return bits;
}

std::vector<std::uint8_t> median_filter(std::span<const std::uint8_t> bits, int length) {
    if (length < 1 || length % 2 == 0) {
        throw InvalidArgument("median filter length must be odd and positive, got " +
                              std::to_string(length));
    }
    const auto n = static_cast<std::ptrdiff_t>(bits.size());
    const std::ptrdiff_t half = length / 2;
    // prefix[i] = ones in bits[0, i)
    std::vector<std::ptrdiff_t> prefix(bits.size() + 1, 0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + (bits[i] ? 1 : 0);
    }
    std::vector<std::uint8_t> out(bits.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
        const std::ptrdiff_t hi = std::min(n, i + half + 1);
        out[i] = 2 * (prefix[hi] - prefix[lo]) > length ? 1 : 0;
    }
    return out;
}

std::vector<ScoredSpan> extract_moments(std::span<const std::uint8_t> bits,
                                        std::span<const double> sims, double hop_s,
                                        double window_s, double duration_s) {
    if (bits.size() != sims.size()) {
        throw InvalidArgument("bit and similarity sequences differ in length");
    }
    std::vector<ScoredSpan> out;
    std::size_t i = 0;
    while (i < bits.size()) {
        if (!bits[i]) {
            ++i;
            continue;
        }
        const std::size_t first = i;
        double sum = 0.0;
        while (i < bits.size() && bits[i]) {
            sum += sims[i];
            ++i;
        }
        const std::size_t last = i - 1;
        const double start = std::clamp(static_cast<double>(first) * hop_s, 0.0, duration_s);
        const double end =
            std::clamp(static_cast<double>(last) * hop_s + window_s, start, duration_s);
        out.push_back({{start, end}, sum / static_cast<double>(last - first + 1)});
    }
    std::stable_sort(out.begin(), out.end(), [](const ScoredSpan &a, const ScoredSpan &b) {
        return a.confidence > b.confidence;
    });
    return out;
}

std::vector<ScoredSpan> retrieve(const EmbeddingStore &audio, const EmbeddingStore &query,
                                 const BaselineConfig &cfg, double duration_s) {
    validate(cfg);
    const auto sims = similarity_curve(audio, query);
    const auto bits = median_filter(binarize(sims, cfg.threshold), cfg.median_len);
    return extract_moments(bits, sims, cfg.hop_s, cfg.window_s, duration_s);
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 18; ++i) {
        grid.push_back(i * 5 / 100.0);
    }
    return grid;
}

std::vector<int> default_median_grid() {
    std::vector<int> grid;
    for (int m = 1; m <= 31; m += 2) {
        grid.push_back(m);
    }
    return grid;
}

TuningResult tune(std::span<const TuningQuery> queries, std::span<const double> thresholds,
                  std::span<const int> median_lengths, const BaselineConfig &base) {
    if (thresholds.empty() || median_lengths.empty()) {
        throw InvalidArgument("tuning grids must be non-empty");
    }
    if (queries.empty()) {
        throw InvalidArgument("tuning needs at least one validation query");
    }
    std::vector<int> ms(median_lengths.begin(), median_lengths.end());
    std::vector<double> taus(thresholds.begin(), thresholds.end());
    std::sort(ms.begin(), ms.end());
    std::sort(taus.begin(), taus.end());

    TuningResult best;
    bool have = false;
    std::vector<QueryResult> results(queries.size());
    for (int m : ms) {
        for (double tau : taus) {
            BaselineConfig cfg = base;
            cfg.threshold = tau;
            cfg.median_len = m;
            validate(cfg);
            for (std::size_t q = 0; q < queries.size(); ++q) {
                const auto &vq = queries[q];
                const auto bits = median_filter(binarize(vq.sims, tau), m);
                results[q].ground_truths = vq.ground_truths;
                results[q].duration_s = vq.duration_s;
                results[q].candidates =
                    extract_moments(bits, vq.sims, cfg.hop_s, cfg.window_s, vq.duration_s);
            }
            const double score = avg_map(results);
            if (!have || score > best.avg_map) {
                best = {cfg, score};
                have = true;
            }
        }
    }
    return best;
}

} // namespace amr

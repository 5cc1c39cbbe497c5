#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amr/manifest.hpp"
#include "amr/metrics.hpp"

namespace amr::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kIoError = 3,
    kJoinError = 4,
};

// Prediction rows that do not correspond to any (audio_id, query) pair.
class JoinError : public std::runtime_error {
public:
    JoinError(const std::string &what, std::vector<std::string> unmatched)
        : std::runtime_error(what), unmatched_(std::move(unmatched)) {}
    const std::vector<std::string> &unmatched() const { return unmatched_; }

private:
    std::vector<std::string> unmatched_;
};

struct JoinedQueries {
    std::vector<QueryResult> results;
    std::size_t missing_predictions = 0;  // queries evaluated with no candidates
};

// One QueryResult per distinct (audio_id, query) of the manifest, in manifest
// order. Throws JoinError listing prediction rows with no ground truth.
JoinedQueries join_predictions(std::span<const AudioItem> manifest,
                               std::span<const PredictionRow> predictions);

std::string report_to_json(const MetricReport &report);

// Entry point of the `amr` executable.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace amr::cli

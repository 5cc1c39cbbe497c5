#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "amr/core.hpp"

namespace amr {

inline constexpr int kManifestFormatVersion = 1;
inline constexpr int kPredictionsFormatVersion = 1;

// One line of a DatasetManifest JSONL file.
std::string to_jsonl_line(const AudioItem &item);
AudioItem parse_manifest_line(const std::string &line);

// Rows are validated: spans inside [0, duration], sorted by start, queries
// non-empty. Errors carry the 1-based line number.
std::vector<AudioItem> read_manifest(const std::filesystem::path &path);
void write_manifest(const std::filesystem::path &path,
                    const std::vector<AudioItem> &items);

// Predictions JSONL row: {"audio_id", "query", "candidates": [...]}.
struct PredictionRow {
    std::string audio_id;
    std::string query;
    std::vector<ScoredSpan> candidates;
};

std::string to_jsonl_line(const PredictionRow &row);
PredictionRow parse_prediction_line(const std::string &line);

std::vector<PredictionRow> read_predictions(const std::filesystem::path &path);
void write_predictions(const std::filesystem::path &path,
                       const std::vector<PredictionRow> &rows);

} // namespace amr

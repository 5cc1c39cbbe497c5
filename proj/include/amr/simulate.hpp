#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amr/core.hpp"
#include "amr/rng.hpp"

namespace amr {

struct DbRange {
    double lo = -5.0;
    double hi = 5.0;
};

struct SimulationConfig {
    double beta_s = 30.0;               // mean gap between moments
    DbRange fg_gain_db{-5.0, 5.0};      // foreground level around 0 dB
    double bg_target_db = -20.0;
    DbRange bg_gain_jitter_db{-5.0, 5.0};
    double trim_threshold_db = 20.0;    // below overall power
    double trim_frame_ms = 50.0;
    double segment_len_s = 60.0;
    double segment_hop_s = 1.0;
    int sample_rate_hz = 16000;
    std::uint64_t seed = 0;
};

void validate(const SimulationConfig &cfg);

// Half-open sample range [begin, end).
struct SampleRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    Span to_span(int sample_rate) const {
        return {static_cast<double>(begin) / sample_rate, static_cast<double>(end) / sample_rate};
    }
    friend bool operator==(const SampleRange &, const SampleRange &) = default;
};

// Strips leading and trailing frames whose power is trim_threshold_db below
// the whole clip's power. Interior frames are kept. A clip with no frame above
// the threshold is returned whole.
SampleRange trim_silence(std::span<const float> x, const SimulationConfig &cfg);

// Exponential draw with mean beta_s by inverse CDF.
double sample_interval(Rng &rng, double beta_s);

struct GainResult {
    std::vector<float> samples;
    bool silent = false;  // input had no energy and was returned unchanged
};

// Scales x so its RMS level is target_db relative to unit RMS.
GainResult apply_gain_to_power(std::span<const float> x, double target_db);

double rms(std::span<const float> x);
double rms_db(std::span<const float> x);

// Audio held in memory or read from a WAV file on demand.
class AudioSource {
public:
    AudioSource() = default;
    explicit AudioSource(std::filesystem::path path);
    explicit AudioSource(std::vector<float> samples, std::string name = "memory");

    std::size_t frames() const { return frames_; }
    const std::string &name() const { return name_; }
    // Throws IoError when a file source does not match sample_rate.
    std::vector<float> load(int sample_rate, std::size_t offset = 0,
                            std::size_t count = static_cast<std::size_t>(-1)) const;

private:
    std::filesystem::path path_;
    std::shared_ptr<const std::vector<float>> samples_;
    std::size_t frames_ = 0;
    int file_rate_ = 0;
    std::string name_;
};

struct ForegroundEntry {
    AudioSource audio;
    std::vector<std::string> captions;
};

struct ForegroundPool {
    std::vector<ForegroundEntry> entries;
};

struct BackgroundSegment {
    AudioSource audio;
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct BackgroundPool {
    std::vector<BackgroundSegment> segments;
};

struct SegmentResult {
    BackgroundPool pool;
    bool too_short = false;
};

// Every segment_len_s window of the recording at segment_hop_s, in order.
SegmentResult segment_background(const AudioSource &audio, const SimulationConfig &cfg);

struct PlacedMoment {
    MomentAnnotation annotation;
    std::size_t foreground_index = 0;
    SampleRange samples;
    double gain_db = 0.0;
};

struct GeneratedSample {
    std::vector<float> mix;
    std::vector<float> background;  // level-adjusted background alone
    double background_gain_db = 0.0;
    std::vector<PlacedMoment> moments;
    std::vector<double> interval_draws;  // every gap drawn, including the last
};

// One pass of the overlay loop: draw a gap and a captioned clip, place the
// trimmed clip after the gap, stop once it would run past the background.
GeneratedSample generate_sample(std::span<const float> background, const ForegroundPool &pool,
                                const SimulationConfig &cfg, Rng &rng);

struct DatasetSummary {
    std::size_t items = 0;
    std::size_t moments = 0;
    std::size_t interval_draws = 0;
    double mean_interval_s = 0.0;
};

struct DatasetResult {
    std::vector<AudioItem> items;
    DatasetSummary summary;
};

std::string item_id(std::size_t index);

// Generates n_items samples with per-item seeds derived from (cfg.seed,
// index) and writes out_dir/audio/<id>.wav plus out_dir/manifest.jsonl.
// Output is independent of the thread count.
DatasetResult generate_dataset(const ForegroundPool &fg, const BackgroundPool &bg,
                               std::size_t n_items, const SimulationConfig &cfg,
                               const std::filesystem::path &out_dir, unsigned threads = 1);

// Clotho-style caption table: file_name,caption_1..caption_5 with a header row.
// Captions are resolved against audio_dir.
ForegroundPool load_foreground_pool(const std::filesystem::path &audio_dir,
                                    const std::filesystem::path &captions_csv);

// Every .wav under dir (sorted by name) split into segments.
BackgroundPool load_background_pool(const std::filesystem::path &dir,
                                    const SimulationConfig &cfg);

} // namespace amr

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace amr {

// Thrown for malformed inputs (bad numbers, violated preconditions).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a file cannot be read, written, or parsed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Absolute time interval in seconds.
struct Span {
    double start_s = 0.0;
    double end_s = 0.0;

    double length() const { return end_s - start_s; }
    double center() const { return 0.5 * (start_s + end_s); }

    friend bool operator==(const Span &, const Span &) = default;
};

// Moment relative to audio duration: center and width as fractions.
struct NormalizedMoment {
    double center = 0.0;
    double width = 0.0;

    double start() const { return center - 0.5 * width; }
    double end() const { return center + 0.5 * width; }

    static NormalizedMoment from_bounds(double start, double end) {
        return {0.5 * (start + end), end - start};
    }

    friend bool operator==(const NormalizedMoment &,
                           const NormalizedMoment &) = default;
};

struct Candidate {
    NormalizedMoment moment;
    double confidence = 0.0;
};

// Candidate whose moment has already been resolved to seconds.
struct ScoredSpan {
    Span span;
    double confidence = 0.0;
};

struct MomentAnnotation {
    std::string query;
    Span span;
};

struct AudioItem {
    std::string audio_id;
    std::string audio_path;
    double duration_s = 0.0;
    std::vector<MomentAnnotation> annotations;
};

// Throws InvalidArgument unless the span is finite and ordered.
void validate(const Span &s);

// Moment -> seconds. Bounds are clamped to [0, duration_s].
Span to_span(const NormalizedMoment &m, double duration_s);

NormalizedMoment from_span(const Span &s, double duration_s);

// Intersection over union; 0 when the union has zero length.
double iou(const Span &a, const Span &b);

// Generalized IoU: IoU minus the empty fraction of the enclosing hull.
// Two identical zero-length spans score 1.
double giou(const Span &a, const Span &b);

} // namespace amr

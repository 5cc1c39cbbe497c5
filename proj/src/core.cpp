#include "amr/core.hpp"

#include <algorithm>
#include <cmath>

namespace amr {

namespace {

void require_finite(double v, const char *what) {
    if (!std::isfinite(v)) {
        throw InvalidArgument(std::string(what) + " must be finite");
    }
}

} // namespace

void validate(const Span &s) {
    require_finite(s.start_s, "span start");
    require_finite(s.end_s, "span end");
    if (s.end_s < s.start_s) {
        throw InvalidArgument("span end precedes start");
    }
}

Span to_span(const NormalizedMoment &m, double duration_s) {
    require_finite(m.center, "moment center");
    require_finite(m.width, "moment width");
    require_finite(duration_s, "duration");
    if (duration_s <= 0.0) {
        throw InvalidArgument("duration must be positive");
    }
    const double start = std::clamp(m.start() * duration_s, 0.0, duration_s);
    const double end = std::clamp(m.end() * duration_s, 0.0, duration_s);
    return {start, std::max(start, end)};
}

NormalizedMoment from_span(const Span &s, double duration_s) {
    validate(s);
    require_finite(duration_s, "duration");
    if (duration_s <= 0.0) {
        throw InvalidArgument("duration must be positive");
    }
    if (s.end_s > duration_s) {
        throw InvalidArgument("span ends after the audio");
    }
    return {(s.start_s + s.end_s) / (2.0 * duration_s),
            (s.end_s - s.start_s) / duration_s};
}

double iou(const Span &a, const Span &b) {
    const double inter =
        std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return inter / uni;
}

double giou(const Span &a, const Span &b) {
    const double hull =
        std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
    if (hull <= 0.0) {
        // both spans collapse onto the same point
        return 1.0;
    }
    const double inter =
        std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
    const double uni = a.length() + b.length() - inter;
    const double ratio = uni > 0.0 ? inter / uni : 0.0;
    return ratio - (hull - uni) / hull;
}

} // namespace amr

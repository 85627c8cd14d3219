#include "bcg/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcg/error.hpp"

namespace bcg {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::InsufficientBeats: return "insufficient-beats";
        case ErrorKind::NoRhythmFound: return "no-rhythm-found";
        case ErrorKind::TemplateFailure: return "template-failure";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::DuplicateLabel: return "duplicate-label";
        case ErrorKind::DependencyMissing: return "dependency-missing";
        case ErrorKind::Io: return "io-error";
    }
    return "unknown";
}

std::string_view to_string(Source source) {
    switch (source) {
        case Source::GroundTruth: return "ground_truth";
        case Source::Tm: return "tm";
        case Source::Dl: return "dl";
        case Source::Alternate: return "alternate";
        case Source::Hybrid: return "hybrid";
    }
    return "unknown";
}

std::optional<Source> source_from_string(std::string_view name) {
    for (Source s : {Source::GroundTruth, Source::Tm, Source::Dl, Source::Alternate,
                     Source::Hybrid}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

void SignalTrace::validate() const {
    if (!(sampling_hz > 0.0) || !std::isfinite(sampling_hz))
        fail(ErrorKind::InvalidInput, "sampling_hz must be positive");
    if (samples.empty()) fail(ErrorKind::InvalidInput, "trace has no samples");
    if (!(start_time_ms >= 0.0)) fail(ErrorKind::InvalidInput, "start_time_ms must be >= 0");
}

void BeatAnnotation::validate(const SignalTrace* trace) const {
    for (std::size_t i = 0; i < peak_times_ms.size(); ++i) {
        if (!std::isfinite(peak_times_ms[i]))
            fail(ErrorKind::InvalidInput, "non-finite peak time");
        if (i > 0 && !(peak_times_ms[i] > peak_times_ms[i - 1]))
            fail(ErrorKind::InvalidInput, "peak times must be strictly increasing");
    }
    if (trace != nullptr && !peak_times_ms.empty()) {
        if (peak_times_ms.front() < trace->start_time_ms ||
            peak_times_ms.back() > trace->end_time_ms())
            fail(ErrorKind::InvalidInput, "peak time outside the trace");
    }
}

IntervalSeries intervals_of(const std::vector<double>& peaks) {
    if (peaks.size() < 2)
        fail(ErrorKind::InsufficientBeats, "need at least two peaks for intervals");
    IntervalSeries out;
    out.intervals_ms.reserve(peaks.size() - 1);
    for (std::size_t i = 1; i < peaks.size(); ++i)
        out.intervals_ms.push_back(peaks[i] - peaks[i - 1]);
    out.mean_ms = std::accumulate(out.intervals_ms.begin(), out.intervals_ms.end(), 0.0) /
                  static_cast<double>(out.intervals_ms.size());
    return out;
}

IntervalSeries intervals_of(const BeatAnnotation& annotation) {
    return intervals_of(annotation.peak_times_ms);
}

BeatAnnotation slice_beats(const BeatAnnotation& beats, double begin_ms, double end_ms) {
    BeatAnnotation out{{}, beats.source, beats.trace_label};
    auto lo = std::lower_bound(beats.peak_times_ms.begin(), beats.peak_times_ms.end(), begin_ms);
    auto hi = std::lower_bound(lo, beats.peak_times_ms.end(), end_ms);
    out.peak_times_ms.assign(lo, hi);
    return out;
}

}  // namespace bcg

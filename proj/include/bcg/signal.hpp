#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bcg {

/// Detector that produced an annotation.
enum class Source { GroundTruth, Tm, Dl, Alternate, Hybrid };

std::string_view to_string(Source source);
std::optional<Source> source_from_string(std::string_view name);

/// Minimum spacing between two beats (180 bpm).
inline constexpr double kRefractoryMs = 60000.0 / 180.0;

/// Uniformly sampled amplitude series. Times are carried in milliseconds;
/// sample indices only matter at the storage level.
struct SignalTrace {
    std::vector<double> samples;
    double sampling_hz = 1000.0;
    double start_time_ms = 0.0;
    std::string label;

    std::size_t size() const noexcept { return samples.size(); }
    double duration_ms() const noexcept {
        return static_cast<double>(samples.size()) / sampling_hz * 1000.0;
    }
    double end_time_ms() const noexcept { return start_time_ms + duration_ms(); }
    double time_of(std::size_t index) const noexcept {
        return start_time_ms + static_cast<double>(index) * 1000.0 / sampling_hz;
    }
    /// Fractional sample position of a time.
    double position_of(double time_ms) const noexcept {
        return (time_ms - start_time_ms) * sampling_hz / 1000.0;
    }

    /// Throws InvalidInput when the trace breaks its invariants.
    void validate() const;
};

struct BeatAnnotation {
    std::vector<double> peak_times_ms;
    Source source = Source::GroundTruth;
    std::string trace_label;

    std::size_t size() const noexcept { return peak_times_ms.size(); }
    bool empty() const noexcept { return peak_times_ms.empty(); }

    /// Strictly increasing and finite. When `trace` is given, every peak must
    /// also fall inside it.
    void validate(const SignalTrace* trace = nullptr) const;
};

struct IntervalSeries {
    std::vector<double> intervals_ms;
    double mean_ms = 0.0;
};

/// Consecutive peak differences. Needs at least two peaks.
IntervalSeries intervals_of(const BeatAnnotation& annotation);
IntervalSeries intervals_of(const std::vector<double>& peak_times_ms);

/// Beats with peak time in [begin_ms, end_ms).
BeatAnnotation slice_beats(const BeatAnnotation& beats, double begin_ms, double end_ms);

}  // namespace bcg

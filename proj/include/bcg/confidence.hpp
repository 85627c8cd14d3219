#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "bcg/signal.hpp"

namespace bcg {

/// Acceptance thresholds and F weights. A threshold set to its "off" value
/// (t_mc <= -1, t_rc = +inf) disables that criterion; the HR gate and the
/// definedness of c1/c2 still apply.
struct Thresholds {
    double t_mc = 0.75;
    double t_rc = 0.20;
    double w1 = 1.0;
    double w2 = 3.0;
    double epoch_ms = 12000.0;
    double hr_min_bpm = 30.0;
    double hr_max_bpm = 180.0;

    /// Throws InvalidParameter on non-positive weights or epoch length,
    /// or an empty HR range.
    void validate() const;
};

/// A window of a recording plus the beats whose peaks fall inside it.
/// The whole recording is shared so that beat segments near the epoch
/// edge can still be cut.
struct Epoch {
    std::shared_ptr<const SignalTrace> recording;
    double start_ms = 0.0;
    double end_ms = 0.0;
    BeatAnnotation beats;
    std::size_t M = 0;

    double length_ms() const noexcept { return end_ms - start_ms; }
    /// Copy of the recording samples in [start_ms, end_ms).
    SignalTrace trace_slice() const;
};

/// Contiguous half-open epochs of `epoch_ms` tiling the recording; the last
/// one may be shorter. Every beat goes to the epoch containing its time.
std::vector<Epoch> segment_epochs(std::shared_ptr<const SignalTrace> recording,
                                  const BeatAnnotation& beats, double epoch_ms);
std::vector<Epoch> segment_epochs(const SignalTrace& recording, const BeatAnnotation& beats,
                                  double epoch_ms);

/// M >= 3 and the epoch mean HR lies in [hr_min, hr_max].
bool hr_gate(const Epoch& epoch, double hr_min_bpm, double hr_max_bpm);

/// Mean Pearson correlation of each segment with the pointwise mean of all
/// segments. Returns nullopt when some segment is flat. A flat mean (for
/// example {x, -x}) correlates with nothing and yields 0.
std::optional<double> mean_normalized_correlation(const std::vector<std::vector<double>>& segments);

/// Windows of `segment_ms` centred on each beat; beats whose window leaves
/// the recording are skipped.
std::vector<std::vector<double>> beat_segments(const SignalTrace& recording,
                                               std::span<const double> peak_times_ms,
                                               double segment_ms);

/// min(median interval, 1000 ms); 1000 ms when the epoch has under 2 beats.
double segment_window_ms(const Epoch& epoch);

/// c1 of the epoch. nullopt when no segment fits in the recording or one of
/// them is flat.
std::optional<double> morphological_confidence(const Epoch& epoch, double segment_ms);

/// Interval SDNN normalized by the mean interval, with an M-2 divisor.
/// Throws InsufficientBeats for fewer than 3 beats.
double rhythmic_confidence(const Epoch& epoch);
double rhythmic_confidence(std::span<const double> peak_times_ms);

/// w1*c1 - w2*c2. Throws InvalidParameter unless both weights are positive.
double comprehensive_index(double c1, double c2, double w1, double w2);

struct ConfidenceScore {
    double epoch_start_ms = 0.0;
    double epoch_end_ms = 0.0;
    Source detector = Source::Tm;
    bool hr_ok = false;
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<double> F;
    bool acceptable = false;
};

/// Computes c1, c2 and F for one detector's epoch and applies the thresholds.
ConfidenceScore score_epoch(const Epoch& epoch, const Thresholds& thresholds);

/// Re-applies thresholds and weights to already computed c1/c2. Sweeps use
/// this so the correlations are computed once.
ConfidenceScore rescore(const ConfidenceScore& score, const Thresholds& thresholds);

nlohmann::json score_to_json(const ConfidenceScore& score);
ConfidenceScore score_from_json(const nlohmann::json& j);

}  // namespace bcg

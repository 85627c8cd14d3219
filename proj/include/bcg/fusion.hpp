#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "bcg/confidence.hpp"
#include "bcg/signal.hpp"
#include "bcg/synth.hpp"

namespace bcg {

/// Order used to settle exact ties in F and c2.
std::vector<Source> default_priority();

/// One detector's result for one epoch.
struct Candidate {
    ConfidenceScore score;
    BeatAnnotation beats;
};

struct FusionOutcome {
    double epoch_start_ms = 0.0;
    double epoch_end_ms = 0.0;
    std::optional<Source> chosen;
    std::vector<ConfidenceScore> candidates;
    BeatAnnotation chosen_beats;
};

/// Picks the acceptable candidate with the largest F; ties go to the lower
/// c2, then to the detector listed first in `priority`. The result does not
/// depend on the order of `candidates`. Throws InvalidInput when empty.
FusionOutcome fuse_epoch(const std::vector<Candidate>& candidates,
                         const std::vector<Source>& priority = default_priority());

/// Every detector's candidates for every epoch of one recording, scored once.
/// Rows are epochs; within a row the detectors appear in `detectors` order.
struct ScoredRecording {
    std::shared_ptr<const SignalTrace> recording;
    std::vector<Source> detectors;
    std::vector<std::vector<Candidate>> epochs;
};

ScoredRecording score_recording(std::shared_ptr<const SignalTrace> recording,
                                const std::map<Source, BeatAnnotation>& annotations,
                                const Thresholds& thresholds);

struct FusionResult {
    BeatAnnotation beats;
    std::vector<FusionOutcome> outcomes;
    /// Epochs that reported beats, in time order.
    std::vector<TimeRange> reported;
};

/// Re-applies `thresholds` to cached scores, fuses each epoch and joins the
/// chosen beats. Beats closer than the refractory spacing across a seam keep
/// the earlier one. `only` restricts the candidates to one detector, which
/// gives the gated solo result.
FusionResult assemble(const ScoredRecording& scored, const Thresholds& thresholds,
                      const std::vector<Source>& priority = default_priority(),
                      std::optional<Source> only = std::nullopt);

/// Scores and fuses at least two detectors. Throws InvalidInput otherwise.
FusionResult fuse_recording(std::shared_ptr<const SignalTrace> recording,
                            const std::map<Source, BeatAnnotation>& annotations,
                            const Thresholds& thresholds,
                            const std::vector<Source>& priority = default_priority());

/// One record per epoch: bounds, candidate scores and the chosen detector.
nlohmann::json fusion_audit(const FusionResult& result);

}  // namespace bcg

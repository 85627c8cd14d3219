#pragma once

#include <cstddef>
#include <vector>

#include "bcg/signal.hpp"
#include "bcg/synth.hpp"

namespace bcg {

/// Every knob of the template-matching detector.
struct TmConfig {
    // Step 1: motion artifacts.
    double artifact_k = 6.0;              // energy multiple of the median
    double artifact_window_ms = 2000.0;   // centred short-time energy window
    double artifact_hop_ms = 100.0;
    double artifact_dilation_ms = 1000.0;

    // Step 2: rhythm estimate, coarse beats, template.
    double min_unmasked_ms = 30000.0;
    double acf_window_ms = 10000.0;
    double acf_min_peak = 0.3;
    double refine_gate = 0.6;
    int refine_max_iter = 10;
    std::size_t min_template_beats = 8;

    // Step 3: bidirectional matching.
    double search_lo = 0.7;
    double search_hi = 1.3;
    double lambda = 0.7;          // NCC weight; DTW gets 1 - lambda
    double interval_alpha = 0.2;  // interval estimate update
    double template_beta = 0.1;   // dynamic template update
    double dtw_band = 0.1;        // Sakoe-Chiba width, fraction of template length
    std::size_t dtw_points = 100; // DTW inputs are block-averaged to about this length
    std::size_t shortlist = 5;    // NCC peaks per window that get a DTW score
    double snap_ms = 20.0;        // final snap to the local extremum

    // Step 4: pass fusion.
    double fuse_eps_ms = 50.0;
};

struct ArtifactMask {
    std::vector<TimeRange> intervals;  // sorted, disjoint

    bool contains(double t_ms) const;
    bool overlaps(double begin_ms, double end_ms) const;
    double covered_ms() const;
};

struct Template {
    std::vector<double> waveform;
    double sampling_hz = 0.0;
    double length_ms = 0.0;
    std::size_t member_count = 0;
    std::size_t j_offset = 0;  // index of the max-magnitude sample
};

/// Beats plus the match score each one was accepted with.
struct ScoredBeats {
    BeatAnnotation beats;
    std::vector<double> scores;
};

struct TmPasses {
    ScoredBeats forward;
    ScoredBeats backward;
};

/// Windows whose short-time energy exceeds artifact_k times the recording
/// median, dilated on both sides and merged.
ArtifactMask detect_artifacts(const SignalTrace& trace, const TmConfig& config = {});

/// Dominant beat period from autocorrelation averaged over unmasked
/// windows. Throws NoRhythmFound when no admissible peak clears
/// acf_min_peak.
double estimate_period_ms(const SignalTrace& trace, const ArtifactMask& mask,
                          const TmConfig& config = {});

/// Coarse beats on the estimated periodic grid; only used to seed the template.
BeatAnnotation initial_detect(const SignalTrace& trace, const ArtifactMask& mask,
                              const TmConfig& config = {});

/// Ensemble average of coarse-beat segments with iterative correlation
/// gating. Throws TemplateFailure when fewer than 3 members survive.
Template build_template(const SignalTrace& trace, const BeatAnnotation& coarse,
                        const TmConfig& config = {}, const ArtifactMask& mask = {});

/// Forward and backward tracking from the best-matching coarse beat.
TmPasses match_passes(const SignalTrace& trace, const Template& tmpl, const ArtifactMask& mask,
                      const BeatAnnotation& coarse, const TmConfig& config = {});

/// Pairs agreeing within eps merge to their mean; otherwise the higher
/// score wins. The result keeps the 180 bpm refractory spacing.
BeatAnnotation fuse_passes(const ScoredBeats& forward, const ScoredBeats& backward,
                           double eps_ms = 50.0);
BeatAnnotation fuse_passes(const BeatAnnotation& forward, const BeatAnnotation& backward,
                           double eps_ms = 50.0);

BeatAnnotation match_detect(const SignalTrace& trace, const Template& tmpl, const ArtifactMask& mask,
                            const BeatAnnotation& coarse, const TmConfig& config = {});

/// Steps 1-4 on a band-passed trace.
BeatAnnotation detect_tm(const SignalTrace& trace, const TmConfig& config = {});

}  // namespace bcg

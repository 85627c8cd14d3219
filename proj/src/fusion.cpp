#include "bcg/fusion.hpp"

#include <algorithm>

#include "bcg/error.hpp"

namespace bcg {

namespace {

std::size_t rank_of(Source s, const std::vector<Source>& priority) {
    auto it = std::find(priority.begin(), priority.end(), s);
    return static_cast<std::size_t>(it - priority.begin());
}

// True when a should be preferred over b. Both are acceptable.
bool better(const Candidate& a, const Candidate& b, const std::vector<Source>& priority) {
    if (*a.score.F != *b.score.F) return *a.score.F > *b.score.F;
    if (*a.score.c2 != *b.score.c2) return *a.score.c2 < *b.score.c2;
    const std::size_t ra = rank_of(a.score.detector, priority);
    const std::size_t rb = rank_of(b.score.detector, priority);
    if (ra != rb) return ra < rb;
    // Same detector twice: fall back to the beats themselves so the answer
    // stays independent of input order.
    return a.beats.peak_times_ms < b.beats.peak_times_ms;
}

}  // namespace

std::vector<Source> default_priority() { return {Source::Tm, Source::Dl, Source::Alternate}; }

FusionOutcome fuse_epoch(const std::vector<Candidate>& candidates, const std::vector<Source>& priority) {
    if (candidates.empty()) fail(ErrorKind::InvalidInput, "fuse_epoch needs every detector's score");
    FusionOutcome out;
    out.epoch_start_ms = candidates.front().score.epoch_start_ms;
    out.epoch_end_ms = candidates.front().score.epoch_end_ms;
    for (const auto& c : candidates) {
        if (c.score.epoch_start_ms != out.epoch_start_ms || c.score.epoch_end_ms != out.epoch_end_ms)
            fail(ErrorKind::InvalidInput, "candidates refer to different epochs");
    }

    std::vector<const Candidate*> order;
    for (const auto& c : candidates) order.push_back(&c);
    // Audit records are listed in priority order whatever the input order.
    std::stable_sort(order.begin(), order.end(), [&](const Candidate* a, const Candidate* b) {
        return rank_of(a->score.detector, priority) < rank_of(b->score.detector, priority);
    });
    for (const Candidate* c : order) out.candidates.push_back(c->score);

    const Candidate* best = nullptr;
    for (const Candidate* c : order) {
        if (!c->score.acceptable) continue;
        if (!best || better(*c, *best, priority)) best = c;
    }
    if (best) {
        out.chosen = best->score.detector;
        out.chosen_beats = best->beats;
    } else {
        out.chosen_beats.source = Source::Hybrid;
    }
    return out;
}

ScoredRecording score_recording(std::shared_ptr<const SignalTrace> recording,
                                const std::map<Source, BeatAnnotation>& annotations,
                                const Thresholds& thresholds) {
    thresholds.validate();
    ScoredRecording out;
    out.recording = recording;
    std::vector<std::vector<Epoch>> per_detector;
    for (const auto& [source, annotation] : annotations) {
        BeatAnnotation tagged = annotation;
        tagged.source = source;
        out.detectors.push_back(source);
        per_detector.push_back(segment_epochs(recording, tagged, thresholds.epoch_ms));
    }
    if (per_detector.empty()) return out;
    const std::size_t n_epochs = per_detector.front().size();
    out.epochs.resize(n_epochs);
    for (std::size_t k = 0; k < n_epochs; ++k) {
        for (const auto& epochs : per_detector) {
            const Epoch& e = epochs[k];
            out.epochs[k].push_back({score_epoch(e, thresholds), e.beats});
        }
    }
    return out;
}

FusionResult assemble(const ScoredRecording& scored, const Thresholds& thresholds,
                      const std::vector<Source>& priority, std::optional<Source> only) {
    thresholds.validate();
    FusionResult out;
    out.beats.source = only ? *only : Source::Hybrid;
    out.beats.trace_label = scored.recording ? scored.recording->label : std::string();
    for (const auto& row : scored.epochs) {
        std::vector<Candidate> cands;
        for (const auto& c : row) {
            if (only && c.score.detector != *only) continue;
            cands.push_back({rescore(c.score, thresholds), c.beats});
        }
        if (cands.empty()) fail(ErrorKind::InvalidInput, "requested detector was not scored");
        FusionOutcome outcome = fuse_epoch(cands, priority);
        if (outcome.chosen) {
            for (double t : outcome.chosen_beats.peak_times_ms) {
                // Seam: the earlier beat of a too-close pair survives.
                if (!out.beats.peak_times_ms.empty() && t - out.beats.peak_times_ms.back() < kRefractoryMs)
                    continue;
                out.beats.peak_times_ms.push_back(t);
            }
            out.reported.push_back({outcome.epoch_start_ms, outcome.epoch_end_ms});
        }
        out.outcomes.push_back(std::move(outcome));
    }
    return out;
}

FusionResult fuse_recording(std::shared_ptr<const SignalTrace> recording,
                            const std::map<Source, BeatAnnotation>& annotations,
                            const Thresholds& thresholds, const std::vector<Source>& priority) {
    if (annotations.size() < 2)
        fail(ErrorKind::InvalidInput, "hybrid fusion needs at least 2 detectors, got " +
                                          std::to_string(annotations.size()));
    return assemble(score_recording(std::move(recording), annotations, thresholds), thresholds, priority);
}

nlohmann::json fusion_audit(const FusionResult& result) {
    auto records = nlohmann::json::array();
    for (const auto& o : result.outcomes) {
        auto cands = nlohmann::json::array();
        for (const auto& c : o.candidates) cands.push_back(score_to_json(c));
        records.push_back({{"epoch_start_ms", o.epoch_start_ms},
                           {"epoch_end_ms", o.epoch_end_ms},
                           {"chosen", o.chosen ? nlohmann::json(std::string(to_string(*o.chosen)))
                                               : nlohmann::json(nullptr)},
                           {"beats", o.chosen_beats.size()},
                           {"candidates", cands}});
    }
    return records;
}

}  // namespace bcg

#include <cmath>

#include "doctest.h"
#include "bcg/envelope_detector.hpp"
#include "bcg/filter.hpp"
#include "bcg/metrics.hpp"
#include "bcg/synth.hpp"
#include "bcg/tm_detector.hpp"
#include "support/helpers.hpp"

using namespace bcg;

namespace {

void check_refractory(const BeatAnnotation& a) {
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.peak_times_ms[i] - a.peak_times_ms[i - 1] >= kRefractoryMs);
}

}  // namespace

TEST_CASE("noiseless 60 bpm") {
    SubjectProfile p;
    p.hrv_rmssd_target_ms = 0.0;
    p.beat_variability = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        p.morphology_seed = seed;
        const auto rec = generate_recording(p, CorruptionSpec{}, 60.0, 1000.0, seed);
        const auto det = envelope_detect(bandpass_filter(rec.trace));
        const auto err = testing::nearest_errors(rec.truth.peak_times_ms, det.peak_times_ms);
        CHECK(testing::fraction_within(err, 30.0) >= 0.95);
        CHECK(det.source == Source::Alternate);
    }
}

TEST_CASE("all-zero trace") {
    CHECK(envelope_detect(testing::make_trace(std::vector<double>(20000, 0.0))).empty());
}

TEST_CASE("large alternating K waves hurt the envelope detector more than TM") {
    // Every other beat carries a K lobe larger than J.
    RenderRequest r;
    for (double t = 600.0; t < 120000.0; t += 900.0) {
        r.beat_times_ms.push_back(t);
        Morphology m = default_morphology();
        if (r.morphologies.size() % 2) m[3].amplitude = -1.2;
        r.morphologies.push_back(m);
    }
    r.corruption.snr_db = 25.0;
    r.duration_s = 120.0;
    r.seed = 4;
    const auto rec = render_recording(r);
    const auto y = bandpass_filter(rec.trace);
    const double env = e_abs(pair_intervals(rec.truth, envelope_detect(y)));
    const double tm = e_abs(pair_intervals(rec.truth, detect_tm(y)));
    CAPTURE(env);
    CAPTURE(tm);
    CHECK(env > 2.0 * tm);
    CHECK(env - tm > 10.0);
}

TEST_CASE("refractory spacing and validity on noisy input") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 0.0;
    c.artifact_burst_rate = 2.0;
    for (std::uint64_t seed : {5, 6, 7, 8}) {
        p.base_hr_bpm = 50.0 + 20.0 * static_cast<double>(seed - 5);
        const auto y = bandpass_filter(generate_recording(p, c, 120.0, 1000.0, seed).trace);
        const auto det = envelope_detect(y);
        CHECK_NOTHROW(det.validate(&y));
        check_refractory(det);
    }
    // Fast rhythm right at the limit.
    p.base_hr_bpm = 175.0;
    p.hrv_rmssd_target_ms = 5.0;
    const auto y = bandpass_filter(generate_recording(p, CorruptionSpec{}, 60.0, 1000.0, 9).trace);
    check_refractory(envelope_detect(y));
}

TEST_CASE("positive scaling leaves the output unchanged") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 10.0;
    const auto y = bandpass_filter(generate_recording(p, c, 60.0, 1000.0, 12).trace);
    const auto base = envelope_detect(y);
    REQUIRE(!base.empty());
    for (double k : {0.25, 3.0, 1024.0, 1e-3}) {
        auto z = y;
        for (double& v : z.samples) v *= k;
        CAPTURE(k);
        CHECK(envelope_detect(z).peak_times_ms == base.peak_times_ms);
    }
}

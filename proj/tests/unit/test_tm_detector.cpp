#include <cmath>

#include "doctest.h"
#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/similarity.hpp"
#include "bcg/synth.hpp"
#include "bcg/tm_detector.hpp"
#include "support/helpers.hpp"

using namespace bcg;

namespace {

SignalTrace filtered(const Recording& r) { return bandpass_filter(r.trace); }

Recording clean_recording(double bpm, double seconds, double snr = INFINITY, std::uint64_t seed = 1) {
    SubjectProfile p;
    p.base_hr_bpm = bpm;
    p.hrv_rmssd_target_ms = 0.0;
    p.beat_variability = 0.0;
    CorruptionSpec c;
    c.snr_db = snr;
    return generate_recording(p, c, seconds, 1000.0, seed);
}

void check_structure(const BeatAnnotation& a) {
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.peak_times_ms[i] - a.peak_times_ms[i - 1] >= kRefractoryMs);
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("artifact mask on a clean recording is small") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 20.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto rec = generate_recording(p, c, 120.0, 1000.0, seed);
        const auto mask = detect_artifacts(filtered(rec));
        CHECK(mask.covered_ms() <= 0.02 * rec.trace.duration_ms());
    }
}

TEST_CASE("artifact mask finds an injected burst") {
    RenderRequest r;
    for (double t = 600.0; t < 60000.0; t += 950.0) r.beat_times_ms.push_back(t);
    r.morphologies = {default_morphology()};
    r.corruption.snr_db = 20.0;
    r.corruption.artifact_gain = 5.0;
    r.bursts = {{30000.0, 35000.0}};
    r.duration_s = 60.0;
    const auto rec = render_recording(r);
    TmConfig cfg;
    const auto mask = detect_artifacts(filtered(rec), cfg);
    REQUIRE(mask.intervals.size() == 1);
    // The mask carries the configured dilation on both sides; the detected
    // edges themselves must sit within a second of the burst.
    const double start = mask.intervals[0].start_ms + cfg.artifact_dilation_ms;
    const double end = mask.intervals[0].end_ms - cfg.artifact_dilation_ms;
    CHECK(std::abs(start - 30000.0) <= 1000.0);
    CHECK(std::abs(end - 35000.0) <= 1000.0);
    CHECK(mask.contains(32000.0));
    CHECK(!mask.contains(10000.0));
    CHECK(mask.overlaps(28000.0, 29500.0));
}

TEST_CASE("all-zero trace has an empty mask") {
    const auto mask = detect_artifacts(testing::make_trace(std::vector<double>(60000, 0.0)));
    CHECK(mask.intervals.empty());
    CHECK(mask.covered_ms() == 0.0);
}

TEST_CASE("period estimates") {
    const auto t60 = filtered(clean_recording(60.0, 60.0));
    CHECK(estimate_period_ms(t60, detect_artifacts(t60)) == doctest::Approx(1000.0).epsilon(0.02));
    const auto t36 = filtered(clean_recording(36.0, 120.0));
    CHECK(std::abs(estimate_period_ms(t36, detect_artifacts(t36)) - 60000.0 / 36.0) <= 40.0);
    for (double bpm : {45.0, 80.0, 110.0, 140.0}) {
        const auto t = filtered(clean_recording(bpm, 60.0, 20.0));
        CAPTURE(bpm);
        CHECK(std::abs(estimate_period_ms(t, detect_artifacts(t)) - 60000.0 / bpm) <= 20.0);
    }
}

TEST_CASE("white noise has no rhythm") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        Rng rng(seed);
        std::vector<double> x(60000);
        for (double& v : x) v = rng.normal();
        const auto t = testing::make_trace(x);
        CHECK(kind_of([&] { initial_detect(t, ArtifactMask{}); }) == ErrorKind::NoRhythmFound);
    }
}

TEST_CASE("initial detection needs 30 s of clear signal") {
    const auto t = filtered(clean_recording(60.0, 40.0));
    ArtifactMask mask;
    mask.intervals = {{5000.0, 20000.0}};
    CHECK(kind_of([&] { initial_detect(t, mask); }) == ErrorKind::InvalidInput);
}

TEST_CASE("template of a noiseless recording matches the complex") {
    const auto rec = clean_recording(60.0, 60.0);
    const auto t = filtered(rec);
    const auto mask = detect_artifacts(t);
    const auto coarse = initial_detect(t, mask);
    const auto tmpl = build_template(t, coarse, {}, mask);
    CHECK(tmpl.member_count >= 3);
    CHECK(tmpl.length_ms >= 300.0);
    CHECK(tmpl.length_ms <= 1200.0);

    // Oracle: one complex rendered alone and band-passed the same way.
    RenderRequest one;
    one.beat_times_ms = {5000.0};
    one.morphologies = {subject_morphology(SubjectProfile{.base_hr_bpm = 60.0, .hrv_rmssd_target_ms = 0.0,
                                                          .beat_variability = 0.0})};
    one.corruption.respiration_gain = 0.0;
    one.duration_s = 10.0;
    const auto ref = bandpass_filter(render_recording(one).trace).samples;
    const auto len = static_cast<long>(tmpl.waveform.size());
    double best = -1.0;
    for (long shift = -60; shift <= 60; ++shift) {
        const long start = 5000 - static_cast<long>(tmpl.j_offset) + shift;
        std::vector<double> seg(ref.begin() + start, ref.begin() + start + len);
        best = std::max(best, pearson(seg, tmpl.waveform));
    }
    CHECK(best >= 0.999);
}

TEST_CASE("sign-alternating complexes cannot form a template") {
    // Balanced polarities with isolated complexes: every segment is exactly
    // the negative of its neighbour, so no member can pass the gate.
    RenderRequest r;
    std::vector<Morphology> morph;
    for (double t = 1000.0; t < 59000.0; t += 1000.0) {
        r.beat_times_ms.push_back(t);
        Morphology m = default_morphology();
        if (morph.size() % 2) for (auto& w : m) w.amplitude = -w.amplitude;
        morph.push_back(m);
    }
    REQUIRE(morph.size() % 2 == 0);
    r.morphologies = morph;
    r.corruption.respiration_gain = 0.0;
    r.duration_s = 60.0;
    const auto rec = render_recording(r);
    CHECK(kind_of([&] { build_template(rec.trace, rec.truth); }) == ErrorKind::TemplateFailure);
}

TEST_CASE("template keeps most beats at 20 dB") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 20.0;
    for (std::uint64_t seed : {4, 5, 6}) {
        const auto t = filtered(generate_recording(p, c, 120.0, 1000.0, seed));
        const auto mask = detect_artifacts(t);
        const auto coarse = initial_detect(t, mask);
        const auto tmpl = build_template(t, coarse, {}, mask);
        CHECK(static_cast<double>(tmpl.member_count) >= 0.8 * static_cast<double>(coarse.size()));
    }
}

TEST_CASE("too few coarse beats") {
    const auto t = filtered(clean_recording(60.0, 60.0));
    BeatAnnotation few{{5000.0, 6000.0, 7000.0}, Source::Tm, ""};
    CHECK(kind_of([&] { build_template(t, few); }) == ErrorKind::TemplateFailure);
}

TEST_CASE("noiseless 60 bpm: every beat within 5 ms") {
    const auto rec = clean_recording(60.0, 60.0);
    const auto det = detect_tm(filtered(rec));
    const auto err = testing::nearest_errors(rec.truth.peak_times_ms, det.peak_times_ms);
    CHECK(testing::fraction_within(err, 5.0) == 1.0);
    CHECK(det.size() == rec.truth.size());
    CHECK(det.source == Source::Tm);
}

TEST_CASE("fully masked trace yields nothing") {
    const auto t = filtered(clean_recording(60.0, 60.0));
    const auto mask = detect_artifacts(t);
    const auto coarse = initial_detect(t, mask);
    const auto tmpl = build_template(t, coarse, {}, mask);
    ArtifactMask all;
    all.intervals = {{t.start_time_ms, t.end_time_ms()}};
    CHECK(match_detect(t, tmpl, all, coarse).empty());
}

TEST_CASE("heart-rate ramp is tracked") {
    // Instantaneous rate rises linearly from 55 to 75 bpm over 120 s.
    RenderRequest r;
    for (double t = 500.0; t < 120000.0;) {
        r.beat_times_ms.push_back(t);
        t += 60000.0 / (55.0 + 20.0 * t / 120000.0);
    }
    r.morphologies = {default_morphology()};
    r.duration_s = 120.0;
    const auto rec = render_recording(r);
    const auto det = detect_tm(filtered(rec));
    const auto err = testing::nearest_errors(rec.truth.peak_times_ms, det.peak_times_ms);
    CHECK(testing::fraction_within(err, 20.0) >= 0.95);
}

TEST_CASE("noiseless input is exact to filter tolerance") {
    // Lobes symmetric about J keep the band-passed peak where J was placed.
    SubjectProfile p;
    p.waves = testing::symmetric_morphology();
    p.beat_variability = 0.0;
    p.hrv_rmssd_target_ms = 40.0;
    for (std::uint64_t seed : {11, 12, 13}) {
        p.morphology_seed = seed;
        const auto rec = generate_recording(p, CorruptionSpec{}, 120.0, 1000.0, seed);
        const auto det = detect_tm(filtered(rec));
        const auto err = testing::nearest_errors(rec.truth.peak_times_ms, det.peak_times_ms);
        CHECK(testing::fraction_within(err, 2.0) >= 0.99);
    }
}

TEST_CASE("output structure and determinism") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 5.0;
    c.artifact_burst_rate = 1.0;
    for (std::uint64_t seed : {21, 22}) {
        const auto t = filtered(generate_recording(p, c, 120.0, 1000.0, seed));
        const auto a = detect_tm(t);
        CHECK_NOTHROW(a.validate(&t));
        check_structure(a);
        CHECK(detect_tm(t).peak_times_ms == a.peak_times_ms);
    }
}

TEST_CASE("pass fusion") {
    const BeatAnnotation f{{1000, 2000, 3000, 4000}, Source::Tm, "x"};
    CHECK(fuse_passes(f, f).peak_times_ms == f.peak_times_ms);

    BeatAnnotation g = f;
    for (double& t : g.peak_times_ms) t += 10.0;
    CHECK(fuse_passes(f, g).peak_times_ms == std::vector<double>{1005, 2005, 3005, 4005});

    const BeatAnnotation none{{}, Source::Tm, "x"};
    CHECK(fuse_passes(f, none).peak_times_ms == f.peak_times_ms);
    CHECK(fuse_passes(none, f).peak_times_ms == f.peak_times_ms);

    // Disagreeing peaks inside the refractory window: the higher score wins.
    ScoredBeats a{{{1000, 2000}, Source::Tm, ""}, {0.9, 0.2}};
    ScoredBeats b{{{1000, 2200}, Source::Tm, ""}, {0.9, 0.8}};
    CHECK(fuse_passes(a, b).peak_times_ms == std::vector<double>{1000, 2200});
    b.scores[1] = 0.1;
    CHECK(fuse_passes(a, b).peak_times_ms == std::vector<double>{1000, 2000});

    // Agreeing peaks beyond eps stay separate if far enough apart.
    const BeatAnnotation h{{1400, 2400}, Source::Tm, ""};
    const auto fused = fuse_passes(BeatAnnotation{{1000, 2000}, Source::Tm, ""}, h);
    check_structure(fused);
}

TEST_CASE("pass fusion keeps the refractory spacing on random input") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        ScoredBeats a, b;
        double t = 0.0;
        while ((t += rng.uniform(200.0, 1400.0)) < 30000.0) {
            a.beats.peak_times_ms.push_back(t);
            a.scores.push_back(rng.uniform());
        }
        t = 0.0;
        while ((t += rng.uniform(200.0, 1400.0)) < 30000.0) {
            b.beats.peak_times_ms.push_back(t);
            b.scores.push_back(rng.uniform());
        }
        const auto out = fuse_passes(a, b);
        CHECK_NOTHROW(out.validate());
        check_structure(out);
    }
}

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/io.hpp"
#include "bcg/metrics.hpp"
#include "bcg/similarity.hpp"
#include "bcg/synth.hpp"
#include "support/helpers.hpp"

using namespace bcg;
namespace fs = std::filesystem;

namespace {

SubjectProfile steady(double bpm) {
    SubjectProfile p;
    p.base_hr_bpm = bpm;
    p.hrv_rmssd_target_ms = 0.0;
    p.beat_variability = 0.0;
    return p;
}

double mean_square(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

std::vector<double> window(const std::vector<double>& x, double fs, double centre_ms, double half_ms) {
    const auto c = static_cast<long>(std::llround(centre_ms * fs / 1000.0));
    const auto h = static_cast<long>(std::llround(half_ms * fs / 1000.0));
    return {x.begin() + (c - h), x.begin() + (c + h + 1)};
}

}  // namespace

TEST_CASE("noiseless steady rhythm") {
    CorruptionSpec c;  // snr = inf
    const auto rec = generate_recording(steady(60.0), c, 10.0, 1000.0, 42);
    const auto& peaks = rec.truth.peak_times_ms;
    CHECK((peaks.size() == 10 || peaks.size() == 11));
    for (std::size_t i = 1; i < peaks.size(); ++i) CHECK(peaks[i] - peaks[i - 1] == doctest::Approx(1000.0));
    CHECK(rec.trace.size() == 10000);

    // The nearest local maximum of the raw trace sits on each annotation.
    const auto& x = rec.trace.samples;
    for (double t : peaks) {
        const auto i = static_cast<std::size_t>(std::llround(t));
        if (i < 3 || i + 3 >= x.size()) continue;
        std::size_t best = i;
        for (std::size_t k = i - 3; k <= i + 3; ++k)
            if (x[k] > x[best]) best = k;
        CHECK(x[best - 1] <= x[best]);
        CHECK(x[best + 1] <= x[best]);
        CHECK(std::abs(static_cast<double>(best) - t) <= 2.0);
    }
}

TEST_CASE("same seed gives identical output") {
    SubjectProfile p;
    p.arrhythmia_rate = 0.05;
    CorruptionSpec c;
    c.snr_db = 10.0;
    c.artifact_burst_rate = 2.0;
    const auto a = generate_recording(p, c, 60.0, 1000.0, 9);
    const auto b = generate_recording(p, c, 60.0, 1000.0, 9);
    CHECK(a.trace.samples == b.trace.samples);
    CHECK(a.truth.peak_times_ms == b.truth.peak_times_ms);
    CHECK(format_signal_csv(a.trace) == format_signal_csv(b.trace));
    const auto other = generate_recording(p, c, 60.0, 1000.0, 10);
    CHECK(other.trace.samples != a.trace.samples);
}

TEST_CASE("ectopic beats raise RMSSD") {
    SubjectProfile p;
    p.hrv_rmssd_target_ms = 20.0;
    const auto calm = generate_beat_times(p, 0.25, 600000.0, 7);
    p.arrhythmia_rate = 0.1;
    const auto ectopic = generate_beat_times(p, 0.25, 600000.0, 7);
    const double r0 = rmssd(intervals_of(calm));
    const double r1 = rmssd(intervals_of(ectopic));
    CHECK(r1 >= 2.0 * r0);
}

TEST_CASE("RMSSD target is met without ectopics") {
    for (double target : {15.0, 40.0, 80.0}) {
        SubjectProfile p;
        p.hrv_rmssd_target_ms = target;
        const auto beats = generate_beat_times(p, 0.25, 600000.0, 3);
        CAPTURE(target);
        CHECK(rmssd(intervals_of(beats)) == doctest::Approx(target).epsilon(0.15));
    }
}

TEST_CASE("generation argument errors") {
    SubjectProfile p;
    CorruptionSpec c;
    auto kind = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    CHECK(kind([&] { generate_recording(p, c, 0.0, 1000.0, 1); }) == ErrorKind::InvalidParameter);
    CHECK(kind([&] { generate_recording(p, c, 10.0, -1.0, 1); }) == ErrorKind::InvalidParameter);
    auto bad = c;
    bad.respiration_hz = 0.6;
    CHECK(kind([&] { generate_recording(p, bad, 10.0, 1000.0, 1); }) == ErrorKind::InvalidParameter);
    bad = c;
    bad.artifact_gain = 0.5;
    CHECK(kind([&] { generate_recording(p, bad, 10.0, 1000.0, 1); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("interval bounds hold") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        SubjectProfile p;
        p.base_hr_bpm = rng.uniform(36.52, 145.81);
        p.hrv_rmssd_target_ms = rng.uniform(0.0, 150.0);
        p.arrhythmia_rate = trial % 2 ? rng.uniform(0.0, 0.3) : 0.0;
        const auto beats = generate_beat_times(p, rng.uniform(0.15, 0.45), 120000.0, 100 + trial);
        const auto d = intervals_of(beats).intervals_ms;
        CAPTURE(p.base_hr_bpm);
        for (double v : d) {
            CHECK(v > 60000.0 / 180.0);
            if (p.arrhythmia_rate == 0.0) CHECK(v < 60000.0 / 36.0);
        }
    }
}

TEST_CASE("J stays the dominant lobe") {
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        SubjectProfile p;
        p.morphology_seed = seed;
        const auto m = subject_morphology(p);
        for (std::size_t k = 0; k < m.size(); ++k)
            if (k != kJWave) CHECK(std::abs(m[k].amplitude) < std::abs(m[kJWave].amplitude));
    }
}

TEST_CASE("noise lands at the requested band-passed SNR") {
    // With respiration and bursts off, the noise is the only difference
    // between a noisy render and a clean render of the same beats.
    for (double snr : {0.0, 10.0, 20.0}) {
        RenderRequest r;
        for (double t = 400.0; t < 60000.0; t += 870.0) r.beat_times_ms.push_back(t);
        r.morphologies = {default_morphology()};
        r.corruption.respiration_gain = 0.0;
        r.duration_s = 60.0;
        r.seed = 5;
        const auto clean = render_recording(r);
        r.corruption.snr_db = snr;
        const auto noisy = render_recording(r);
        std::vector<double> noise(clean.trace.size());
        for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy.trace.samples[i] - clean.trace.samples[i];
        const double ps = mean_square(bandpass_filter(clean.trace).samples);
        const double pn = mean_square(bandpass_filter(testing::make_trace(noise)).samples);
        CAPTURE(snr);
        CHECK(10.0 * std::log10(ps / pn) == doctest::Approx(snr).scale(1.0).epsilon(0.01));
    }
}

TEST_CASE("clean beats are alike after band-passing") {
    SubjectProfile p;
    CorruptionSpec c;
    c.snr_db = 20.0;
    const auto rec = generate_recording(p, c, 60.0, 1000.0, 21);
    const auto y = bandpass_filter(rec.trace).samples;
    std::vector<std::vector<double>> segs;
    for (double t : rec.truth.peak_times_ms)
        if (t > 400.0 && t < 59600.0) segs.push_back(window(y, 1000.0, t, 300.0));
    REQUIRE(segs.size() > 40);
    double worst = 1.0;
    for (std::size_t i = 0; i < segs.size(); ++i)
        for (std::size_t j = i + 1; j < segs.size(); ++j) worst = std::min(worst, pearson(segs[i], segs[j]));
    CHECK(worst >= 0.9);
}

TEST_CASE("bursts carry more energy than beats") {
    RenderRequest r;
    for (double t = 500.0; t < 60000.0; t += 1000.0) r.beat_times_ms.push_back(t);
    r.morphologies = {default_morphology()};
    r.corruption.artifact_gain = 3.0;
    r.corruption.respiration_gain = 0.0;
    r.bursts = {{20000.0, 25000.0}};
    r.duration_s = 60.0;
    const auto rec = render_recording(r);
    REQUIRE(rec.bursts.size() == 1);
    CHECK(rec.bursts[0].start_ms == 20000.0);
    CHECK(rec.bursts[0].end_ms == 25000.0);
    const auto y = bandpass_filter(rec.trace).samples;
    std::vector<double> beat_energy;
    for (double t = 500.0; t + 500.0 < 60000.0; t += 1000.0) {
        if (t > 19000.0 && t < 26000.0) continue;
        beat_energy.push_back(mean_square(window(y, 1000.0, t, 499.0)));
    }
    std::sort(beat_energy.begin(), beat_energy.end());
    const double median = beat_energy[beat_energy.size() / 2];
    const double burst = mean_square(std::vector<double>(y.begin() + 20000, y.begin() + 25000));
    CHECK(burst > 3.0 * median);
}

TEST_CASE("random bursts follow the requested rate") {
    SubjectProfile p;
    CorruptionSpec c;
    c.artifact_burst_rate = 1.0;
    std::size_t total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto rec = generate_recording(p, c, 600.0, 100.0, seed);
        for (std::size_t i = 1; i < rec.bursts.size(); ++i) CHECK(rec.bursts[i].start_ms > rec.bursts[i - 1].end_ms);
        total += rec.bursts.size();
    }
    // 100 expected bursts before merging; overlaps only remove a few.
    CHECK(total >= 70);
    CHECK(total <= 130);
}

TEST_CASE("corpus spec parsing") {
    const auto entries = parse_corpus_spec(
        "# two recordings\n"
        "label=a\nduration_s=20\nseed=3\nbase_hr_bpm=70\n\n"
        "label=b\nsnr_db=10\nartifact_burst_rate=0.5\n");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].label == "a");
    CHECK(entries[0].duration_s == 20.0);
    CHECK(entries[0].profile.base_hr_bpm == 70.0);
    CHECK(entries[1].corruption.snr_db == 10.0);
    CHECK(entries[0].seed != entries[1].seed);
    CHECK(parse_corpus_spec("").empty());
    CHECK(parse_corpus_spec("# nothing\n\n").empty());

    auto error_of = [](std::string_view text) {
        try {
            parse_corpus_spec(text);
        } catch (const Error& e) {
            return std::pair<ErrorKind, std::string>{e.kind(), e.what()};
        }
        return std::pair<ErrorKind, std::string>{ErrorKind::Io, ""};
    };
    auto [k1, m1] = error_of("label=a\nbogus_key=1\n");
    CHECK(k1 == ErrorKind::Parse);
    CHECK(m1.find("line 2") != std::string::npos);
    auto [k2, m2] = error_of("label=a\n\nlabel=b\nsnr_db=abc\n");
    CHECK(k2 == ErrorKind::Parse);
    CHECK(m2.find("line 4") != std::string::npos);
    auto [k3, m3] = error_of("label=a\nno equals sign\n");
    CHECK(k3 == ErrorKind::Parse);
    CHECK(error_of("label=a\n\nlabel=a\n").first == ErrorKind::DuplicateLabel);
}

TEST_CASE("corpus generation writes files and a manifest") {
    const auto dir = testing::fresh_dir(fs::path(BCG_SCRATCH) / "corpus");
    CHECK(generate_corpus(std::vector<CorpusEntry>{}, dir / "empty").empty());
    CHECK(read_manifest(dir / "empty" / "manifest.json").empty());
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "empty"))
        if (e.path().filename() != "manifest.json") ++files;
    CHECK(files == 0);

    const std::string spec =
        "label=r1\nduration_s=15\n\nlabel=r2\nduration_s=15\nsnr_db=5\n\nlabel=r3\nduration_s=15\n"
        "artifact_burst_rate=4\n";
    std::ofstream(dir / "spec.txt") << spec;
    const auto manifest = generate_corpus(dir / "spec.txt", dir / "out", 3);
    REQUIRE(manifest.size() == 3);
    const auto listed = read_manifest(dir / "out" / "manifest.json");
    REQUIRE(listed.size() == 3);
    std::set<std::string> names;
    for (const auto& m : listed) {
        names.insert(m.label);
        const auto trace = read_signal_csv(dir / "out" / m.signal_path);
        const auto ann = read_annotation_json(dir / "out" / m.annotation_path);
        CHECK(ann.warnings.empty());
        CHECK_NOTHROW(ann.annotation.validate(&trace));
        CHECK(trace.label == m.label);
    }
    CHECK(names == std::set<std::string>{"r1", "r2", "r3"});
    std::size_t csv = 0, json = 0;
    for (const auto& e : fs::directory_iterator(dir / "out")) {
        csv += e.path().extension() == ".csv";
        json += e.path().extension() == ".json" && e.path().filename() != "manifest.json";
    }
    CHECK(csv == 3);
    CHECK(json == 3);

    // Worker count does not change the bytes.
    generate_corpus(dir / "spec.txt", dir / "serial", 1);
    for (const auto& m : listed)
        CHECK(read_text_file(dir / "serial" / m.signal_path) == read_text_file(dir / "out" / m.signal_path));
    CHECK(read_text_file(dir / "serial" / "manifest.json") == read_text_file(dir / "out" / "manifest.json"));

    std::ofstream(dir / "dup.txt") << "label=x\n\nlabel=x\n";
    CHECK_THROWS_AS(generate_corpus(dir / "dup.txt", dir / "dup"), Error);
}

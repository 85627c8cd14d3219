#include "bcg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/io.hpp"
#include "bcg/parallel.hpp"
#include "bcg/rng.hpp"

namespace bcg {

namespace fs = std::filesystem;

namespace {

constexpr double kMinIntervalMs = 60000.0 / 180.0;
constexpr double kMaxIntervalMs = 60000.0 / 36.0;
constexpr double kEctopicFloorMs = kMinIntervalMs + 5.0;
constexpr double kComplexReachMs = 450.0;

double mean_square(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

std::vector<double> detection_band(const std::vector<double>& x, double fs) {
    if (fs / 2.0 <= 10.0) return x;
    return filtfilt(design_butterworth_bandpass(1.0, 10.0, 3, fs), x);
}

std::vector<double> burst_waveform(std::size_t n, double fs, Rng& rng) {
    constexpr int kTones = 6;
    std::array<double, kTones> freq{}, phase{}, amp{};
    for (int k = 0; k < kTones; ++k) {
        freq[k] = rng.uniform(0.7, 6.0);
        phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        amp[k] = rng.uniform(0.3, 1.0);
    }
    std::vector<double> w(n);
    const double taper = 0.25 * fs;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double v = 0.0;
        for (int k = 0; k < kTones; ++k)
            v += amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * t + phase[k]);
        const double edge = std::min(static_cast<double>(i), static_cast<double>(n - 1 - i));
        if (edge < taper) v *= 0.5 - 0.5 * std::cos(std::numbers::pi * edge / taper);
        w[i] = v;
    }
    return w;
}

}  // namespace

Morphology default_morphology() {
    return {{
        {0.25, 30.0, -170.0},  // H
        {-0.45, 22.0, -75.0},  // I
        {1.00, 22.0, 0.0},     // J
        {-0.50, 25.0, 80.0},   // K
        {0.20, 35.0, 180.0},   // L
    }};
}

Morphology subject_morphology(const SubjectProfile& profile) {
    Rng rng(profile.morphology_seed);
    Morphology m = profile.waves;
    for (std::size_t k = 0; k < m.size(); ++k) {
        m[k].amplitude *= rng.uniform(0.8, 1.2);
        m[k].width_ms *= rng.uniform(0.8, 1.2);
        if (k != kJWave) m[k].offset_ms *= rng.uniform(0.85, 1.15);
    }
    double other = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k)
        if (k != kJWave) other = std::max(other, std::abs(m[k].amplitude));
    if (std::abs(m[kJWave].amplitude) <= other) m[kJWave].amplitude = 1.05 * other;
    return m;
}

double complex_value(const Morphology& m, double t_ms) {
    double v = 0.0;
    for (const auto& w : m) {
        const double z = (t_ms - w.offset_ms) / w.width_ms;
        v += w.amplitude * std::exp(-0.5 * z * z);
    }
    return v;
}

std::vector<double> generate_beat_times(const SubjectProfile& profile, double respiration_hz,
                                        double duration_ms, std::uint64_t seed) {
    if (!(profile.base_hr_bpm > 0.0)) fail(ErrorKind::InvalidParameter, "base_hr_bpm must be > 0");
    if (profile.arrhythmia_rate < 0.0 || profile.arrhythmia_rate > 1.0)
        fail(ErrorKind::InvalidParameter, "arrhythmia_rate must lie in [0, 1]");
    Rng rng(seed);
    const double nominal = 60000.0 / profile.base_hr_bpm;
    const double target = std::max(0.0, profile.hrv_rmssd_target_ms);

    // Half of the target RMSSD^2 from respiratory sinus arrhythmia, the rest
    // from white interval jitter (successive-difference variance 2*sigma^2).
    const double omega = 2.0 * std::numbers::pi * respiration_hz;
    const double rsa_per_unit = nominal * omega * (nominal / 1000.0) / std::numbers::sqrt2;
    double rsa_amp = rsa_per_unit > 0.0 ? (target / std::numbers::sqrt2) / rsa_per_unit : 0.0;
    rsa_amp = std::min(rsa_amp, 0.08);
    const double rsa_rmssd = rsa_amp * rsa_per_unit;
    const double jitter_sd = std::sqrt(std::max(0.0, target * target - rsa_rmssd * rsa_rmssd) / 2.0);
    const double rsa_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    std::vector<double> beats;
    double t = rng.uniform(0.3, 1.0) * std::min(nominal, 1000.0);
    bool compensate = false;
    double pending = 0.0;
    while (t < duration_ms) {
        beats.push_back(t);
        double interval;
        if (compensate) {
            interval = pending;
            compensate = false;
        } else {
            interval = nominal * (1.0 + rsa_amp * std::sin(omega * t / 1000.0 + rsa_phase)) +
                       jitter_sd * rng.normal();
            interval = std::clamp(interval, kMinIntervalMs + 1.0, kMaxIntervalMs - 1.0);
            if (profile.arrhythmia_rate > 0.0 && rng.uniform() < profile.arrhythmia_rate) {
                pending = 1.3 * interval;
                interval = std::max(0.7 * interval, kEctopicFloorMs);
                compensate = true;
            }
        }
        t += interval;
    }
    return beats;
}

Recording render_recording(const RenderRequest& req) {
    if (!(req.duration_s > 0.0) || !(req.sampling_hz > 0.0))
        fail(ErrorKind::InvalidParameter, "duration and sampling rate must be positive");
    if (req.morphologies.empty())
        fail(ErrorKind::InvalidParameter, "at least one morphology is required");
    if (req.morphologies.size() != 1 && req.morphologies.size() != req.beat_times_ms.size())
        fail(ErrorKind::InvalidParameter, "need one morphology per beat or a single one");
    const auto& c = req.corruption;
    if (!(c.respiration_hz > 0.1 && c.respiration_hz < 0.5))
        fail(ErrorKind::InvalidParameter, "respiration_hz must lie in (0.1, 0.5)");
    if (!(c.artifact_gain >= 1.0)) fail(ErrorKind::InvalidParameter, "artifact_gain must be >= 1");

    Rng rng(req.seed ^ 0x9e3779b97f4a7c15ULL);
    const double fs = req.sampling_hz;
    const auto n = static_cast<std::size_t>(std::llround(req.duration_s * fs));
    const double duration_ms = static_cast<double>(n) / fs * 1000.0;

    Recording rec;
    rec.trace.sampling_hz = fs;
    rec.trace.label = req.label;
    rec.truth.source = Source::GroundTruth;
    rec.truth.trace_label = req.label;

    std::vector<double> cardiac(n, 0.0);
    for (std::size_t b = 0; b < req.beat_times_ms.size(); ++b) {
        const double tb = req.beat_times_ms[b];
        if (tb < 0.0 || tb >= duration_ms) continue;
        rec.truth.peak_times_ms.push_back(tb);
        const Morphology& m = req.morphologies.size() == 1 ? req.morphologies[0] : req.morphologies[b];
        const auto lo = static_cast<std::ptrdiff_t>(std::ceil((tb - kComplexReachMs) * fs / 1000.0));
        const auto hi = static_cast<std::ptrdiff_t>(std::floor((tb + kComplexReachMs) * fs / 1000.0));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
             i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
            cardiac[static_cast<std::size_t>(i)] +=
                complex_value(m, static_cast<double>(i) * 1000.0 / fs - tb);
        }
    }
    rec.truth.validate();

    const double j_amp = std::abs(req.morphologies[0][kJWave].amplitude);
    const double signal_power = mean_square(detection_band(cardiac, fs));

    std::vector<double> x = cardiac;
    if (c.respiration_gain != 0.0) {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < n; ++i)
            x[i] += c.respiration_gain * j_amp *
                    std::sin(2.0 * std::numbers::pi * c.respiration_hz * static_cast<double>(i) / fs + phase);
    }

    std::vector<TimeRange> bursts = req.bursts;
    if (c.artifact_burst_rate > 0.0) {
        const double rate_per_ms = c.artifact_burst_rate / 60000.0;
        for (double t = rng.exponential(rate_per_ms); t < duration_ms; t += rng.exponential(rate_per_ms)) {
            const double len = rng.uniform(2000.0, 8000.0);
            bursts.push_back({t, std::min(t + len, duration_ms)});
        }
    }
    std::sort(bursts.begin(), bursts.end(),
              [](const TimeRange& a, const TimeRange& b) { return a.start_ms < b.start_ms; });
    const double burst_rms = c.artifact_gain * std::sqrt(signal_power);
    for (const auto& burst : bursts) {
        const auto i0 = static_cast<std::size_t>(std::max(0.0, std::round(burst.start_ms * fs / 1000.0)));
        const auto i1 = std::min(n, static_cast<std::size_t>(std::round(burst.end_ms * fs / 1000.0)));
        if (i1 <= i0 + 1) continue;
        auto w = burst_waveform(i1 - i0, fs, rng);
        const double rms = std::sqrt(mean_square(w));
        for (std::size_t i = 0; i < w.size(); ++i) x[i0 + i] += w[i] * burst_rms / rms;
    }
    for (const auto& burst : bursts) {
        if (!rec.bursts.empty() && burst.start_ms <= rec.bursts.back().end_ms)
            rec.bursts.back().end_ms = std::max(rec.bursts.back().end_ms, burst.end_ms);
        else
            rec.bursts.push_back(burst);
    }

    if (std::isfinite(c.snr_db) && signal_power > 0.0) {
        std::vector<double> noise(n);
        for (double& v : noise) v = rng.normal();
        const double in_band = mean_square(detection_band(noise, fs));
        const double scale = std::sqrt(signal_power / std::pow(10.0, c.snr_db / 10.0) / in_band);
        for (std::size_t i = 0; i < n; ++i) x[i] += scale * noise[i];
    }
    rec.trace.samples = std::move(x);
    return rec;
}

Recording generate_recording(const SubjectProfile& profile, const CorruptionSpec& corruption,
                             double duration_s, double sampling_hz, std::uint64_t seed,
                             const std::string& label) {
    if (!(duration_s > 0.0) || !(sampling_hz > 0.0))
        fail(ErrorKind::InvalidParameter, "duration and sampling rate must be positive");
    RenderRequest req;
    req.beat_times_ms = generate_beat_times(profile, corruption.respiration_hz,
                                            duration_s * 1000.0, seed);
    const Morphology base = subject_morphology(profile);
    Rng rng(seed + 0x51ed27ULL);
    req.morphologies.reserve(req.beat_times_ms.size());
    for (std::size_t b = 0; b < req.beat_times_ms.size(); ++b) {
        Morphology m = base;
        for (auto& w : m) w.amplitude *= 1.0 + profile.beat_variability * rng.normal();
        req.morphologies.push_back(m);
    }
    if (req.morphologies.empty()) req.morphologies.push_back(base);
    req.corruption = corruption;
    req.duration_s = duration_s;
    req.sampling_hz = sampling_hz;
    req.seed = seed;
    req.label = label;
    return render_recording(req);
}

std::vector<CorpusEntry> parse_corpus_spec(std::string_view text) {
    std::vector<CorpusEntry> entries;
    std::set<std::string> labels;
    CorpusEntry current;
    bool open = false;
    bool seeded = false;
    std::size_t line_no = 0;

    auto close = [&](std::size_t at_line) {
        if (!open) return;
        if (current.label.empty())
            fail(ErrorKind::Parse, "line " + std::to_string(current.line) + ": block has no label");
        if (!labels.insert(current.label).second)
            fail(ErrorKind::DuplicateLabel, "line " + std::to_string(current.line) +
                                                ": duplicate label '" + current.label + "'");
        if (!seeded) current.seed = fnv1a(current.label);
        const auto& c = current.corruption;
        if (!(c.respiration_hz > 0.1 && c.respiration_hz < 0.5))
            fail(ErrorKind::Parse, "line " + std::to_string(at_line) + ": respiration_hz must lie in (0.1, 0.5)");
        if (!(c.artifact_gain >= 1.0))
            fail(ErrorKind::Parse, "line " + std::to_string(at_line) + ": artifact_gain must be >= 1");
        if (!(current.duration_s > 0.0) || !(current.sampling_hz > 0.0))
            fail(ErrorKind::Parse, "line " + std::to_string(at_line) + ": duration_s and sampling_hz must be > 0");
        entries.push_back(current);
        current = CorpusEntry{};
        open = false;
        seeded = false;
    };

    while (true) {
        const bool at_end = text.empty();
        std::string_view line;
        if (!at_end) {
            const auto nl = text.find('\n');
            line = text.substr(0, nl);
            text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
            ++line_no;
        }
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
        if (line.empty()) {
            close(line_no);
            if (at_end) break;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected key=value");
        std::string key(line.substr(0, eq));
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
        std::string_view value = line.substr(eq + 1);
        while (!value.empty() && std::isspace(static_cast<unsigned char>(value.front()))) value.remove_prefix(1);
        if (!open) {
            open = true;
            current.line = line_no;
        }
        auto num = [&]() {
            try {
                return parse_real(value);
            } catch (const Error& e) {
                fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
            }
        };
        auto& p = current.profile;
        auto& c = current.corruption;
        if (key == "label") current.label = std::string(value);
        else if (key == "duration_s") current.duration_s = num();
        else if (key == "sampling_hz") current.sampling_hz = num();
        else if (key == "seed") { current.seed = static_cast<std::uint64_t>(num()); seeded = true; }
        else if (key == "base_hr_bpm") p.base_hr_bpm = num();
        else if (key == "hrv_rmssd_ms") p.hrv_rmssd_target_ms = num();
        else if (key == "arrhythmia_rate") p.arrhythmia_rate = num();
        else if (key == "morphology_seed") p.morphology_seed = static_cast<std::uint64_t>(num());
        else if (key == "beat_variability") p.beat_variability = num();
        else if (key == "snr_db") c.snr_db = num();
        else if (key == "respiration_hz") c.respiration_hz = num();
        else if (key == "respiration_gain") c.respiration_gain = num();
        else if (key == "artifact_burst_rate") c.artifact_burst_rate = num();
        else if (key == "artifact_gain") c.artifact_gain = num();
        else fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return entries;
}

namespace {

nlohmann::json real_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json manifest_json(const CorpusEntry& e, const ManifestEntry& m) {
    nlohmann::json bursts = nlohmann::json::array();
    for (const auto& b : m.bursts) bursts.push_back({b.start_ms, b.end_ms});
    const auto& p = e.profile;
    const auto& c = e.corruption;
    return {{"label", m.label},
            {"signal_path", m.signal_path},
            {"annotation_path", m.annotation_path},
            {"profile_summary",
             {{"base_hr_bpm", p.base_hr_bpm},
              {"hrv_rmssd_ms", p.hrv_rmssd_target_ms},
              {"arrhythmia_rate", p.arrhythmia_rate},
              {"morphology_seed", p.morphology_seed},
              {"snr_db", real_or_null(c.snr_db)},
              {"respiration_hz", c.respiration_hz},
              {"artifact_burst_rate", c.artifact_burst_rate},
              {"artifact_gain", c.artifact_gain},
              {"duration_s", e.duration_s},
              {"sampling_hz", e.sampling_hz},
              {"seed", e.seed},
              {"artifact_bursts_ms", bursts}}}};
}

}  // namespace

std::vector<ManifestEntry> generate_corpus(const std::vector<CorpusEntry>& entries,
                                           const fs::path& out_dir, std::size_t workers) {
    fs::create_directories(out_dir);
    std::vector<ManifestEntry> manifest(entries.size());
    parallel_for(entries.size(), workers, [&](std::size_t i) {
        const auto& e = entries[i];
        const auto rec = generate_recording(e.profile, e.corruption, e.duration_s, e.sampling_hz,
                                            e.seed, e.label);
        ManifestEntry m{e.label, e.label + ".csv", e.label + ".json", rec.bursts};
        write_signal_csv(rec.trace, out_dir / m.signal_path);
        write_annotation_json(rec.truth, out_dir / m.annotation_path);
        manifest[i] = std::move(m);
    });
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) j.push_back(manifest_json(entries[i], manifest[i]));
    write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
    return manifest;
}

std::vector<ManifestEntry> generate_corpus(const fs::path& spec_file, const fs::path& out_dir,
                                           std::size_t workers) {
    return generate_corpus(parse_corpus_spec(read_text_file(spec_file)), out_dir, workers);
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
    }
    if (!j.is_array()) fail(ErrorKind::Parse, manifest_path.string() + ": manifest must be an array");
    std::vector<ManifestEntry> out;
    for (const auto& item : j) {
        try {
            ManifestEntry m;
            m.label = item.at("label").get<std::string>();
            m.signal_path = item.at("signal_path").get<std::string>();
            m.annotation_path = item.at("annotation_path").get<std::string>();
            if (item.contains("profile_summary") && item["profile_summary"].contains("artifact_bursts_ms"))
                for (const auto& b : item["profile_summary"]["artifact_bursts_ms"])
                    m.bursts.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
            out.push_back(std::move(m));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace bcg

#include "bcg/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcg/error.hpp"
#include "bcg/similarity.hpp"

namespace bcg {

namespace {

// A sequence counts as flat when its variance is negligible next to its
// energy; exact zero is too strict once means are rounded.
constexpr double kFlatRatio = 1e-20;

struct Moments {
    double variance = 0.0;
    double energy = 0.0;
};

Moments moments(std::span<const double> x) {
    Moments m;
    if (x.empty()) return m;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    for (double v : x) {
        m.variance += (v - mean) * (v - mean);
        m.energy += v * v;
    }
    m.variance /= n;
    m.energy /= n;
    return m;
}

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::optional<double> optional_real(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

void Thresholds::validate() const {
    if (!(w1 > 0.0) || !(w2 > 0.0))
        fail(ErrorKind::InvalidParameter, "weights w1 and w2 must be positive");
    if (!(epoch_ms > 0.0)) fail(ErrorKind::InvalidParameter, "epoch length must be positive");
    if (!(hr_min_bpm > 0.0) || !(hr_min_bpm <= hr_max_bpm))
        fail(ErrorKind::InvalidParameter, "heart-rate gate needs 0 < hr_min <= hr_max");
    if (std::isnan(t_mc) || std::isnan(t_rc))
        fail(ErrorKind::InvalidParameter, "thresholds must not be NaN");
}

SignalTrace Epoch::trace_slice() const {
    SignalTrace out;
    out.sampling_hz = recording->sampling_hz;
    out.label = recording->label;
    const double first = std::ceil(recording->position_of(start_ms) - 1e-9);
    const double last = std::ceil(recording->position_of(end_ms) - 1e-9);
    const auto n = static_cast<double>(recording->size());
    const auto a = static_cast<std::size_t>(std::clamp(first, 0.0, n));
    const auto b = static_cast<std::size_t>(std::clamp(last, 0.0, n));
    out.start_time_ms = recording->time_of(a);
    out.samples.assign(recording->samples.begin() + static_cast<std::ptrdiff_t>(a),
                       recording->samples.begin() + static_cast<std::ptrdiff_t>(std::max(a, b)));
    return out;
}

std::vector<Epoch> segment_epochs(std::shared_ptr<const SignalTrace> recording,
                                  const BeatAnnotation& beats, double epoch_ms) {
    if (!(epoch_ms > 0.0)) fail(ErrorKind::InvalidParameter, "epoch length must be positive");
    const double begin = recording->start_time_ms;
    const double end = recording->end_time_ms();
    // A remainder below a microsecond is rounding, not a real extra epoch.
    const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil((end - begin) / epoch_ms - 1e-9)));
    std::vector<Epoch> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Epoch e;
        e.recording = recording;
        e.start_ms = begin + static_cast<double>(k) * epoch_ms;
        e.end_ms = k + 1 == count ? end : begin + static_cast<double>(k + 1) * epoch_ms;
        // The closing instant of the recording belongs to the last epoch.
        e.beats = slice_beats(beats, e.start_ms, k + 1 == count ? std::nextafter(end, INFINITY) : e.end_ms);
        e.M = e.beats.size();
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Epoch> segment_epochs(const SignalTrace& recording, const BeatAnnotation& beats,
                                  double epoch_ms) {
    return segment_epochs(std::make_shared<const SignalTrace>(recording), beats, epoch_ms);
}

bool hr_gate(const Epoch& epoch, double hr_min_bpm, double hr_max_bpm) {
    if (epoch.M < 3) return false;
    const double mean = intervals_of(epoch.beats).mean_ms;
    const double hr = 60000.0 / mean;
    return hr >= hr_min_bpm && hr <= hr_max_bpm;
}

std::optional<double> mean_normalized_correlation(const std::vector<std::vector<double>>& segments) {
    if (segments.empty()) return std::nullopt;
    const std::size_t len = segments.front().size();
    std::vector<double> tmpl(len, 0.0);
    double energy = 0.0;
    for (const auto& s : segments) {
        if (s.size() != len) fail(ErrorKind::InvalidInput, "segments differ in length");
        const Moments m = moments(s);
        if (m.variance <= kFlatRatio * m.energy) return std::nullopt;
        energy += m.energy;
        for (std::size_t i = 0; i < len; ++i) tmpl[i] += s[i];
    }
    for (double& v : tmpl) v /= static_cast<double>(segments.size());
    energy /= static_cast<double>(segments.size());
    if (moments(tmpl).variance <= kFlatRatio * energy) return 0.0;

    double sum = 0.0;
    for (const auto& s : segments) sum += pearson(s, tmpl);
    return sum / static_cast<double>(segments.size());
}

std::vector<std::vector<double>> beat_segments(const SignalTrace& recording,
                                               std::span<const double> peak_times_ms,
                                               double segment_ms) {
    std::vector<std::vector<double>> out;
    const auto half = static_cast<long long>(std::llround(segment_ms * recording.sampling_hz / 2000.0));
    const auto n = static_cast<long long>(recording.size());
    for (double t : peak_times_ms) {
        const long long c = std::llround(recording.position_of(t));
        if (c - half < 0 || c + half >= n) continue;
        out.emplace_back(recording.samples.begin() + (c - half), recording.samples.begin() + (c + half + 1));
    }
    return out;
}

double segment_window_ms(const Epoch& epoch) {
    if (epoch.M < 2) return 1000.0;
    return std::min(median_of(intervals_of(epoch.beats).intervals_ms), 1000.0);
}

std::optional<double> morphological_confidence(const Epoch& epoch, double segment_ms) {
    if (!(segment_ms > 0.0)) fail(ErrorKind::InvalidParameter, "segment window must be positive");
    return mean_normalized_correlation(beat_segments(*epoch.recording, epoch.beats.peak_times_ms, segment_ms));
}

double rhythmic_confidence(std::span<const double> peaks) {
    if (peaks.size() < 3) fail(ErrorKind::InsufficientBeats, "rhythmic confidence needs at least 3 beats");
    const std::size_t m = peaks.size();
    std::vector<double> d(m - 1);
    for (std::size_t i = 1; i < m; ++i) d[i - 1] = peaks[i] - peaks[i - 1];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(m - 2)) / mean;
}

double rhythmic_confidence(const Epoch& epoch) { return rhythmic_confidence(epoch.beats.peak_times_ms); }

double comprehensive_index(double c1, double c2, double w1, double w2) {
    if (!(w1 > 0.0) || !(w2 > 0.0)) fail(ErrorKind::InvalidParameter, "weights w1 and w2 must be positive");
    return w1 * c1 - w2 * c2;
}

ConfidenceScore score_epoch(const Epoch& epoch, const Thresholds& thresholds) {
    thresholds.validate();
    ConfidenceScore s;
    s.epoch_start_ms = epoch.start_ms;
    s.epoch_end_ms = epoch.end_ms;
    s.detector = epoch.beats.source;
    s.hr_ok = hr_gate(epoch, thresholds.hr_min_bpm, thresholds.hr_max_bpm);
    if (epoch.M >= 3) {
        s.c1 = morphological_confidence(epoch, segment_window_ms(epoch));
        s.c2 = rhythmic_confidence(epoch);
    }
    return rescore(s, thresholds);
}

ConfidenceScore rescore(const ConfidenceScore& score, const Thresholds& thresholds) {
    ConfidenceScore s = score;
    s.F.reset();
    if (s.c1 && s.c2) s.F = comprehensive_index(*s.c1, *s.c2, thresholds.w1, thresholds.w2);
    s.acceptable = s.hr_ok && s.F && *s.c1 >= thresholds.t_mc && *s.c2 <= thresholds.t_rc;
    return s;
}

nlohmann::json score_to_json(const ConfidenceScore& s) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return nlohmann::json{{"epoch_start_ms", s.epoch_start_ms},
                          {"epoch_end_ms", s.epoch_end_ms},
                          {"detector", std::string(to_string(s.detector))},
                          {"c1", opt(s.c1)},
                          {"c2", opt(s.c2)},
                          {"F", opt(s.F)},
                          {"hr_ok", s.hr_ok},
                          {"acceptable", s.acceptable}};
}

ConfidenceScore score_from_json(const nlohmann::json& j) {
    ConfidenceScore s;
    try {
        s.epoch_start_ms = j.at("epoch_start_ms").get<double>();
        s.epoch_end_ms = j.at("epoch_end_ms").get<double>();
        const auto name = j.at("detector").get<std::string>();
        const auto src = source_from_string(name);
        if (!src) fail(ErrorKind::Parse, "unknown detector '" + name + "'");
        s.detector = *src;
        s.c1 = optional_real(j, "c1");
        s.c2 = optional_real(j, "c2");
        s.F = optional_real(j, "F");
        s.hr_ok = j.value("hr_ok", false);
        s.acceptable = j.at("acceptable").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad confidence record: ") + e.what());
    }
    return s;
}

}  // namespace bcg

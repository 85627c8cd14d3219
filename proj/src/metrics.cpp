#include "bcg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "bcg/error.hpp"
#include "bcg/similarity.hpp"

namespace bcg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

// Touching ranges merged into maximal runs.
std::vector<TimeRange> runs_of(std::vector<TimeRange> ranges) {
    std::sort(ranges.begin(), ranges.end(),
              [](const TimeRange& a, const TimeRange& b) { return a.start_ms < b.start_ms; });
    std::vector<TimeRange> out;
    for (const auto& r : ranges) {
        if (!out.empty() && r.start_ms <= out.back().end_ms + 1e-6)
            out.back().end_ms = std::max(out.back().end_ms, r.end_ms);
        else
            out.push_back(r);
    }
    return out;
}

std::ptrdiff_t run_index(const std::vector<TimeRange>& runs, double t) {
    auto it = std::upper_bound(runs.begin(), runs.end(), t,
                               [](double v, const TimeRange& r) { return v < r.start_ms; });
    if (it == runs.begin()) return -1;
    --it;
    // Runs are half-open except that the recording end belongs to the last one.
    if (t < it->end_ms || (t == it->end_ms && it + 1 == runs.end())) return it - runs.begin();
    return -1;
}

double overlap(const TimeRange& a, const TimeRange& b) {
    return std::max(0.0, std::min(a.end_ms, b.end_ms) - std::max(a.start_ms, b.start_ms));
}

nlohmann::json real_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::vector<IntervalPair> pair_intervals(const BeatAnnotation& reference, const BeatAnnotation& detected,
                                         const std::vector<TimeRange>* reported) {
    if (reference.empty()) fail(ErrorKind::InvalidInput, "reference annotation is empty");
    std::vector<IntervalPair> out;
    const auto& ref = reference.peak_times_ms;
    const auto& det = detected.peak_times_ms;
    if (ref.size() < 2 || det.size() < 2) return out;

    const double window = 0.5 * median_of(intervals_of(ref).intervals_ms);
    std::vector<std::tuple<double, std::size_t, std::size_t>> options;
    for (std::size_t i = 0; i < det.size(); ++i) {
        auto lo = std::lower_bound(ref.begin(), ref.end(), det[i] - window);
        for (auto it = lo; it != ref.end() && *it <= det[i] + window; ++it)
            options.emplace_back(std::abs(*it - det[i]), i, static_cast<std::size_t>(it - ref.begin()));
    }
    std::sort(options.begin(), options.end());
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> match_ref(ref.size(), kNone);
    std::vector<char> det_used(det.size(), 0);
    for (const auto& [dist, i, j] : options) {
        if (det_used[i] || match_ref[j] != kNone) continue;
        det_used[i] = 1;
        match_ref[j] = i;
    }

    std::vector<TimeRange> runs;
    if (reported) runs = runs_of(*reported);
    for (std::size_t j = 0; j + 1 < ref.size(); ++j) {
        const std::size_t a = match_ref[j];
        const std::size_t b = match_ref[j + 1];
        if (a == kNone || b == kNone || b != a + 1) continue;
        if (reported) {
            const auto ra = run_index(runs, det[a]);
            if (ra < 0 || ra != run_index(runs, det[b])) continue;
        }
        out.push_back({ref[j + 1] - ref[j], det[b] - det[a], ref[j]});
    }
    return out;
}

double e_abs(const std::vector<IntervalPair>& pairs) {
    if (pairs.empty()) fail(ErrorKind::UndefinedMetric, "E_abs of an empty pair list");
    double sum = 0.0;
    for (const auto& p : pairs) sum += std::abs(p.rr_ms - p.jj_ms);
    return sum / static_cast<double>(pairs.size());
}

double precision(const std::vector<IntervalPair>& pairs, double threshold_ms) {
    if (pairs.empty()) fail(ErrorKind::UndefinedMetric, "precision of an empty pair list");
    const auto ok = std::count_if(pairs.begin(), pairs.end(), [&](const IntervalPair& p) {
        return std::abs(p.rr_ms - p.jj_ms) <= threshold_ms;
    });
    return 100.0 * static_cast<double>(ok) / static_cast<double>(pairs.size());
}

double coverage(const std::vector<TimeRange>& reported, double d_total_ms) {
    if (!(d_total_ms > 0.0)) fail(ErrorKind::InvalidParameter, "total duration must be positive");
    double sum = 0.0;
    for (const auto& r : reported) sum += r.length();
    return 100.0 * sum / d_total_ms;
}

double rmssd(const IntervalSeries& s) {
    const auto& d = s.intervals_ms;
    if (d.size() < 2) fail(ErrorKind::UndefinedMetric, "RMSSD needs at least 2 intervals");
    double ss = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) ss += (d[i] - d[i - 1]) * (d[i] - d[i - 1]);
    return std::sqrt(ss / static_cast<double>(d.size() - 1));
}

std::string_view to_string(QualityLevel level) {
    switch (level) {
        case QualityLevel::A: return "A";
        case QualityLevel::B: return "B";
        case QualityLevel::C: return "C";
    }
    return "?";
}

double quality_score(const Epoch& epoch, const QualityThresholds& q) {
    std::vector<double> times;
    std::vector<std::vector<double>> segs;
    const double window = segment_window_ms(epoch);
    for (double t : epoch.beats.peak_times_ms) {
        auto s = beat_segments(*epoch.recording, std::span<const double>(&t, 1), window);
        if (s.empty()) continue;
        times.push_back(t);
        segs.push_back(std::move(s.front()));
    }
    if (segs.empty()) return kNaN;
    double sum = 0.0;
    const std::size_t len = segs.front().size();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        std::vector<double> tmpl(len, 0.0);
        std::size_t members = 0;
        for (std::size_t k = 0; k < segs.size(); ++k) {
            if (std::abs(times[k] - times[i]) > 0.5 * q.template_window_ms) continue;
            for (std::size_t n = 0; n < len; ++n) tmpl[n] += segs[k][n];
            ++members;
        }
        for (double& v : tmpl) v /= static_cast<double>(members);
        const double r = pearson(segs[i], tmpl);
        sum += std::isnan(r) ? 0.0 : r;
    }
    return sum / static_cast<double>(segs.size());
}

QualityLevel quality_level(const Epoch& epoch, const QualityThresholds& q) {
    const double s = quality_score(epoch, q);
    if (s >= q.level_a) return QualityLevel::A;
    if (s >= q.level_b) return QualityLevel::B;
    return QualityLevel::C;  // NaN lands here too
}

void EvalAccumulator::add_pairs(const std::vector<IntervalPair>& pairs, const std::string& stratum) {
    Totals& t = stratum.empty() ? total_ : strata_[stratum];
    for (const auto& p : pairs) {
        const double err = std::abs(p.rr_ms - p.jj_ms);
        t.sum_abs += err;
        if (err <= threshold_ms_)
            ++t.correct;
        else
            ++t.incorrect;
    }
}

void EvalAccumulator::add_duration(double total_ms, double detected_ms, const std::string& stratum) {
    Totals& t = stratum.empty() ? total_ : strata_[stratum];
    t.total_ms += total_ms;
    t.detected_ms += detected_ms;
}

void EvalAccumulator::fold(Totals& t, const EvalReport& r) {
    t.sum_abs += r.sum_abs_error_ms;
    t.correct += r.n_correct;
    t.incorrect += r.n_incorrect;
    t.detected_ms += r.d_detection_ms;
    t.total_ms += r.d_total_ms;
}

void EvalAccumulator::merge(const EvalReport& report) {
    fold(total_, report);
    for (const auto& [label, sub] : report.strata) fold(strata_[label], sub);
}

EvalReport EvalAccumulator::finish(const Totals& t) {
    EvalReport r;
    r.n_correct = t.correct;
    r.n_incorrect = t.incorrect;
    r.n_bcg = t.correct + t.incorrect;
    r.sum_abs_error_ms = t.sum_abs;
    r.e_abs_ms = r.n_bcg ? t.sum_abs / static_cast<double>(r.n_bcg) : kNaN;
    r.pre_pct = r.n_bcg ? 100.0 * static_cast<double>(t.correct) / static_cast<double>(r.n_bcg) : kNaN;
    r.d_detection_ms = t.detected_ms;
    r.d_total_ms = t.total_ms;
    r.coverage_pct = t.total_ms > 0.0 ? 100.0 * t.detected_ms / t.total_ms : 0.0;
    return r;
}

EvalReport EvalAccumulator::report() const {
    EvalReport r = finish(total_);
    for (const auto& [label, t] : strata_) r.strata.emplace(label, finish(t));
    return r;
}

EvalReport evaluate(const BeatAnnotation& reference, const BeatAnnotation& detected,
                    const std::vector<TimeRange>& reported, double d_total_ms,
                    const std::vector<EpochStratum>& strata, double threshold_ms) {
    if (!(d_total_ms > 0.0)) fail(ErrorKind::InvalidParameter, "total duration must be positive");
    const auto pairs = pair_intervals(reference, detected, &reported);
    EvalAccumulator acc(threshold_ms);
    acc.add_pairs(pairs);
    double detected_ms = 0.0;
    for (const auto& r : reported) detected_ms += r.length();
    acc.add_duration(d_total_ms, detected_ms);

    for (const auto& s : strata) {
        std::vector<IntervalPair> inside;
        for (const auto& p : pairs)
            if (s.range.contains(p.at_ms)) inside.push_back(p);
        acc.add_pairs(inside, s.label);
        double det = 0.0;
        for (const auto& r : reported) det += overlap(r, s.range);
        acc.add_duration(s.range.length(), det, s.label);
    }
    return acc.report();
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j{{"e_abs_ms", real_or_null(r.e_abs_ms)},
                     {"pre_pct", real_or_null(r.pre_pct)},
                     {"coverage_pct", r.coverage_pct},
                     {"n_bcg", r.n_bcg},
                     {"n_correct", r.n_correct},
                     {"n_incorrect", r.n_incorrect},
                     {"d_detection_ms", r.d_detection_ms},
                     {"d_total_ms", r.d_total_ms}};
    if (!r.strata.empty()) {
        nlohmann::json s = nlohmann::json::object();
        for (const auto& [label, sub] : r.strata) s[label] = report_to_json(sub);
        j["strata"] = s;
    }
    return j;
}

}  // namespace bcg

#include "bcg/tm_detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "bcg/error.hpp"
#include "bcg/similarity.hpp"

namespace bcg {

namespace {

using Index = std::ptrdiff_t;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxIntervalMs = 60000.0 / 30.0;
constexpr double kAcfSmoothMs = 100.0;
constexpr double kFundamentalShare = 0.6;

double median_of(std::vector<double> v) {
    if (v.empty()) return kNaN;
    const auto mid = v.begin() + static_cast<Index>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

Index index_of(const SignalTrace& trace, double t_ms) {
    return static_cast<Index>(std::llround(trace.position_of(t_ms)));
}

std::vector<double> block_average(std::span<const double> x, std::size_t q) {
    if (q <= 1) return {x.begin(), x.end()};
    std::vector<double> out;
    out.reserve(x.size() / q + 1);
    for (std::size_t i = 0; i < x.size(); i += q) {
        const std::size_t end = std::min(x.size(), i + q);
        double acc = 0.0;
        for (std::size_t k = i; k < end; ++k) acc += x[k];
        out.push_back(acc / static_cast<double>(end - i));
    }
    return out;
}

/// Unmasked stretches of the trace, in ms.
std::vector<TimeRange> clear_stretches(const SignalTrace& trace, const ArtifactMask& mask) {
    std::vector<TimeRange> out;
    double cursor = trace.start_time_ms;
    for (const auto& m : mask.intervals) {
        if (m.start_ms > cursor) out.push_back({cursor, std::min(m.start_ms, trace.end_time_ms())});
        cursor = std::max(cursor, m.end_ms);
    }
    if (cursor < trace.end_time_ms()) out.push_back({cursor, trace.end_time_ms()});
    return out;
}

Index argmax_in(const SignalTrace& trace, Index lo, Index hi) {
    const auto n = static_cast<Index>(trace.size());
    lo = std::clamp<Index>(lo, 0, n - 1);
    hi = std::clamp<Index>(hi, 0, n - 1);
    Index best = lo;
    for (Index i = lo; i <= hi; ++i)
        if (trace.samples[static_cast<std::size_t>(i)] > trace.samples[static_cast<std::size_t>(best)]) best = i;
    return best;
}

/// Scores candidate J positions against a (dynamic) template.
class Matcher {
public:
    Matcher(const SignalTrace& trace, const ArtifactMask& mask, const TmConfig& cfg,
            std::size_t j_offset)
        : trace_(trace), mask_(mask), cfg_(cfg), offset_(static_cast<Index>(j_offset)) {
        const auto& x = trace.samples;
        sum_.assign(x.size() + 1, 0.0);
        sq_.assign(x.size() + 1, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            sum_[i + 1] = sum_[i] + x[i];
            sq_[i + 1] = sq_[i] + x[i] * x[i];
        }
    }

    void set_template(const std::vector<double>& tpl) {
        tpl_ = tpl;
        tsum_.assign(tpl.size() + 1, 0.0);
        tsq_.assign(tpl.size() + 1, 0.0);
        for (std::size_t i = 0; i < tpl.size(); ++i) {
            tsum_[i + 1] = tsum_[i] + tpl[i];
            tsq_[i + 1] = tsq_[i] + tpl[i] * tpl[i];
        }
    }

    const std::vector<double>& tpl() const { return tpl_; }
    Index size() const { return static_cast<Index>(trace_.size()); }

    /// Overlap of the template placed with its J sample at p, in template
    /// coordinates [k0, k1).
    std::pair<Index, Index> overlap(Index p) const {
        const Index start = p - offset_;
        const Index len = static_cast<Index>(tpl_.size());
        return {std::max<Index>(0, -start), std::min<Index>(len, size() - start)};
    }

    bool full_segment(Index p) const {
        auto [k0, k1] = overlap(p);
        return k0 == 0 && k1 == static_cast<Index>(tpl_.size());
    }

    double ncc_at(Index p) const {
        auto [k0, k1] = overlap(p);
        const Index count = k1 - k0;
        if (count < static_cast<Index>(0.6 * static_cast<double>(tpl_.size()))) return kNaN;
        const Index s0 = p - offset_ + k0;
        const auto* x = trace_.samples.data() + s0;
        const auto* t = tpl_.data() + k0;
        double st = 0.0;
        for (Index i = 0; i < count; ++i) st += x[i] * t[i];
        const auto c = static_cast<double>(count);
        const double ss = sum_[static_cast<std::size_t>(s0 + count)] - sum_[static_cast<std::size_t>(s0)];
        const double ss2 = sq_[static_cast<std::size_t>(s0 + count)] - sq_[static_cast<std::size_t>(s0)];
        const double ts = tsum_[static_cast<std::size_t>(k1)] - tsum_[static_cast<std::size_t>(k0)];
        const double ts2 = tsq_[static_cast<std::size_t>(k1)] - tsq_[static_cast<std::size_t>(k0)];
        const double vx = ss2 - ss * ss / c;
        const double vt = ts2 - ts * ts / c;
        if (vx <= 1e-300 || vt <= 1e-300) return kNaN;
        return std::clamp((st - ss * ts / c) / std::sqrt(vx * vt), -1.0, 1.0);
    }

    double dtw_at(Index p) const {
        auto [k0, k1] = overlap(p);
        const Index s0 = p - offset_ + k0;
        std::span<const double> seg(trace_.samples.data() + s0, static_cast<std::size_t>(k1 - k0));
        std::span<const double> tp(tpl_.data() + k0, static_cast<std::size_t>(k1 - k0));
        const std::size_t q = std::max<std::size_t>(1, tpl_.size() / std::max<std::size_t>(1, cfg_.dtw_points));
        const auto a = block_average(seg, q);
        const auto b = block_average(tp, q);
        return dtw_norm(a, b, cfg_.dtw_band);
    }

    double score_at(Index p) const {
        return cfg_.lambda * ncc_at(p) - (1.0 - cfg_.lambda) * dtw_at(p);
    }

    struct Pick {
        Index pos;
        double score;
    };

    /// Best combined score among the strongest NCC peaks in [lo, hi].
    std::optional<Pick> best_in(Index lo, Index hi) const {
        lo = std::max<Index>(lo, 0);
        hi = std::min<Index>(hi, size() - 1);
        if (lo > hi) return std::nullopt;
        std::vector<double> r(static_cast<std::size_t>(hi - lo + 1));
        for (Index p = lo; p <= hi; ++p) {
            const bool masked = mask_.contains(trace_.time_of(static_cast<std::size_t>(p)));
            r[static_cast<std::size_t>(p - lo)] = masked ? kNaN : ncc_at(p);
        }
        std::vector<Index> peaks;
        const auto m = static_cast<Index>(r.size());
        for (Index i = 0; i < m; ++i) {
            const double v = r[static_cast<std::size_t>(i)];
            if (std::isnan(v)) continue;
            const bool left_ok = i == 0 || !(r[static_cast<std::size_t>(i - 1)] > v);
            const bool right_ok = i == m - 1 || !(r[static_cast<std::size_t>(i + 1)] >= v);
            const bool interior = i > 0 && i < m - 1;
            if (left_ok && right_ok && interior) peaks.push_back(i);
        }
        if (peaks.empty()) {
            Index best = -1;
            for (Index i = 0; i < m; ++i) {
                const double v = r[static_cast<std::size_t>(i)];
                if (!std::isnan(v) && (best < 0 || v > r[static_cast<std::size_t>(best)])) best = i;
            }
            if (best < 0) return std::nullopt;
            peaks.push_back(best);
        }
        std::stable_sort(peaks.begin(), peaks.end(), [&](Index a, Index b) {
            return r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(b)];
        });
        if (peaks.size() > cfg_.shortlist) peaks.resize(std::max<std::size_t>(1, cfg_.shortlist));

        std::optional<Pick> best;
        for (Index i : peaks) {
            const Index p = lo + i;
            const double s = cfg_.lambda * r[static_cast<std::size_t>(i)] - (1.0 - cfg_.lambda) * dtw_at(p);
            if (!best || s > best->score || (s == best->score && p < best->pos)) best = Pick{p, s};
        }
        return best;
    }

    Index snap(Index p, bool positive) const {
        const auto reach = static_cast<Index>(std::llround(cfg_.snap_ms * trace_.sampling_hz / 1000.0));
        const Index lo = std::max<Index>(0, p - reach);
        const Index hi = std::min<Index>(size() - 1, p + reach);
        Index best = std::clamp<Index>(p, 0, size() - 1);
        for (Index i = lo; i <= hi; ++i) {
            const double v = trace_.samples[static_cast<std::size_t>(i)];
            const double b = trace_.samples[static_cast<std::size_t>(best)];
            if (positive ? v > b : v < b) best = i;
        }
        return best;
    }

    void blend_segment(Index p, double beta) {
        if (!full_segment(p)) return;
        const Index start = p - offset_;
        std::vector<double> next(tpl_.size());
        for (std::size_t k = 0; k < tpl_.size(); ++k)
            next[k] = (1.0 - beta) * tpl_[k] + beta * trace_.samples[static_cast<std::size_t>(start) + k];
        set_template(next);
    }

private:
    const SignalTrace& trace_;
    const ArtifactMask& mask_;
    const TmConfig& cfg_;
    Index offset_;
    std::vector<double> sum_, sq_;
    std::vector<double> tpl_, tsum_, tsq_;
};

/// Walks from the anchor in one direction. `dir` is +1 or -1.
ScoredBeats track(const SignalTrace& trace, const Template& tmpl, const ArtifactMask& mask,
                  const TmConfig& cfg, Index anchor, double anchor_score, double interval0, int dir) {
    Matcher matcher(trace, mask, cfg, tmpl.j_offset);
    matcher.set_template(tmpl.waveform);
    const bool positive = tmpl.waveform[tmpl.j_offset] >= 0.0;
    const double ms_per_sample = 1000.0 / trace.sampling_hz;
    const double min_interval = kRefractoryMs / ms_per_sample;
    const double max_interval = kMaxIntervalMs / ms_per_sample;
    const Index n = matcher.size();

    ScoredBeats out;
    out.beats.source = Source::Tm;
    out.beats.trace_label = trace.label;
    std::vector<Index> picked{anchor};
    std::vector<double> scores{anchor_score};

    auto window_masked = [&](Index lo, Index hi) {
        return mask.overlaps(trace.time_of(static_cast<std::size_t>(std::clamp<Index>(lo, 0, n - 1))),
                             trace.time_of(static_cast<std::size_t>(std::clamp<Index>(hi, 0, n - 1))));
    };
    // First mask interval hit by [lo, hi] in the walking direction.
    auto blocking = [&](Index lo, Index hi) -> const TimeRange* {
        const double a = trace.time_of(static_cast<std::size_t>(std::clamp<Index>(lo, 0, n - 1)));
        const double b = trace.time_of(static_cast<std::size_t>(std::clamp<Index>(hi, 0, n - 1)));
        const TimeRange* hit = nullptr;
        for (const auto& m : mask.intervals) {
            if (m.start_ms < b && m.end_ms > a) {
                if (!hit || (dir > 0 ? m.start_ms < hit->start_ms : m.start_ms > hit->start_ms)) hit = &m;
            }
        }
        return hit;
    };

    double interval = interval0;
    Index pos = anchor;
    while (true) {
        Index lo, hi;
        if (dir > 0) {
            lo = pos + static_cast<Index>(std::ceil(cfg.search_lo * interval));
            hi = pos + static_cast<Index>(std::floor(cfg.search_hi * interval));
            if (lo > n - 1) break;
        } else {
            lo = pos - static_cast<Index>(std::floor(cfg.search_hi * interval));
            hi = pos - static_cast<Index>(std::ceil(cfg.search_lo * interval));
            if (hi < 0) break;
        }

        bool reanchored = false;
        while (window_masked(lo, hi)) {
            // Skip the gap and search a fresh period on its far side.
            const TimeRange* gap = blocking(lo, hi);
            const auto width = static_cast<Index>(std::floor(cfg.search_hi * interval0));
            if (dir > 0) {
                lo = index_of(trace, gap->end_ms) + 1;
                hi = lo + width;
            } else {
                hi = index_of(trace, gap->start_ms) - 1;
                lo = hi - width;
            }
            reanchored = true;
            if (lo > n - 1 || hi < 0) break;
        }
        if (lo > n - 1 || hi < 0) break;

        const auto pick = matcher.best_in(lo, hi);
        if (!pick) break;
        const Index p = matcher.snap(pick->pos, positive);
        if (dir > 0 ? p <= pos : p >= pos) break;
        if (reanchored) {
            interval = interval0;
        } else {
            interval = (1.0 - cfg.interval_alpha) * interval +
                       cfg.interval_alpha * static_cast<double>(std::abs(p - pos));
            interval = std::clamp(interval, min_interval, max_interval);
        }
        matcher.blend_segment(p, cfg.template_beta);
        picked.push_back(p);
        scores.push_back(pick->score);
        pos = p;
    }

    std::vector<std::size_t> order(picked.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return picked[a] < picked[b]; });
    for (std::size_t i : order) {
        out.beats.peak_times_ms.push_back(trace.time_of(static_cast<std::size_t>(picked[i])));
        out.scores.push_back(scores[i]);
    }
    return out;
}

}  // namespace

bool ArtifactMask::contains(double t) const {
    auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                               [](double v, const TimeRange& r) { return v < r.start_ms; });
    if (it == intervals.begin()) return false;
    --it;
    return t >= it->start_ms && t < it->end_ms;
}

bool ArtifactMask::overlaps(double begin_ms, double end_ms) const {
    for (const auto& r : intervals)
        if (r.start_ms < end_ms && r.end_ms > begin_ms) return true;
    return false;
}

double ArtifactMask::covered_ms() const {
    double total = 0.0;
    for (const auto& r : intervals) total += r.length();
    return total;
}

ArtifactMask detect_artifacts(const SignalTrace& trace, const TmConfig& cfg) {
    ArtifactMask mask;
    const auto n = static_cast<Index>(trace.size());
    if (n == 0) return mask;
    const double fs = trace.sampling_hz;
    std::vector<double> sq(static_cast<std::size_t>(n) + 1, 0.0);
    for (Index i = 0; i < n; ++i)
        sq[static_cast<std::size_t>(i + 1)] = sq[static_cast<std::size_t>(i)] +
                                              trace.samples[static_cast<std::size_t>(i)] * trace.samples[static_cast<std::size_t>(i)];

    const Index half = std::max<Index>(1, static_cast<Index>(std::llround(cfg.artifact_window_ms * fs / 2000.0)));
    const Index hop = std::max<Index>(1, static_cast<Index>(std::llround(cfg.artifact_hop_ms * fs / 1000.0)));
    std::vector<Index> centres;
    std::vector<double> energy;
    for (Index c = hop / 2; c < n; c += hop) {
        const Index a = std::max<Index>(0, c - half);
        const Index b = std::min<Index>(n, c + half);
        centres.push_back(c);
        energy.push_back((sq[static_cast<std::size_t>(b)] - sq[static_cast<std::size_t>(a)]) / static_cast<double>(b - a));
    }
    const double med = median_of(energy);
    const double limit = cfg.artifact_k * med;

    const double t0 = trace.start_time_ms;
    const double t1 = trace.end_time_ms();
    const double hop_ms = static_cast<double>(hop) * 1000.0 / fs;
    for (std::size_t i = 0; i < centres.size(); ++i) {
        if (!(energy[i] > limit)) continue;
        const double c = trace.time_of(static_cast<std::size_t>(centres[i]));
        TimeRange r{std::max(t0, c - hop_ms / 2.0 - cfg.artifact_dilation_ms),
                    std::min(t1, c + hop_ms / 2.0 + cfg.artifact_dilation_ms)};
        if (!mask.intervals.empty() && r.start_ms <= mask.intervals.back().end_ms)
            mask.intervals.back().end_ms = std::max(mask.intervals.back().end_ms, r.end_ms);
        else
            mask.intervals.push_back(r);
    }
    return mask;
}

double estimate_period_ms(const SignalTrace& trace, const ArtifactMask& mask, const TmConfig& cfg) {
    const auto q = static_cast<std::size_t>(std::max(1.0, std::round(trace.sampling_hz / 100.0)));
    const double dec_fs = trace.sampling_hz / static_cast<double>(q);
    // Autocorrelation of the smoothed energy rather than the waveform: the
    // narrow IJK shape decorrelates under a few tens of ms of interval jitter,
    // its energy hump does not.
    std::vector<double> energy(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) energy[i] = trace.samples[i] * trace.samples[i];
    const auto coarse = block_average(energy, q);
    const auto smooth = static_cast<std::size_t>(std::max(1.0, std::round(kAcfSmoothMs * dec_fs / 2000.0)));
    std::vector<double> x(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const std::size_t a = i >= smooth ? i - smooth : 0;
        const std::size_t b = std::min(coarse.size(), i + smooth + 1);
        x[i] = std::accumulate(coarse.begin() + static_cast<Index>(a), coarse.begin() + static_cast<Index>(b), 0.0) /
               static_cast<double>(b - a);
    }
    const auto lag_min = static_cast<std::size_t>(std::floor(kRefractoryMs * dec_fs / 1000.0));
    const auto lag_max = static_cast<std::size_t>(std::ceil(kMaxIntervalMs * dec_fs / 1000.0));
    auto window = static_cast<std::size_t>(std::llround(cfg.acf_window_ms * dec_fs / 1000.0));
    window = std::max(window, lag_max + 2 * lag_min);

    std::vector<double> acf(lag_max + 2, 0.0);
    std::size_t used = 0;
    for (std::size_t w0 = 0; w0 + window <= x.size(); w0 += window) {
        const double a = trace.start_time_ms + static_cast<double>(w0) * 1000.0 / dec_fs;
        const double b = a + static_cast<double>(window) * 1000.0 / dec_fs;
        if (mask.overlaps(a, b)) continue;
        std::vector<double> w(x.begin() + static_cast<Index>(w0), x.begin() + static_cast<Index>(w0 + window));
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
        double e0 = 0.0;
        for (double& v : w) {
            v -= mean;
            e0 += v * v;
        }
        e0 /= static_cast<double>(w.size());
        if (e0 <= 0.0) continue;
        for (std::size_t lag = 1; lag < acf.size(); ++lag) {
            double s = 0.0;
            for (std::size_t i = 0; i + lag < w.size(); ++i) s += w[i] * w[i + lag];
            acf[lag] += s / static_cast<double>(w.size() - lag) / e0;
        }
        ++used;
    }
    if (used == 0) fail(ErrorKind::NoRhythmFound, "no unmasked window long enough for a rhythm estimate");
    for (double& v : acf) v /= static_cast<double>(used);

    auto is_peak = [&](std::size_t lag) {
        return lag >= std::max<std::size_t>(lag_min, 1) && lag <= lag_max && acf[lag] >= acf[lag - 1] &&
               acf[lag] > acf[lag + 1];
    };
    std::size_t best = 0;
    for (std::size_t lag = std::max<std::size_t>(lag_min, 1); lag <= lag_max; ++lag)
        if (is_peak(lag) && acf[lag] >= cfg.acf_min_peak && (best == 0 || acf[lag] > acf[best])) best = lag;
    if (best == 0) fail(ErrorKind::NoRhythmFound, "no autocorrelation peak in the admissible heart-rate band");

    // A periodic trace correlates almost equally well at every multiple of
    // its period, so prefer the shortest lag that divides the winner.
    // Beats of alternating strength pull the fundamental well below the
    // double period, hence the loose factor.
    const double floor_acf = std::max(cfg.acf_min_peak, kFundamentalShare * acf[best]);
    for (std::size_t k = best / std::max<std::size_t>(lag_min, 1); k >= 2; --k) {
        const double target = static_cast<double>(best) / static_cast<double>(k);
        const auto lo = std::max<std::size_t>(lag_min, static_cast<std::size_t>(std::floor(target * 0.92)));
        const auto hi = std::min<std::size_t>(lag_max, static_cast<std::size_t>(std::ceil(target * 1.08)));
        std::size_t found = 0;
        for (std::size_t lag = std::max<std::size_t>(lo, 1); lag <= hi; ++lag)
            if (is_peak(lag) && acf[lag] >= floor_acf && (found == 0 || acf[lag] > acf[found])) found = lag;
        if (found != 0) {
            best = found;
            break;
        }
    }

    const double y0 = acf[best - 1], y1 = acf[best], y2 = acf[best + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5) : 0.0;
    return (static_cast<double>(best) + shift) * 1000.0 / dec_fs;
}

BeatAnnotation initial_detect(const SignalTrace& trace, const ArtifactMask& mask, const TmConfig& cfg) {
    const auto stretches = clear_stretches(trace, mask);
    double clear = 0.0;
    for (const auto& s : stretches) clear += s.length();
    if (clear < cfg.min_unmasked_ms)
        fail(ErrorKind::InvalidInput, "less than 30 s of unmasked signal");
    const double period = estimate_period_ms(trace, mask, cfg);

    BeatAnnotation coarse{{}, Source::Tm, trace.label};
    const double per_sample = trace.sampling_hz / 1000.0;
    for (const auto& s : stretches) {
        const Index a = index_of(trace, s.start_ms);
        const Index b = index_of(trace, s.end_ms) - 1;
        if (b <= a) continue;
        Index t = argmax_in(trace, a, std::min(b, a + static_cast<Index>(period * per_sample)));
        while (true) {
            const double tm = trace.time_of(static_cast<std::size_t>(t));
            if (coarse.peak_times_ms.empty() || tm > coarse.peak_times_ms.back())
                coarse.peak_times_ms.push_back(tm);
            const Index lo = t + static_cast<Index>(cfg.search_lo * period * per_sample);
            const Index hi = std::min(b, t + static_cast<Index>(cfg.search_hi * period * per_sample));
            if (lo > b) break;
            t = argmax_in(trace, lo, hi);
        }
    }
    return coarse;
}

Template build_template(const SignalTrace& trace, const BeatAnnotation& coarse, const TmConfig& cfg,
                        const ArtifactMask& mask) {
    double window_ms = 1000.0;
    if (coarse.size() >= 2) window_ms = median_of(intervals_of(coarse).intervals_ms);
    window_ms = std::clamp(window_ms, 300.0, 1200.0);
    const auto len = static_cast<Index>(std::llround(window_ms * trace.sampling_hz / 1000.0));
    const Index half = len / 2;
    const auto n = static_cast<Index>(trace.size());

    std::vector<std::span<const double>> segments;
    for (double t : coarse.peak_times_ms) {
        const Index start = index_of(trace, t) - half;
        if (start < 0 || start + len > n) continue;
        if (mask.overlaps(trace.time_of(static_cast<std::size_t>(start)),
                          trace.time_of(static_cast<std::size_t>(start + len - 1))))
            continue;
        segments.emplace_back(trace.samples.data() + start, static_cast<std::size_t>(len));
    }
    if (segments.size() < cfg.min_template_beats)
        fail(ErrorKind::TemplateFailure, "too few usable coarse beats to model a template");

    auto average = [&](const std::vector<std::size_t>& members) {
        std::vector<double> mean(static_cast<std::size_t>(len), 0.0);
        for (std::size_t m : members)
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += segments[m][k];
        for (double& v : mean) v /= static_cast<double>(members.size());
        return mean;
    };

    std::vector<std::size_t> members(segments.size());
    std::iota(members.begin(), members.end(), 0);
    for (int iter = 0; iter < cfg.refine_max_iter && members.size() >= 3; ++iter) {
        const auto mean = average(members);
        std::vector<std::size_t> keep;
        for (std::size_t m : members)
            if (pearson(segments[m], mean) >= cfg.refine_gate) keep.push_back(m);
        if (keep == members) break;
        members = std::move(keep);
    }
    if (members.size() < 3)
        fail(ErrorKind::TemplateFailure, "template refinement left fewer than 3 similar beats");

    Template tmpl;
    tmpl.waveform = average(members);
    tmpl.sampling_hz = trace.sampling_hz;
    tmpl.length_ms = static_cast<double>(len) * 1000.0 / trace.sampling_hz;
    tmpl.member_count = members.size();
    std::size_t j = 0;
    for (std::size_t k = 1; k < tmpl.waveform.size(); ++k)
        if (std::abs(tmpl.waveform[k]) > std::abs(tmpl.waveform[j])) j = k;
    tmpl.j_offset = j;
    if (tmpl.waveform[j] == 0.0) fail(ErrorKind::TemplateFailure, "template has no structure");
    return tmpl;
}

TmPasses match_passes(const SignalTrace& trace, const Template& tmpl, const ArtifactMask& mask,
                      const BeatAnnotation& coarse, const TmConfig& cfg) {
    if (tmpl.waveform.empty() || tmpl.sampling_hz != trace.sampling_hz)
        fail(ErrorKind::TemplateFailure, "template does not match the trace");
    TmPasses passes;
    passes.forward.beats = {{}, Source::Tm, trace.label};
    passes.backward.beats = {{}, Source::Tm, trace.label};

    Matcher matcher(trace, mask, cfg, tmpl.j_offset);
    matcher.set_template(tmpl.waveform);
    std::optional<Index> anchor;
    double anchor_ncc = -2.0;
    for (double t : coarse.peak_times_ms) {
        if (mask.contains(t)) continue;
        const Index p = index_of(trace, t);
        if (p < 0 || p >= matcher.size() || !matcher.full_segment(p)) continue;
        const double r = matcher.ncc_at(p);
        if (!std::isnan(r) && r > anchor_ncc) {
            anchor_ncc = r;
            anchor = p;
        }
    }
    if (!anchor) return passes;

    double interval_ms = tmpl.length_ms;
    if (coarse.size() >= 2) interval_ms = median_of(intervals_of(coarse).intervals_ms);
    const double interval0 = interval_ms * trace.sampling_hz / 1000.0;
    const double anchor_score = matcher.score_at(*anchor);
    passes.forward = track(trace, tmpl, mask, cfg, *anchor, anchor_score, interval0, +1);
    passes.backward = track(trace, tmpl, mask, cfg, *anchor, anchor_score, interval0, -1);
    return passes;
}

BeatAnnotation fuse_passes(const ScoredBeats& forward, const ScoredBeats& backward, double eps_ms) {
    struct Cand {
        double t;
        double score;
    };
    const auto& f = forward.beats.peak_times_ms;
    const auto& b = backward.beats.peak_times_ms;
    auto score = [](const ScoredBeats& s, std::size_t i) {
        return i < s.scores.size() ? s.scores[i] : 0.0;
    };

    std::vector<Cand> merged;
    std::size_t i = 0, j = 0;
    while (i < f.size() || j < b.size()) {
        if (i < f.size() && j < b.size() && std::abs(f[i] - b[j]) <= eps_ms) {
            merged.push_back({0.5 * (f[i] + b[j]), std::max(score(forward, i), score(backward, j))});
            ++i;
            ++j;
        } else if (j >= b.size() || (i < f.size() && f[i] < b[j])) {
            merged.push_back({f[i], score(forward, i)});
            ++i;
        } else {
            merged.push_back({b[j], score(backward, j)});
            ++j;
        }
    }

    // Conflicting peaks closer than the refractory spacing: higher score wins.
    std::vector<std::size_t> order(merged.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return merged[x].score > merged[y].score; });
    std::vector<double> kept;
    for (std::size_t k : order) {
        const double t = merged[k].t;
        auto it = std::lower_bound(kept.begin(), kept.end(), t);
        const bool clash = (it != kept.end() && *it - t < kRefractoryMs) ||
                           (it != kept.begin() && t - *(it - 1) < kRefractoryMs);
        if (!clash) kept.insert(it, t);
    }

    BeatAnnotation out;
    out.source = forward.beats.empty() ? backward.beats.source : forward.beats.source;
    out.trace_label = forward.beats.trace_label.empty() ? backward.beats.trace_label : forward.beats.trace_label;
    out.peak_times_ms = std::move(kept);
    return out;
}

BeatAnnotation fuse_passes(const BeatAnnotation& forward, const BeatAnnotation& backward, double eps_ms) {
    return fuse_passes(ScoredBeats{forward, {}}, ScoredBeats{backward, {}}, eps_ms);
}

BeatAnnotation match_detect(const SignalTrace& trace, const Template& tmpl, const ArtifactMask& mask,
                            const BeatAnnotation& coarse, const TmConfig& cfg) {
    const auto passes = match_passes(trace, tmpl, mask, coarse, cfg);
    auto out = fuse_passes(passes.forward, passes.backward, cfg.fuse_eps_ms);
    out.source = Source::Tm;
    out.trace_label = trace.label;
    return out;
}

BeatAnnotation detect_tm(const SignalTrace& trace, const TmConfig& cfg) {
    const auto mask = detect_artifacts(trace, cfg);
    const auto coarse = initial_detect(trace, mask, cfg);
    const auto tmpl = build_template(trace, coarse, cfg, mask);
    return match_detect(trace, tmpl, mask, coarse, cfg);
}

}  // namespace bcg

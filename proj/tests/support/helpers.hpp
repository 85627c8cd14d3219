#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "bcg/rng.hpp"
#include "bcg/signal.hpp"
#include "bcg/synth.hpp"

namespace testing {

inline bcg::SignalTrace make_trace(std::vector<double> samples, double fs = 1000.0, std::string label = "t") {
    bcg::SignalTrace t;
    t.samples = std::move(samples);
    t.sampling_hz = fs;
    t.label = std::move(label);
    return t;
}

inline bcg::SignalTrace sine(double hz, double seconds, double fs = 1000.0, double amp = 1.0) {
    std::vector<double> x(static_cast<std::size_t>(std::llround(seconds * fs)));
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / fs);
    return make_trace(std::move(x), fs);
}

inline double rms(const std::vector<double>& x, std::size_t skip = 0) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = skip; i + skip < x.size(); ++i, ++n) s += x[i] * x[i];
    return std::sqrt(s / static_cast<double>(n));
}

/// Distance from each truth beat to the nearest detection (inf if none).
inline std::vector<double> nearest_errors(const std::vector<double>& truth, const std::vector<double>& det) {
    std::vector<double> out;
    for (double t : truth) {
        double best = INFINITY;
        auto it = std::lower_bound(det.begin(), det.end(), t);
        if (it != det.end()) best = std::min(best, std::abs(*it - t));
        if (it != det.begin()) best = std::min(best, std::abs(*(it - 1) - t));
        out.push_back(best);
    }
    return out;
}

inline double fraction_within(const std::vector<double>& errors, double tol) {
    if (errors.empty()) return 0.0;
    return static_cast<double>(std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= tol; })) /
           static_cast<double>(errors.size());
}

/// Perfectly regular beats with a fixed morphology and no noise.
inline bcg::Recording regular_recording(double bpm, double seconds, const bcg::Morphology& m,
                                        bcg::CorruptionSpec c = {}, double first_ms = 500.0,
                                        std::uint64_t seed = 1) {
    bcg::RenderRequest r;
    for (double t = first_ms; t < seconds * 1000.0; t += 60000.0 / bpm) r.beat_times_ms.push_back(t);
    r.morphologies = {m};
    r.corruption = c;
    r.duration_s = seconds;
    r.seed = seed;
    return bcg::render_recording(r);
}

/// Lobes symmetric about J, so band-passing keeps the J peak in place.
inline bcg::Morphology symmetric_morphology() {
    bcg::Morphology m = bcg::default_morphology();
    m[0] = {0.2, 35.0, -170.0};
    m[1] = {-0.45, 22.0, -75.0};
    m[2] = {1.0, 22.0, 0.0};
    m[3] = {-0.45, 22.0, 75.0};
    m[4] = {0.2, 35.0, 170.0};
    return m;
}

/// Moves every beat inside the chosen epochs by a random +-[lo, hi] ms.
inline bcg::BeatAnnotation plant_jitter(bcg::BeatAnnotation a, double epoch_ms, int parity, double lo, double hi,
                                        std::uint64_t seed) {
    bcg::Rng rng(seed);
    for (double& t : a.peak_times_ms) {
        const auto epoch = static_cast<long long>(std::floor(t / epoch_ms));
        if (epoch % 2 != parity) continue;
        const double m = rng.uniform(lo, hi);
        t += rng.uniform() < 0.5 ? -m : m;
    }
    std::sort(a.peak_times_ms.begin(), a.peak_times_ms.end());
    return a;
}

inline std::filesystem::path fresh_dir(const std::filesystem::path& p) {
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing

#include "bcg/envelope_detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcg {

namespace {

constexpr double kSmoothMs = 150.0;
constexpr double kMedianWindowMs = 10000.0;
constexpr double kMedianStepMs = 500.0;
constexpr double kThresholdFactor = 0.4;
constexpr double kMedianToPeak = 3.0;

}  // namespace

BeatAnnotation envelope_detect(const SignalTrace& trace) {
    BeatAnnotation out{{}, Source::Alternate, trace.label};
    const std::size_t n = trace.size();
    if (n < 3) return out;
    const double fs = trace.sampling_hz;

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + trace.samples[i] * trace.samples[i];
    const auto half = static_cast<std::size_t>(std::max(1.0, std::round(kSmoothMs * fs / 2000.0)));
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n, i + half + 1);
        env[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
    }

    // Rolling median sampled on a coarse grid and interpolated in between.
    const auto step = static_cast<std::size_t>(std::max(1.0, std::round(kMedianStepMs * fs / 1000.0)));
    const auto mhalf = static_cast<std::size_t>(std::round(kMedianWindowMs * fs / 2000.0));
    std::vector<std::size_t> grid;
    std::vector<double> grid_median;
    std::vector<double> scratch;
    for (std::size_t c = 0;; c += step) {
        c = std::min(c, n - 1);
        const std::size_t a = c >= mhalf ? c - mhalf : 0;
        const std::size_t b = std::min(n, c + mhalf + 1);
        scratch.assign(env.begin() + static_cast<std::ptrdiff_t>(a), env.begin() + static_cast<std::ptrdiff_t>(b));
        auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2);
        std::nth_element(scratch.begin(), mid, scratch.end());
        grid.push_back(c);
        grid_median.push_back(*mid);
        if (c == n - 1) break;
    }
    auto threshold_at = [&](std::size_t i) {
        auto it = std::upper_bound(grid.begin(), grid.end(), i);
        const double scale = kThresholdFactor * kMedianToPeak;
        if (it == grid.begin()) return scale * grid_median.front();
        if (it == grid.end()) return scale * grid_median.back();
        const std::size_t k = static_cast<std::size_t>(it - grid.begin());
        const double f = static_cast<double>(i - grid[k - 1]) / static_cast<double>(grid[k] - grid[k - 1]);
        const double m = grid_median[k - 1] * (1.0 - f) + grid_median[k] * f;
        return scale * m;
    };

    // The energy peak lags J by the K lobe's share of the window, so each
    // candidate moves to the largest-magnitude sample inside its window
    // before refractory selection.
    struct Candidate {
        std::size_t at;
        double strength;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(env[i] > env[i - 1] && env[i] >= env[i + 1] && env[i] > threshold_at(i))) continue;
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n, i + half + 1);
        std::size_t best = a;
        for (std::size_t k = a; k < b; ++k)
            if (std::abs(trace.samples[k]) > std::abs(trace.samples[best])) best = k;
        candidates.push_back({best, env[i]});
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.strength > b.strength; });
    const double refractory = kRefractoryMs * fs / 1000.0;
    std::vector<std::size_t> kept;
    for (const auto& cand : candidates) {
        const std::size_t c = cand.at;
        auto it = std::lower_bound(kept.begin(), kept.end(), c);
        const bool clash = (it != kept.end() && static_cast<double>(*it - c) < refractory) ||
                           (it != kept.begin() && static_cast<double>(c - *(it - 1)) < refractory);
        if (!clash && (it == kept.end() || *it != c)) kept.insert(it, c);
    }
    out.peak_times_ms.reserve(kept.size());
    for (std::size_t i : kept) out.peak_times_ms.push_back(trace.time_of(i));
    return out;
}

}  // namespace bcg

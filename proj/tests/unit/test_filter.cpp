#include <cmath>
#include <numbers>

#include "doctest.h"
#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/rng.hpp"
#include "bcg/similarity.hpp"
#include "support/helpers.hpp"

using namespace bcg;

namespace {

// Closed-form magnitude of the analog Butterworth band-pass seen through a
// pre-warped bilinear map.
double analytic_magnitude(double f, double lo, double hi, int order, double fs) {
    auto warp = [fs](double hz) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); };
    const double w = warp(f), wl = warp(lo), wh = warp(hi);
    const double w0sq = wl * wh, bw = wh - wl;
    const double x = (w * w - w0sq) / (w * bw);
    return 1.0 / std::sqrt(1.0 + std::pow(x, 2.0 * order));
}

double measured_gain(double hz, double seconds, double skip_s) {
    const auto in = testing::sine(hz, seconds);
    const auto out = bandpass_filter(in, 1.0, 10.0, 3);
    const auto skip = static_cast<std::size_t>(skip_s * 1000.0);
    return testing::rms(out.samples, skip) / testing::rms(in.samples, skip);
}

}  // namespace

TEST_CASE("designed sections match the analytic magnitude") {
    const auto f = design_butterworth_bandpass(1.0, 10.0, 3, 1000.0);
    CHECK(f.sections.size() == 3);
    for (double hz : {0.05, 0.2, 0.5, 1.0, 2.0, 3.0, 3.1623, 5.0, 10.0, 25.0, 100.0, 400.0}) {
        CAPTURE(hz);
        CHECK(std::abs(f.response(hz)) == doctest::Approx(analytic_magnitude(hz, 1.0, 10.0, 3, 1000.0)).epsilon(1e-6));
    }
    // Other orders and rates follow the same closed form.
    for (int order : {1, 2, 4}) {
        const auto g = design_butterworth_bandpass(0.5, 20.0, order, 250.0);
        for (double hz : {0.1, 1.0, 3.0, 30.0, 100.0})
            CHECK(std::abs(g.response(hz)) ==
                  doctest::Approx(analytic_magnitude(hz, 0.5, 20.0, order, 250.0)).epsilon(1e-6));
    }
}

TEST_CASE("passband and stopband gains") {
    CHECK(measured_gain(3.0, 20.0, 2.0) == doctest::Approx(1.0).epsilon(0.05));
    // Forward-backward filtering squares the magnitude.
    const double h02 = analytic_magnitude(0.2, 1.0, 10.0, 3, 1000.0);
    const double g02 = measured_gain(0.2, 200.0, 20.0);
    CHECK(g02 <= h02 * h02 * 1.1);
    CHECK(g02 <= 0.1);
    const double h25 = analytic_magnitude(25.0, 1.0, 10.0, 3, 1000.0);
    CHECK(measured_gain(25.0, 20.0, 2.0) <= h25 * h25 * 1.1);
}

TEST_CASE("zero-phase: a symmetric pulse keeps its peak") {
    for (double centre : {2000.0, 2500.3, 4321.0}) {
        std::vector<double> x(8000);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(i) - centre;
            x[i] = std::exp(-0.5 * d * d / (25.0 * 25.0));
        }
        const auto y = bandpass_filter(testing::make_trace(x)).samples;
        const auto peak = static_cast<double>(std::max_element(y.begin(), y.end()) - y.begin());
        CAPTURE(centre);
        CHECK(std::abs(peak - centre) <= 1.0);
    }
}

TEST_CASE("filter is linear") {
    Rng rng(3);
    std::vector<double> x(5000), y(5000), z(5000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = std::sin(0.01 * static_cast<double>(i)) + 0.3 * rng.normal();
    }
    const double a = 2.5, b = -0.75;
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * y[i];
    const auto fx = bandpass_filter(testing::make_trace(x)).samples;
    const auto fy = bandpass_filter(testing::make_trace(y)).samples;
    const auto fz = bandpass_filter(testing::make_trace(z)).samples;
    double scale = 0.0;
    for (double v : fz) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < fz.size(); ++i) CHECK(std::abs(fz[i] - (a * fx[i] + b * fy[i])) <= 1e-9 * scale);
}

TEST_CASE("zero input stays zero and the shape is kept") {
    auto t = testing::make_trace(std::vector<double>(3000, 0.0), 500.0, "z");
    t.start_time_ms = 250.0;
    const auto y = bandpass_filter(t);
    CHECK(y.size() == t.size());
    CHECK(y.sampling_hz == t.sampling_hz);
    CHECK(y.start_time_ms == t.start_time_ms);
    CHECK(y.label == "z");
    for (double v : y.samples) CHECK(v == 0.0);
}

TEST_CASE("short traces still filter") {
    const auto y = bandpass_filter(testing::make_trace({1.0, -1.0, 0.5}));
    CHECK(y.size() == 3);
}

TEST_CASE("filter argument errors") {
    const auto t = testing::sine(3.0, 2.0);
    auto kind = [&](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    CHECK(kind([&] { bandpass_filter(t, 0.0, 10.0, 3); }) == ErrorKind::InvalidParameter);
    CHECK(kind([&] { bandpass_filter(t, 10.0, 1.0, 3); }) == ErrorKind::InvalidParameter);
    CHECK(kind([&] { bandpass_filter(t, 1.0, 500.0, 3); }) == ErrorKind::InvalidParameter);
    CHECK(kind([&] { bandpass_filter(t, 1.0, 10.0, 0); }) == ErrorKind::InvalidParameter);
    auto bad = t;
    bad.samples[10] = NAN;
    CHECK(kind([&] { bandpass_filter(bad); }) == ErrorKind::InvalidInput);
    bad.samples[10] = INFINITY;
    CHECK(kind([&] { bandpass_filter(bad); }) == ErrorKind::InvalidInput);
}

TEST_CASE("resample lengths and identity") {
    const auto t = testing::sine(5.0, 12.0);
    const auto r = resample(t, 100.0);
    CHECK(r.size() == 1200);
    CHECK(r.sampling_hz == 100.0);
    CHECK(r.duration_ms() == doctest::Approx(t.duration_ms()));

    const auto same = resample(t, 1000.0);
    REQUIRE(same.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(same.samples[i] - t.samples[i]) <= 1e-9);

    const auto up = resample(testing::sine(2.0, 3.0, 100.0), 1000.0);
    CHECK(up.size() == 3000);

    CHECK_THROWS_AS(resample(t, 0.0), Error);
    CHECK_THROWS_AS(resample(t, -100.0), Error);
}

TEST_CASE("resampled sinusoid matches the analytic one") {
    const auto r = resample(testing::sine(5.0, 12.0), 100.0);
    const auto ref = testing::sine(5.0, 12.0, 100.0);
    CHECK(pearson(r.samples, ref.samples) >= 0.999);
}

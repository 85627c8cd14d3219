#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "bcg/signal.hpp"

namespace bcg {

/// One second-order section, a[0] == 1.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};
};

/// Cascade of biquads at a fixed sampling rate.
struct SosFilter {
    std::vector<Biquad> sections;
    double sampling_hz = 0.0;

    std::complex<double> response(double freq_hz) const;

    /// Single causal pass (direct form II transposed). `initial_scale`
    /// scales the step-response steady state used as the initial state;
    /// pass 0 for a rest start.
    std::vector<double> apply(std::span<const double> x, double initial_scale = 0.0) const;
};

/// Butterworth band-pass of prototype order `order` (the digital filter has
/// 2*order poles), bilinear transform with frequency pre-warping, unit gain
/// at the geometric band centre.
SosFilter design_butterworth_bandpass(double low_hz, double high_hz, int order,
                                      double sampling_hz);

/// Forward-backward application with odd-reflection padding and
/// steady-state initial conditions. The padding length is 3x the filter's
/// transfer-function order.
std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x);

/// Zero-phase Butterworth band-pass.
SignalTrace bandpass_filter(const SignalTrace& trace, double low_hz = 1.0,
                            double high_hz = 10.0, int order = 3);

/// Band-limited (Kaiser-windowed sinc) resampling. Same rate returns a copy.
SignalTrace resample(const SignalTrace& trace, double target_hz);

}  // namespace bcg

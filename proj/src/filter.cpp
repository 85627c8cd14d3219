#include "bcg/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bcg/error.hpp"

namespace bcg {

namespace {

using cplx = std::complex<double>;

Biquad section_from_poles(cplx p1, cplx p2) {
    Biquad q;
    // One zero at z = 1 and one at z = -1 per section.
    q.b = {1.0, 0.0, -1.0};
    q.a = {1.0, -(p1 + p2).real(), (p1 * p2).real()};
    return q;
}

std::array<double, 2> steady_state(const Biquad& q, double u, double& y) {
    const double dc = (q.b[0] + q.b[1] + q.b[2]) / (1.0 + q.a[1] + q.a[2]);
    y = dc * u;
    const double z2 = q.b[2] * u - q.a[2] * y;
    const double z1 = q.b[1] * u - q.a[1] * y + z2;
    return {z1, z2};
}

}  // namespace

std::complex<double> SosFilter::response(double freq_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sampling_hz;
    const cplx zi = std::polar(1.0, -w);
    cplx h{1.0, 0.0};
    for (const auto& q : sections) {
        const cplx num = q.b[0] + q.b[1] * zi + q.b[2] * zi * zi;
        const cplx den = q.a[0] + q.a[1] * zi + q.a[2] * zi * zi;
        h *= num / den;
    }
    return h;
}

std::vector<double> SosFilter::apply(std::span<const double> x, double initial_scale) const {
    std::vector<double> y(x.begin(), x.end());
    double u = initial_scale;
    for (const auto& q : sections) {
        double next_u = 0.0;
        auto [z1, z2] = steady_state(q, u, next_u);
        u = next_u;
        for (double& v : y) {
            const double in = v;
            const double out = q.b[0] * in + z1;
            z1 = q.b[1] * in - q.a[1] * out + z2;
            z2 = q.b[2] * in - q.a[2] * out;
            v = out;
        }
    }
    return y;
}

SosFilter design_butterworth_bandpass(double low_hz, double high_hz, int order,
                                      double sampling_hz) {
    if (!(sampling_hz > 0.0) || !(low_hz > 0.0) || !(high_hz > low_hz) ||
        !(high_hz < sampling_hz / 2.0))
        fail(ErrorKind::InvalidParameter, "band-pass requires 0 < low < high < fs/2");
    if (order < 1) fail(ErrorKind::InvalidParameter, "filter order must be >= 1");

    const double pi = std::numbers::pi;
    const double fs2 = 2.0 * sampling_hz;
    const double w_lo = fs2 * std::tan(pi * low_hz / sampling_hz);
    const double w_hi = fs2 * std::tan(pi * high_hz / sampling_hz);
    const double bw = w_hi - w_lo;
    const double w0 = std::sqrt(w_lo * w_hi);

    std::vector<cplx> poles;
    poles.reserve(2 * static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) {
        const cplx proto = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
        const cplx half = proto * bw / 2.0;
        const cplx root = std::sqrt(half * half - w0 * w0);
        for (cplx s : {half + root, half - root}) poles.push_back((fs2 + s) / (fs2 - s));
    }

    std::vector<cplx> upper;
    std::vector<double> real;
    for (const cplx& p : poles) {
        if (std::abs(p.imag()) < 1e-12)
            real.push_back(p.real());
        else if (p.imag() > 0.0)
            upper.push_back(p);
    }
    std::sort(upper.begin(), upper.end(),
              [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });
    std::sort(real.begin(), real.end());

    SosFilter filter;
    filter.sampling_hz = sampling_hz;
    for (const cplx& p : upper) filter.sections.push_back(section_from_poles(p, std::conj(p)));
    for (std::size_t i = 0; i + 1 < real.size(); i += 2)
        filter.sections.push_back(section_from_poles(real[i], real[i + 1]));

    const double centre_hz = sampling_hz / pi * std::atan(w0 / fs2);
    const double gain = std::abs(filter.response(centre_hz));
    for (double& c : filter.sections.front().b) c /= gain;
    return filter;
}

std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::size_t pad = 3 * 2 * filter.sections.size();
    pad = std::min(pad, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    auto fwd = filter.apply(ext, ext.front());
    std::reverse(fwd.begin(), fwd.end());
    auto bwd = filter.apply(fwd, fwd.front());
    std::reverse(bwd.begin(), bwd.end());
    return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
            bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

SignalTrace bandpass_filter(const SignalTrace& trace, double low_hz, double high_hz, int order) {
    trace.validate();
    for (double v : trace.samples)
        if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "trace contains non-finite samples");
    const auto filter = design_butterworth_bandpass(low_hz, high_hz, order, trace.sampling_hz);
    SignalTrace out = trace;
    out.samples = filtfilt(filter, trace.samples);
    return out;
}

SignalTrace resample(const SignalTrace& trace, double target_hz) {
    if (!(target_hz > 0.0) || !std::isfinite(target_hz))
        fail(ErrorKind::InvalidParameter, "target rate must be positive");
    trace.validate();
    if (target_hz == trace.sampling_hz) return trace;

    const double ratio = target_hz / trace.sampling_hz;
    const auto out_len = static_cast<std::size_t>(
        std::llround(trace.duration_ms() / 1000.0 * target_hz));
    const double cutoff = 0.5 * std::min(1.0, ratio) * 0.9;  // cycles per input sample
    constexpr double kZeroCrossings = 16.0;
    constexpr double kBeta = 8.6;
    const double half_width = kZeroCrossings / (2.0 * cutoff);
    constexpr std::size_t kTable = 4096;
    std::vector<double> window_table(kTable + 1);
    for (std::size_t i = 0; i <= kTable; ++i) {
        const double r = static_cast<double>(i) / kTable;
        window_table[i] = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) /
                          std::cyl_bessel_i(0.0, kBeta);
    }
    auto kaiser = [&](double r) {
        const double x = std::min(std::abs(r), 1.0) * kTable;
        const auto i = std::min(static_cast<std::size_t>(x), kTable - 1);
        const double f = x - static_cast<double>(i);
        return window_table[i] * (1.0 - f) + window_table[i + 1] * f;
    };

    const auto n = static_cast<std::ptrdiff_t>(trace.size());
    auto at = [&](std::ptrdiff_t i) {
        if (n == 1) return trace.samples[0];
        const std::ptrdiff_t period = 2 * (n - 1);
        i %= period;
        if (i < 0) i += period;
        if (i >= n) i = period - i;
        return trace.samples[static_cast<std::size_t>(i)];
    };

    SignalTrace out;
    out.sampling_hz = target_hz;
    out.start_time_ms = trace.start_time_ms;
    out.label = trace.label;
    out.samples.resize(out_len);
    for (std::size_t k = 0; k < out_len; ++k) {
        const double centre = static_cast<double>(k) / ratio;
        const auto lo = static_cast<std::ptrdiff_t>(std::ceil(centre - half_width));
        const auto hi = static_cast<std::ptrdiff_t>(std::floor(centre + half_width));
        double acc = 0.0;
        double wsum = 0.0;
        for (std::ptrdiff_t i = lo; i <= hi; ++i) {
            const double tau = static_cast<double>(i) - centre;
            const double r = tau / half_width;
            const double window = kaiser(r);
            const double arg = 2.0 * cutoff * tau;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
            const double w = window * sinc;
            acc += w * at(i);
            wsum += w;
        }
        out.samples[k] = acc / wsum;
    }
    return out;
}

}  // namespace bcg

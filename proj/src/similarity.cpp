#include "bcg/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bcg/error.hpp"

namespace bcg {

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorKind::InvalidInput, "pearson: length mismatch");
    const auto n = static_cast<double>(a.size());
    if (a.empty()) return std::numeric_limits<double>::quiet_NaN();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

DtwResult dtw(std::span<const double> a, std::span<const double> b, std::size_t band) {
    // The band is laid out along the rows, so fix the orientation to keep
    // the result symmetric.
    if (a.size() < b.size()) std::swap(a, b);
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 || m == 0) fail(ErrorKind::InvalidInput, "dtw: empty sequence");
    const double inf = std::numeric_limits<double>::infinity();
    const double w = static_cast<double>(std::max({band, std::size_t{1}, n > m ? n - m : m - n}));
    const double slope = n > 1 ? static_cast<double>(m - 1) / static_cast<double>(n - 1) : 0.0;

    struct Cell {
        double cost;
        std::size_t len;
    };
    auto better = [](const Cell& x, const Cell& y) {
        return x.cost < y.cost || (x.cost == y.cost && x.len < y.len);
    };
    std::vector<Cell> prev(m, Cell{inf, 0}), cur(m, Cell{inf, 0});
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(cur.begin(), cur.end(), Cell{inf, 0});
        const double centre = slope * static_cast<double>(i);
        const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(centre - w)));
        const auto hi = std::min(m - 1, static_cast<std::size_t>(std::floor(centre + w)));
        for (std::size_t j = lo; j <= hi; ++j) {
            const double d = std::abs(a[i] - b[j]);
            if (i == 0 && j == 0) {
                cur[j] = {d, 1};
                continue;
            }
            Cell best{inf, 0};
            if (i > 0 && j > 0 && better(prev[j - 1], best)) best = prev[j - 1];
            if (i > 0 && better(prev[j], best)) best = prev[j];
            if (j > 0 && better(cur[j - 1], best)) best = cur[j - 1];
            if (best.cost < inf) cur[j] = {best.cost + d, best.len + 1};
        }
        std::swap(prev, cur);
    }
    return {prev[m - 1].cost, prev[m - 1].len};
}

double dtw_norm(std::span<const double> a, std::span<const double> b, double band_fraction) {
    const std::size_t longest = std::max(a.size(), b.size());
    const auto band = static_cast<std::size_t>(std::ceil(band_fraction * static_cast<double>(longest)));
    const DtwResult r = dtw(a, b, band);
    double mag = 0.0;
    for (double v : a) mag += std::abs(v);
    for (double v : b) mag += std::abs(v);
    mag /= static_cast<double>(a.size() + b.size());
    if (r.cost == 0.0) return 0.0;
    return r.cost / static_cast<double>(r.path_length) / mag;
}

}  // namespace bcg

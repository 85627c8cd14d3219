#pragma once

#include <cstddef>
#include <span>

namespace bcg {

/// Pearson correlation of two equal-length sequences. NaN when either side
/// has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Zero-lag normalized cross-correlation; the same quantity as pearson(),
/// named for its role in template matching.
inline double ncc(std::span<const double> a, std::span<const double> b) { return pearson(a, b); }

struct DtwResult {
    double cost = 0.0;          // accumulated |a_i - b_j| along the optimal path
    std::size_t path_length = 0;
};

/// DTW restricted to a Sakoe-Chiba band of `band` cells around the
/// (length-scaled) diagonal. Among equal-cost paths the shorter one wins.
DtwResult dtw(std::span<const double> a, std::span<const double> b, std::size_t band);

/// DTW cost per path step divided by the mean absolute amplitude of both
/// sequences. Band width is `band_fraction` of the longer sequence.
/// Symmetric in its arguments; 0 for identical inputs.
double dtw_norm(std::span<const double> a, std::span<const double> b, double band_fraction = 0.1);

}  // namespace bcg

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bcg/confidence.hpp"
#include "bcg/metrics.hpp"
#include "bcg/signal.hpp"
#include "bcg/tm_detector.hpp"

namespace bcg {

struct FilterConfig {
    double low_hz = 1.0;
    double high_hz = 10.0;
    int order = 3;
};

struct DlConfig {
    std::string executable;
    std::string model;
};

struct SweepGrid {
    std::vector<double> t_mc{0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
    std::vector<double> t_rc{0.40, 0.35, 0.30, 0.25, 0.20, 0.15, 0.10, 0.05};
    std::vector<std::pair<double, double>> weights{{3, 1}, {2, 1}, {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}};
};

struct PipelineConfig {
    std::filesystem::path corpus_dir;  // holds manifest.json
    std::filesystem::path output_dir;
    Thresholds thresholds;
    QualityThresholds quality;
    std::optional<double> hrv_threshold_ms;  // unset: corpus median of epoch RMSSD
    double precision_ms = 30.0;
    FilterConfig filter;
    TmConfig tm;
    std::vector<Source> detectors{Source::Tm, Source::Alternate};
    std::vector<Source> priority{Source::Tm, Source::Dl, Source::Alternate};
    DlConfig dl;
    SweepGrid sweep;
    std::size_t workers = 1;

    /// Every setting as sorted key=value lines; identical configs give
    /// identical text.
    std::string canonical() const;
    /// The part of canonical() that changes built-in detector output. DL
    /// results are keyed separately by executable and model contents.
    std::string detection_key() const;
};

/// Flat `section.key=value` lines; `#` comments and blank lines are ignored.
/// Unknown keys and bad values raise Parse errors naming the line.
/// Relative paths are resolved against `base_dir`.
PipelineConfig parse_config(std::string_view text, std::string_view name = "<config>",
                            const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override on top of an existing config.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir = {});

}  // namespace bcg

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bcg/signal.hpp"

namespace bcg {

/// One Gaussian lobe of the beat complex, positioned relative to the J peak.
struct Wave {
    double amplitude = 0.0;
    double width_ms = 1.0;  // Gaussian sigma
    double offset_ms = 0.0;
};

/// H, I, J, K, L lobes in that order.
using Morphology = std::array<Wave, 5>;
inline constexpr std::size_t kJWave = 2;

Morphology default_morphology();

struct SubjectProfile {
    double base_hr_bpm = 65.0;
    double hrv_rmssd_target_ms = 30.0;
    double arrhythmia_rate = 0.0;  // ectopic beats per beat
    std::uint64_t morphology_seed = 1;
    Morphology waves = default_morphology();
    /// Relative per-beat amplitude jitter on top of the subject morphology.
    double beat_variability = 0.03;
};

struct CorruptionSpec {
    double snr_db = std::numeric_limits<double>::infinity();
    double respiration_hz = 0.25;
    double respiration_gain = 1.0;  // baseline amplitude relative to J
    double artifact_burst_rate = 0.0;  // bursts per minute
    double artifact_gain = 3.0;
};

struct TimeRange {
    double start_ms = 0.0;
    double end_ms = 0.0;
    double length() const noexcept { return end_ms - start_ms; }
    bool contains(double t) const noexcept { return t >= start_ms && t < end_ms; }
};

struct Recording {
    SignalTrace trace;
    BeatAnnotation truth;
    std::vector<TimeRange> bursts;
};

/// Lobe parameters of one subject: the profile waves with +-20% seeded
/// perturbation of amplitudes and widths. J stays the dominant lobe.
Morphology subject_morphology(const SubjectProfile& profile);

/// Sum of the lobes at `t_ms` relative to the J peak.
double complex_value(const Morphology& m, double t_ms);

/// Ground-truth J-peak times for a profile over [0, duration_ms).
std::vector<double> generate_beat_times(const SubjectProfile& profile, double respiration_hz,
                                        double duration_ms, std::uint64_t seed);

struct RenderRequest {
    std::vector<double> beat_times_ms;
    /// Either one morphology per beat or a single one used for all beats.
    std::vector<Morphology> morphologies;
    CorruptionSpec corruption;
    /// Artifact bursts placed explicitly, in addition to none drawn at random.
    std::vector<TimeRange> bursts;
    double duration_s = 60.0;
    double sampling_hz = 1000.0;
    std::uint64_t seed = 0;
    std::string label = "synthetic";
};

/// Places one complex per beat and adds respiratory baseline, noise at the
/// requested band-passed SNR and the given artifact bursts.
Recording render_recording(const RenderRequest& request);

Recording generate_recording(const SubjectProfile& profile, const CorruptionSpec& corruption,
                             double duration_s, double sampling_hz, std::uint64_t seed,
                             const std::string& label = "synthetic");

struct CorpusEntry {
    std::string label;
    SubjectProfile profile;
    CorruptionSpec corruption;
    double duration_s = 60.0;
    double sampling_hz = 1000.0;
    std::uint64_t seed = 0;
    std::size_t line = 0;
};

/// Blocks of `key=value` lines separated by blank lines; `#` starts a comment.
std::vector<CorpusEntry> parse_corpus_spec(std::string_view text);

struct ManifestEntry {
    std::string label;
    std::string signal_path;      // relative to the manifest directory
    std::string annotation_path;  // relative to the manifest directory
    std::vector<TimeRange> bursts;
};

/// Generates every entry into `out_dir` (<label>.csv, <label>.json) and
/// writes out_dir/manifest.json.
std::vector<ManifestEntry> generate_corpus(const std::vector<CorpusEntry>& entries,
                                           const std::filesystem::path& out_dir,
                                           std::size_t workers = 1);
std::vector<ManifestEntry> generate_corpus(const std::filesystem::path& spec_file,
                                           const std::filesystem::path& out_dir,
                                           std::size_t workers = 1);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

}  // namespace bcg

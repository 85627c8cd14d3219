#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "bcg/config.hpp"
#include "bcg/fusion.hpp"
#include "bcg/metrics.hpp"
#include "bcg/synth.hpp"

namespace bcg {

struct CorpusRecording {
    std::string label;
    std::filesystem::path signal_path;
    std::filesystem::path annotation_path;
};

/// Entries of corpus_dir/manifest.json. Throws InvalidInput when empty.
std::vector<CorpusRecording> load_corpus(const PipelineConfig& config);

SignalTrace preprocess(const SignalTrace& raw, const FilterConfig& filter);

/// Throws DependencyMissing when the DL executable cannot be found.
std::filesystem::path locate_dl_executable(const DlConfig& dl);

/// Runs `<exe> infer --model <m> --signal <csv> --out <json>` and reads the
/// result. Parser warnings are appended to `warnings`.
BeatAnnotation run_dl_detector(const DlConfig& dl, const std::filesystem::path& signal_csv,
                               const std::filesystem::path& out_json, std::vector<std::string>* warnings = nullptr);

/// Detector outputs for one recording. Results are cached under
/// output_dir/cache keyed by the detection settings and the signal bytes.
struct Detections {
    std::string label;
    std::shared_ptr<const SignalTrace> filtered;
    BeatAnnotation truth;
    std::map<Source, BeatAnnotation> annotations;
};

Detections detect_recording(const PipelineConfig& config, const CorpusRecording& recording);

/// Everything a threshold sweep needs, computed once per recording.
struct PreparedRecording {
    std::string label;
    double duration_ms = 0.0;
    BeatAnnotation truth;
    ScoredRecording scored;
    std::vector<TimeRange> epochs;
    std::vector<QualityLevel> quality;    // per epoch, from the reference beats
    std::vector<double> rmssd_ms;         // per epoch, NaN below 3 reference beats
};

std::vector<PreparedRecording> prepare_corpus(const PipelineConfig& config);

/// Median epoch RMSSD over the corpus, or the configured value.
double hrv_threshold(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus);

/// Method name ("tm", "alternate", "dl", "hybrid") to pooled report with
/// A/B/C x low/high strata. Solo methods are gated by the same thresholds.
using MethodReports = std::map<std::string, EvalReport>;

struct RecordingResult {
    std::string label;
    MethodReports methods;
    std::map<std::string, FusionResult> fused;  // per method
    std::map<std::string, std::vector<IntervalPair>> pairs;
};

RecordingResult evaluate_recording(const PipelineConfig& config, const PreparedRecording& rec,
                                   const Thresholds& thresholds, double hrv_threshold_ms);
MethodReports evaluate_corpus(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus,
                              const Thresholds& thresholds, double hrv_threshold_ms);

struct SweepRow {
    std::string label;  // threshold column text
    Thresholds thresholds;
    MethodReports methods;
};

struct SweepTables {
    std::vector<std::string> methods;
    std::vector<SweepRow> mc;       // t_mc alone
    std::vector<SweepRow> rc;       // t_rc alone
    std::vector<SweepRow> paired;   // (t_mc, t_rc) rows, zipped
    std::vector<SweepRow> weights;  // w1:w2 at the configured thresholds
};

SweepTables sweep_corpus(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus);

nlohmann::json sweep_to_json(const SweepTables& tables);
std::string render_sweep_text(const nlohmann::json& sweep);
std::string render_strata_text(const nlohmann::json& methods);

/// Subcommands. Each returns the files it wrote.
std::vector<std::filesystem::path> run_detect(const PipelineConfig& config);
std::vector<std::filesystem::path> run_score(const PipelineConfig& config);
std::vector<std::filesystem::path> run_fuse(const PipelineConfig& config);
std::vector<std::filesystem::path> run_eval(const PipelineConfig& config);
std::vector<std::filesystem::path> run_sweep(const PipelineConfig& config);
/// Warnings (such as an empty results directory) go to `warnings`.
std::vector<std::filesystem::path> run_report(const PipelineConfig& config, std::vector<std::string>* warnings = nullptr);

std::string method_name(Source s);

}  // namespace bcg

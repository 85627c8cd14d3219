#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <string>

#include "bcg/confidence.hpp"
#include "bcg/config.hpp"
#include "bcg/envelope_detector.hpp"
#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/fusion.hpp"
#include "bcg/metrics.hpp"
#include "bcg/pipeline.hpp"
#include "bcg/synth.hpp"
#include "bcg/tm_detector.hpp"

namespace py = pybind11;
using namespace bcg;

namespace {

SignalTrace trace_of(std::vector<double> samples, double sampling_hz) {
    SignalTrace t;
    t.samples = std::move(samples);
    t.sampling_hz = sampling_hz;
    return t;
}

BeatAnnotation beats_of(std::vector<double> peaks, Source source = Source::GroundTruth) {
    BeatAnnotation a;
    a.peak_times_ms = std::move(peaks);
    a.source = source;
    return a;
}

Source source_named(const std::string& name) {
    const auto s = source_from_string(name);
    if (!s) fail(ErrorKind::InvalidParameter, "unknown detector " + name);
    return *s;
}

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(bcgkit, m) {
    m.doc() = "BCG heartbeat detection, confidence scoring and fusion";

    static py::exception<Error> error(m, "BcgError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.def("bandpass", [](std::vector<double> samples, double sampling_hz, double low_hz, double high_hz, int order) {
        return bandpass_filter(trace_of(std::move(samples), sampling_hz), low_hz, high_hz, order).samples;
    }, py::arg("samples"), py::arg("sampling_hz") = 1000.0, py::arg("low_hz") = 1.0, py::arg("high_hz") = 10.0,
       py::arg("order") = 3);

    m.def("synth", [](double duration_s, double sampling_hz, std::uint64_t seed, double base_hr_bpm,
                      double hrv_rmssd_ms, double arrhythmia_rate, std::uint64_t morphology_seed, double snr_db,
                      double artifact_burst_rate) {
        SubjectProfile p;
        p.base_hr_bpm = base_hr_bpm;
        p.hrv_rmssd_target_ms = hrv_rmssd_ms;
        p.arrhythmia_rate = arrhythmia_rate;
        p.morphology_seed = morphology_seed;
        CorruptionSpec c;
        c.snr_db = snr_db;
        c.artifact_burst_rate = artifact_burst_rate;
        const auto rec = generate_recording(p, c, duration_s, sampling_hz, seed);
        py::dict out;
        out["samples"] = rec.trace.samples;
        out["sampling_hz"] = rec.trace.sampling_hz;
        out["peaks_ms"] = rec.truth.peak_times_ms;
        std::vector<std::pair<double, double>> bursts;
        for (const auto& b : rec.bursts) bursts.emplace_back(b.start_ms, b.end_ms);
        out["bursts_ms"] = bursts;
        return out;
    }, py::arg("duration_s") = 60.0, py::arg("sampling_hz") = 1000.0, py::arg("seed") = 0,
       py::arg("base_hr_bpm") = 65.0, py::arg("hrv_rmssd_ms") = 30.0, py::arg("arrhythmia_rate") = 0.0,
       py::arg("morphology_seed") = 1, py::arg("snr_db") = std::numeric_limits<double>::infinity(),
       py::arg("artifact_burst_rate") = 0.0);

    m.def("detect_tm", [](std::vector<double> filtered, double sampling_hz) {
        return detect_tm(trace_of(std::move(filtered), sampling_hz)).peak_times_ms;
    }, py::arg("filtered"), py::arg("sampling_hz") = 1000.0);
    m.def("detect_alternate", [](std::vector<double> filtered, double sampling_hz) {
        return envelope_detect(trace_of(std::move(filtered), sampling_hz)).peak_times_ms;
    }, py::arg("filtered"), py::arg("sampling_hz") = 1000.0);

    m.def("c1", &mean_normalized_correlation, py::arg("segments"));
    m.def("c2", [](const std::vector<double>& peaks) { return rhythmic_confidence(std::span<const double>(peaks)); },
          py::arg("peaks_ms"));
    m.def("comprehensive_index", &comprehensive_index, py::arg("c1"), py::arg("c2"), py::arg("w1") = 1.0,
          py::arg("w2") = 3.0);

    m.def("fuse", [](std::vector<double> filtered, double sampling_hz,
                     const std::map<std::string, std::vector<double>>& detections, double t_mc, double t_rc,
                     double w1, double w2) {
        auto trace = std::make_shared<const SignalTrace>(trace_of(std::move(filtered), sampling_hz));
        std::map<Source, BeatAnnotation> ann;
        for (const auto& [name, peaks] : detections) {
            const Source s = source_named(name);
            ann[s] = beats_of(peaks, s);
        }
        Thresholds t;
        t.t_mc = t_mc;
        t.t_rc = t_rc;
        t.w1 = w1;
        t.w2 = w2;
        const auto f = fuse_recording(trace, ann, t);
        py::dict out;
        out["peaks_ms"] = f.beats.peak_times_ms;
        py::list chosen;
        for (const auto& o : f.outcomes) {
            if (o.chosen)
                chosen.append(std::string(to_string(*o.chosen)));
            else
                chosen.append(py::none());
        }
        out["chosen"] = chosen;
        std::vector<std::pair<double, double>> reported;
        for (const auto& r : f.reported) reported.emplace_back(r.start_ms, r.end_ms);
        out["reported_ms"] = reported;
        out["audit"] = to_python(fusion_audit(f));
        return out;
    }, py::arg("filtered"), py::arg("sampling_hz"), py::arg("detections"), py::arg("t_mc") = 0.75,
       py::arg("t_rc") = 0.20, py::arg("w1") = 1.0, py::arg("w2") = 3.0);

    m.def("evaluate", [](std::vector<double> reference, std::vector<double> detected, double total_ms,
                         std::optional<std::vector<std::pair<double, double>>> reported, double threshold_ms) {
        std::vector<TimeRange> ranges;
        if (reported)
            for (const auto& [a, b] : *reported) ranges.push_back({a, b});
        else
            ranges.push_back({0.0, total_ms});
        return to_python(report_to_json(
            evaluate(beats_of(std::move(reference)), beats_of(std::move(detected)), ranges, total_ms, {}, threshold_ms)));
    }, py::arg("reference"), py::arg("detected"), py::arg("total_ms"), py::arg("reported") = py::none(),
       py::arg("threshold_ms") = 30.0);

    m.def("generate_corpus", [](const std::filesystem::path& spec, const std::filesystem::path& out_dir,
                                std::size_t workers) {
        std::vector<std::string> labels;
        for (const auto& e : generate_corpus(spec, out_dir, workers)) labels.push_back(e.label);
        return labels;
    }, py::arg("spec"), py::arg("out_dir"), py::arg("workers") = 1);

    m.def("run", [](const std::filesystem::path& config_path, const std::string& command,
                    const std::map<std::string, std::string>& overrides) {
        PipelineConfig c = load_config(config_path);
        for (const auto& [k, v] : overrides) apply_setting(c, k, v);
        if (command == "detect") return run_detect(c);
        if (command == "score") return run_score(c);
        if (command == "fuse") return run_fuse(c);
        if (command == "eval") return run_eval(c);
        if (command == "sweep") return run_sweep(c);
        if (command == "report") return run_report(c);
        fail(ErrorKind::InvalidParameter, "unknown command " + command);
    }, py::arg("config"), py::arg("command"), py::arg("overrides") = std::map<std::string, std::string>{});
}

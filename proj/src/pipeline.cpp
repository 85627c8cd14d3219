#include "bcg/pipeline.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>

#include "bcg/envelope_detector.hpp"
#include "bcg/error.hpp"
#include "bcg/filter.hpp"
#include "bcg/io.hpp"
#include "bcg/parallel.hpp"
#include "bcg/rng.hpp"
#include "bcg/tm_detector.hpp"

extern char** environ;

namespace bcg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kHistBinMs = 5.0;
constexpr std::size_t kHistBins = 20;  // plus one overflow bin

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fixed(double v, int digits = 2) {
    if (!std::isfinite(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double real_of(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

void require_output_dir(const PipelineConfig& config) {
    if (config.output_dir.empty()) fail(ErrorKind::InvalidParameter, "paths.output_dir is not set");
    fs::create_directories(config.output_dir);
}

std::vector<std::string> method_names(const PipelineConfig& config) {
    std::vector<std::string> out;
    for (Source s : config.detectors) out.push_back(method_name(s));
    if (config.detectors.size() >= 2) out.emplace_back("hybrid");
    return out;
}

json thresholds_json(const Thresholds& t) {
    return json{{"t_mc", t.t_mc <= -1.0 ? json(nullptr) : json(t.t_mc)},
                {"t_rc", real_or_null(t.t_rc)},
                {"w1", t.w1},
                {"w2", t.w2},
                {"epoch_ms", t.epoch_ms},
                {"hr_min_bpm", t.hr_min_bpm},
                {"hr_max_bpm", t.hr_max_bpm}};
}

json report_without_strata(const EvalReport& r) {
    json j = report_to_json(r);
    j.erase("strata");
    return j;
}

BeatAnnotation run_builtin(Source s, const SignalTrace& filtered, const TmConfig& tm, const std::string& label) {
    if (s == Source::Alternate) return envelope_detect(filtered);
    try {
        return detect_tm(filtered, tm);
    } catch (const Error& e) {
        // The detector giving up on a recording is a result, not a pipeline failure.
        std::cerr << "warning: " << label << ": template matching found no beats (" << e.what() << ")\n";
        return BeatAnnotation{{}, Source::Tm, label};
    }
}

// Aligned text table; column 0 left-aligned, the rest right-aligned.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], r[c].size());
        }
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string line;
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
            const std::string& cell = rows[i][c];
            const std::string pad(width[c] - cell.size(), ' ');
            line += c == 0 ? cell + pad : "  " + pad + cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) total += w + 2;
            out += std::string(total - 2, '-') + "\n";
        }
    }
    return out;
}

std::string joined(const json& methods, const std::vector<std::string>& names, const char* key) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double v = methods.contains(names[i]) ? real_of(methods[names[i]][key]) : kNaN;
        out += (i ? " / " : "") + fixed(v);
    }
    return out;
}

std::vector<std::string> names_of(const json& j) {
    std::vector<std::string> out;
    for (const auto& m : j) out.push_back(m.get<std::string>());
    return out;
}

std::vector<std::size_t> histogram(const std::vector<IntervalPair>& pairs) {
    std::vector<std::size_t> h(kHistBins + 1, 0);
    for (const auto& p : pairs) {
        const auto bin = static_cast<std::size_t>(std::abs(p.rr_ms - p.jj_ms) / kHistBinMs);
        ++h[std::min(bin, kHistBins)];
    }
    return h;
}

fs::path write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    write_text_file(path, j.dump(2) + "\n");
    return path;
}

fs::path write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    write_text_file(path, text);
    return path;
}

}  // namespace

std::string method_name(Source s) { return std::string(to_string(s)); }

std::vector<CorpusRecording> load_corpus(const PipelineConfig& config) {
    if (config.corpus_dir.empty()) fail(ErrorKind::InvalidParameter, "paths.corpus_dir is not set");
    const auto manifest = read_manifest(config.corpus_dir / "manifest.json");
    if (manifest.empty()) fail(ErrorKind::InvalidInput, "corpus " + config.corpus_dir.string() + " is empty");
    std::vector<CorpusRecording> out;
    for (const auto& m : manifest)
        out.push_back({m.label, config.corpus_dir / m.signal_path, config.corpus_dir / m.annotation_path});
    return out;
}

SignalTrace preprocess(const SignalTrace& raw, const FilterConfig& filter) {
    return bandpass_filter(raw, filter.low_hz, filter.high_hz, filter.order);
}

fs::path locate_dl_executable(const DlConfig& dl) {
    if (dl.executable.empty())
        fail(ErrorKind::DependencyMissing, "dl detector configured but dl.executable is not set");
    auto runnable = [](const fs::path& p) { return ::access(p.c_str(), X_OK) == 0 && !fs::is_directory(p); };
    if (dl.executable.find('/') != std::string::npos) {
        if (runnable(dl.executable)) return dl.executable;
    } else if (const char* path = std::getenv("PATH")) {
        std::string_view rest(path);
        while (true) {
            const auto colon = rest.find(':');
            const fs::path dir(std::string(rest.substr(0, colon)));
            if (!dir.empty() && runnable(dir / dl.executable)) return dir / dl.executable;
            if (colon == std::string_view::npos) break;
            rest.remove_prefix(colon + 1);
        }
    }
    fail(ErrorKind::DependencyMissing, "dl detector executable not found: " + dl.executable);
}

BeatAnnotation run_dl_detector(const DlConfig& dl, const fs::path& signal_csv, const fs::path& out_json,
                               std::vector<std::string>* warnings) {
    const fs::path exe = locate_dl_executable(dl);
    if (dl.model.empty()) fail(ErrorKind::InvalidParameter, "dl detector configured but dl.model is not set");
    std::vector<std::string> args{exe.string(), "infer", "--model", dl.model, "--signal", signal_csv.string(),
                                  "--out", out_json.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0)
        fail(ErrorKind::DependencyMissing, "could not start dl detector " + exe.string());
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) fail(ErrorKind::Io, "waiting for the dl detector failed");
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        fail(ErrorKind::Io, "dl detector failed on " + signal_csv.string() + " (status " +
                                std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")");
    auto parsed = read_annotation_json(out_json);
    if (warnings)
        for (auto& w : parsed.warnings) warnings->push_back(out_json.string() + ": " + w);
    parsed.annotation.source = Source::Dl;
    return parsed.annotation;
}

namespace {

// A model is a directory of weights plus a spec echo; any file change must
// invalidate cached DL output.
std::uint64_t model_hash(const std::string& model, std::uint64_t key) {
    if (model.empty()) return key;
    const fs::path root(model);
    if (fs::is_regular_file(root)) return fnv1a(read_text_file(root), key);
    if (!fs::is_directory(root)) return key;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        key = fnv1a(fs::relative(f, root).generic_string(), key);
        key = fnv1a(read_text_file(f), key);
    }
    return key;
}

}  // namespace

Detections detect_recording(const PipelineConfig& config, const CorpusRecording& rec) {
    const std::string text = read_text_file(rec.signal_path);
    const SignalTrace raw = parse_signal_csv(text, rec.signal_path.string());
    Detections out;
    out.label = rec.label;
    out.filtered = std::make_shared<const SignalTrace>(preprocess(raw, config.filter));
    out.truth = read_annotation_json(rec.annotation_path).annotation;

    const std::uint64_t signal_hash = fnv1a(text);
    const std::string settings = config.detection_key();
    for (Source s : config.detectors) {
        std::uint64_t key = fnv1a(settings);
        key = fnv1a(to_string(s), key);
        key = fnv1a(hex64(signal_hash), key);
        if (s == Source::Dl) key = model_hash(config.dl.model, fnv1a(config.dl.executable, key));
        const fs::path cached = config.output_dir.empty()
                                    ? fs::path()
                                    : config.output_dir / "cache" / (method_name(s) + "-" + hex64(key) + ".json");
        BeatAnnotation ann;
        if (!cached.empty() && fs::exists(cached)) {
            ann = read_annotation_json(cached).annotation;
        } else {
            if (s == Source::Dl) {
                const fs::path scratch = cached.empty() ? fs::temp_directory_path() / ("bcg-dl-" + hex64(key) + ".json")
                                                        : fs::path(cached.string() + ".dl.json");
                if (!cached.empty()) fs::create_directories(cached.parent_path());
                std::vector<std::string> warnings;
                ann = run_dl_detector(config.dl, rec.signal_path, scratch, &warnings);
                for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
                fs::remove(scratch);
            } else {
                ann = run_builtin(s, *out.filtered, config.tm, rec.label);
            }
            ann.source = s;
            ann.trace_label = rec.label;
            if (!cached.empty()) write_json(cached, annotation_to_json(ann));
        }
        ann.source = s;
        ann.trace_label = rec.label;
        out.annotations[s] = std::move(ann);
    }
    return out;
}

std::vector<PreparedRecording> prepare_corpus(const PipelineConfig& config) {
    if (config.detectors.empty()) fail(ErrorKind::InvalidParameter, "run.detectors is empty");
    if (std::find(config.detectors.begin(), config.detectors.end(), Source::Dl) != config.detectors.end())
        locate_dl_executable(config.dl);
    const auto corpus = load_corpus(config);
    std::vector<PreparedRecording> out(corpus.size());
    parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
        const Detections det = detect_recording(config, corpus[i]);
        PreparedRecording& p = out[i];
        p.label = det.label;
        p.duration_ms = det.filtered->duration_ms();
        p.truth = det.truth;
        p.scored = score_recording(det.filtered, det.annotations, config.thresholds);
        for (const Epoch& e : segment_epochs(det.filtered, det.truth, config.thresholds.epoch_ms)) {
            p.epochs.push_back({e.start_ms, e.end_ms});
            p.quality.push_back(quality_level(e, config.quality));
            p.rmssd_ms.push_back(e.M >= 3 ? rmssd(intervals_of(e.beats)) : kNaN);
        }
    });
    return out;
}

double hrv_threshold(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus) {
    if (config.hrv_threshold_ms) return *config.hrv_threshold_ms;
    std::vector<double> all;
    for (const auto& r : corpus)
        for (double v : r.rmssd_ms)
            if (std::isfinite(v)) all.push_back(v);
    if (all.empty()) return kNaN;
    std::sort(all.begin(), all.end());
    const std::size_t mid = all.size() / 2;
    return all.size() % 2 ? all[mid] : 0.5 * (all[mid - 1] + all[mid]);
}

RecordingResult evaluate_recording(const PipelineConfig& config, const PreparedRecording& rec,
                                   const Thresholds& thresholds, double hrv_threshold_ms) {
    std::vector<EpochStratum> strata;
    for (std::size_t k = 0; k < rec.epochs.size(); ++k) {
        if (!std::isfinite(rec.rmssd_ms[k])) continue;
        const bool low = !(rec.rmssd_ms[k] > hrv_threshold_ms);
        strata.push_back({rec.epochs[k], std::string(to_string(rec.quality[k])) + (low ? "/low" : "/high")});
    }
    RecordingResult out;
    out.label = rec.label;
    auto run = [&](const std::string& name, std::optional<Source> only) {
        FusionResult f = assemble(rec.scored, thresholds, config.priority, only);
        out.methods[name] = evaluate(rec.truth, f.beats, f.reported, rec.duration_ms, strata, config.precision_ms);
        out.pairs[name] = pair_intervals(rec.truth, f.beats, &f.reported);
        out.fused[name] = std::move(f);
    };
    for (Source s : rec.scored.detectors) run(method_name(s), s);
    if (rec.scored.detectors.size() >= 2) run("hybrid", std::nullopt);
    return out;
}

MethodReports evaluate_corpus(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus,
                              const Thresholds& thresholds, double hrv_threshold_ms) {
    if (corpus.empty()) fail(ErrorKind::InvalidInput, "empty corpus");
    std::vector<MethodReports> per(corpus.size());
    parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
        per[i] = evaluate_recording(config, corpus[i], thresholds, hrv_threshold_ms).methods;
    });
    std::map<std::string, EvalAccumulator> acc;
    for (const auto& m : per)
        for (const auto& [name, report] : m) acc.try_emplace(name, config.precision_ms).first->second.merge(report);
    MethodReports out;
    for (const auto& [name, a] : acc) out[name] = a.report();
    return out;
}

SweepTables sweep_corpus(const PipelineConfig& config, const std::vector<PreparedRecording>& corpus) {
    if (corpus.empty()) fail(ErrorKind::InvalidInput, "empty corpus");
    const auto& g = config.sweep;
    if (g.t_mc.empty() || g.t_rc.empty() || g.weights.empty())
        fail(ErrorKind::InvalidParameter, "sweep grids must not be empty");
    const double hrv = hrv_threshold(config, corpus);
    const double inf = std::numeric_limits<double>::infinity();
    SweepTables out;
    out.methods = method_names(config);
    auto row = [&](std::string label, Thresholds t) {
        return SweepRow{std::move(label), t, evaluate_corpus(config, corpus, t, hrv)};
    };
    Thresholds open = config.thresholds;
    open.t_mc = -1.0;
    open.t_rc = inf;
    out.mc.push_back(row("-", open));
    for (double v : g.t_mc) {
        Thresholds t = open;
        t.t_mc = v;
        out.mc.push_back(row(fixed(v), t));
    }
    out.rc.push_back(row("-", open));
    for (double v : g.t_rc) {
        Thresholds t = open;
        t.t_rc = v;
        out.rc.push_back(row(fixed(v), t));
    }
    for (std::size_t i = 0; i < std::min(g.t_mc.size(), g.t_rc.size()); ++i) {
        Thresholds t = config.thresholds;
        t.t_mc = g.t_mc[i];
        t.t_rc = g.t_rc[i];
        out.paired.push_back(row(fixed(g.t_mc[i]) + ", " + fixed(g.t_rc[i]), t));
    }
    for (const auto& [w1, w2] : g.weights) {
        Thresholds t = config.thresholds;
        t.w1 = w1;
        t.w2 = w2;
        out.weights.push_back(row(format_real(w1) + ":" + format_real(w2), t));
    }
    return out;
}

json sweep_to_json(const SweepTables& tables) {
    auto rows = [](const std::vector<SweepRow>& v) {
        json arr = json::array();
        for (const auto& r : v) {
            json m = json::object();
            for (const auto& [name, rep] : r.methods) m[name] = report_without_strata(rep);
            arr.push_back({{"label", r.label}, {"thresholds", thresholds_json(r.thresholds)}, {"methods", m}});
        }
        return arr;
    };
    return json{{"methods", tables.methods},
                {"mc", rows(tables.mc)},
                {"rc", rows(tables.rc)},
                {"paired", rows(tables.paired)},
                {"weights", rows(tables.weights)}};
}

std::string render_sweep_text(const json& sweep) {
    const auto names = names_of(sweep.at("methods"));
    std::string methods;
    for (std::size_t i = 0; i < names.size(); ++i) methods += (i ? " / " : "") + names[i];
    std::string out;
    auto table = [&](const char* key, const char* title, const char* column) {
        if (!sweep.contains(key) || sweep[key].empty()) return;
        std::vector<std::vector<std::string>> rows{
            {column, "E_abs (ms) " + methods, "Pre (%) " + methods, "Coverage (%) " + methods}};
        for (const auto& r : sweep[key])
            rows.push_back({r["label"].get<std::string>(), joined(r["methods"], names, "e_abs_ms"),
                            joined(r["methods"], names, "pre_pct"), joined(r["methods"], names, "coverage_pct")});
        out += std::string(title) + "\n" + render_table(rows) + "\n";
    };
    table("mc", "Morphological threshold sweep", "T_MC");
    table("rc", "Rhythmic threshold sweep", "T_RC");
    table("paired", "Joint threshold sweep", "T_MC, T_RC");
    table("weights", "Weight ratio sweep", "w1:w2");

    // Mean and standard deviation of the hybrid down the weight table.
    if (sweep.contains("weights") && !sweep["weights"].empty() && sweep["weights"][0]["methods"].contains("hybrid")) {
        std::vector<std::vector<std::string>> rows{{"hybrid", "E_abs (ms)", "Pre (%)", "Coverage (%)"}};
        std::vector<std::string> mean{"Mean"}, sd{"Std"};
        for (const char* k : {"e_abs_ms", "pre_pct", "coverage_pct"}) {
            std::vector<double> v;
            for (const auto& r : sweep["weights"]) v.push_back(real_of(r["methods"]["hybrid"][k]));
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
            mean.push_back(fixed(m));
            sd.push_back(fixed(s));
        }
        rows.push_back(mean);
        rows.push_back(sd);
        out += render_table(rows) + "\n";
    }
    return out;
}

std::string render_strata_text(const json& methods) {
    std::vector<std::vector<std::string>> rows{
        {"HRV", "Method", "E_abs (ms) A / B / C", "Pre (%) A / B / C", "Coverage (%) A / B / C"}};
    for (const char* hrv : {"low", "high"}) {
        for (const auto& [name, rep] : methods.items()) {
            std::vector<std::string> row{hrv, name};
            for (const char* key : {"e_abs_ms", "pre_pct", "coverage_pct"}) {
                std::string cell;
                for (const char* q : {"A", "B", "C"}) {
                    const std::string label = std::string(q) + "/" + hrv;
                    double v = kNaN;
                    if (rep.contains("strata") && rep["strata"].contains(label)) v = real_of(rep["strata"][label][key]);
                    cell += (cell.empty() ? "" : " / ") + fixed(v);
                }
                row.push_back(cell);
            }
            rows.push_back(row);
        }
    }
    return render_table(rows);
}

std::vector<fs::path> run_detect(const PipelineConfig& config) {
    require_output_dir(config);
    if (std::find(config.detectors.begin(), config.detectors.end(), Source::Dl) != config.detectors.end())
        locate_dl_executable(config.dl);
    const auto corpus = load_corpus(config);
    std::vector<std::vector<fs::path>> written(corpus.size());
    parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
        const Detections det = detect_recording(config, corpus[i]);
        for (const auto& [s, ann] : det.annotations)
            written[i].push_back(write_json(config.output_dir / "detections" / (det.label + "." + method_name(s) + ".json"),
                                            annotation_to_json(ann)));
    });
    std::vector<fs::path> out;
    for (auto& w : written) out.insert(out.end(), w.begin(), w.end());
    return out;
}

std::vector<fs::path> run_score(const PipelineConfig& config) {
    require_output_dir(config);
    const auto corpus = prepare_corpus(config);
    std::vector<fs::path> out;
    for (const auto& rec : corpus) {
        json records = json::array();
        for (const auto& row : rec.scored.epochs)
            for (const auto& c : row) records.push_back(score_to_json(c.score));
        out.push_back(write_json(config.output_dir / "scores" / (rec.label + ".json"), records));
    }
    return out;
}

std::vector<fs::path> run_fuse(const PipelineConfig& config) {
    require_output_dir(config);
    if (config.detectors.size() < 2)
        fail(ErrorKind::InvalidInput, "hybrid fusion needs at least 2 detectors, got " +
                                          std::to_string(config.detectors.size()));
    const auto corpus = prepare_corpus(config);
    std::vector<fs::path> out;
    for (const auto& rec : corpus) {
        const FusionResult f = assemble(rec.scored, config.thresholds, config.priority);
        out.push_back(write_json(config.output_dir / "hybrid" / (rec.label + ".json"), annotation_to_json(f.beats)));
        out.push_back(write_json(config.output_dir / "hybrid" / (rec.label + ".audit.json"), fusion_audit(f)));
    }
    return out;
}

std::vector<fs::path> run_eval(const PipelineConfig& config) {
    require_output_dir(config);
    const auto corpus = prepare_corpus(config);
    const double hrv = hrv_threshold(config, corpus);
    std::vector<RecordingResult> results(corpus.size());
    parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
        results[i] = evaluate_recording(config, corpus[i], config.thresholds, hrv);
    });

    std::map<std::string, EvalAccumulator> acc;
    std::map<std::string, std::vector<std::size_t>> hist;
    json recordings = json::array();
    json f_trace = json::array();
    for (const auto& r : results) {
        json methods = json::object();
        for (const auto& [name, rep] : r.methods) {
            acc.try_emplace(name, config.precision_ms).first->second.merge(rep);
            methods[name] = report_to_json(rep);
            const auto h = histogram(r.pairs.at(name));
            auto& total = hist[name];
            total.resize(h.size(), 0);
            for (std::size_t k = 0; k < h.size(); ++k) total[k] += h[k];
        }
        recordings.push_back({{"label", r.label}, {"methods", methods}});
        const auto it = r.fused.find(r.fused.count("hybrid") ? "hybrid" : r.fused.begin()->first);
        for (const auto& o : it->second.outcomes) {
            json cands = json::array();
            for (const auto& c : o.candidates) cands.push_back(score_to_json(c));
            f_trace.push_back({{"label", r.label},
                               {"epoch_start_ms", o.epoch_start_ms},
                               {"epoch_end_ms", o.epoch_end_ms},
                               {"chosen", o.chosen ? json(method_name(*o.chosen)) : json(nullptr)},
                               {"candidates", cands}});
        }
    }
    json pooled = json::object();
    for (const auto& [name, a] : acc) pooled[name] = report_to_json(a.report());
    json histo = json::object();
    for (const auto& [name, h] : hist) {
        json bins = json::array();
        for (std::size_t k = 0; k < h.size(); ++k)
            bins.push_back({{"lo_ms", static_cast<double>(k) * kHistBinMs},
                            {"hi_ms", k < kHistBins ? json(static_cast<double>(k + 1) * kHistBinMs) : json(nullptr)},
                            {"count", h[k]}});
        histo[name] = bins;
    }
    const json doc{{"thresholds", thresholds_json(config.thresholds)},
                   {"hrv_threshold_ms", real_or_null(hrv)},
                   {"methods", pooled},
                   {"recordings", recordings},
                   {"error_histogram", histo},
                   {"f_trace", f_trace}};

    std::vector<std::vector<std::string>> rows{{"Method", "E_abs (ms)", "Pre (%)", "Coverage (%)", "N_BCG"}};
    for (const auto& [name, rep] : pooled.items())
        rows.push_back({name, fixed(real_of(rep["e_abs_ms"])), fixed(real_of(rep["pre_pct"])),
                        fixed(real_of(rep["coverage_pct"])), std::to_string(rep["n_bcg"].get<std::size_t>())});
    const std::string text = "Evaluation at T_MC=" + fixed(config.thresholds.t_mc) + ", T_RC=" +
                             fixed(config.thresholds.t_rc) + ", w1:w2=" + format_real(config.thresholds.w1) + ":" +
                             format_real(config.thresholds.w2) + "\n" + render_table(rows) + "\n" +
                             render_strata_text(pooled);
    return {write_json(config.output_dir / "eval.json", doc), write_text(config.output_dir / "eval.txt", text)};
}

std::vector<fs::path> run_sweep(const PipelineConfig& config) {
    require_output_dir(config);
    const auto corpus = prepare_corpus(config);
    const json doc = sweep_to_json(sweep_corpus(config, corpus));
    return {write_json(config.output_dir / "sweep.json", doc),
            write_text(config.output_dir / "sweep.txt", render_sweep_text(doc))};
}

std::vector<fs::path> run_report(const PipelineConfig& config, std::vector<std::string>* warnings) {
    if (config.output_dir.empty()) fail(ErrorKind::InvalidParameter, "paths.output_dir is not set");
    const fs::path eval_path = config.output_dir / "eval.json";
    const fs::path sweep_path = config.output_dir / "sweep.json";
    const bool have_eval = fs::exists(eval_path);
    const bool have_sweep = fs::exists(sweep_path);
    if (!have_eval && !have_sweep) {
        if (warnings) warnings->push_back("no results in " + config.output_dir.string() + "; report is empty");
        return {};
    }
    auto load = [](const fs::path& p) {
        try {
            return json::parse(read_text_file(p));
        } catch (const json::parse_error& e) {
            fail(ErrorKind::Parse, p.string() + ": " + e.what());
        }
    };
    const fs::path dir = config.output_dir / "report";
    std::vector<fs::path> out;
    json report = json::object();
    std::string text;
    if (have_sweep) {
        const json sweep = load(sweep_path);
        report["sweep"] = sweep;
        text += render_sweep_text(sweep);
    }
    if (have_eval) {
        const json eval = load(eval_path);
        report["eval"] = {{"thresholds", eval["thresholds"]},
                          {"hrv_threshold_ms", eval["hrv_threshold_ms"]},
                          {"methods", eval["methods"]},
                          {"recordings", eval["recordings"]}};
        text += "Signal quality and HRV strata\n" + render_strata_text(eval["methods"]) + "\n";
        for (const auto& r : eval["recordings"]) {
            std::vector<std::vector<std::string>> rows{{"Method", "E_abs (ms)", "Pre (%)", "Coverage (%)"}};
            for (const auto& [name, rep] : r["methods"].items())
                rows.push_back({name, fixed(real_of(rep["e_abs_ms"])), fixed(real_of(rep["pre_pct"])),
                                fixed(real_of(rep["coverage_pct"]))});
            text += "Recording " + r["label"].get<std::string>() + "\n" + render_table(rows) + "\n";
        }

        std::string f_csv = "label,epoch_start_ms,epoch_end_ms,detector,c1,c2,F,acceptable,chosen\n";
        for (const auto& e : eval["f_trace"]) {
            const std::string chosen = e["chosen"].is_null() ? "" : e["chosen"].get<std::string>();
            for (const auto& c : e["candidates"]) {
                auto cell = [&](const char* k) { return c[k].is_null() ? std::string() : format_real(c[k].get<double>()); };
                f_csv += e["label"].get<std::string>() + "," + format_real(e["epoch_start_ms"].get<double>()) + "," +
                         format_real(e["epoch_end_ms"].get<double>()) + "," + c["detector"].get<std::string>() + "," +
                         cell("c1") + "," + cell("c2") + "," + cell("F") + "," +
                         (c["acceptable"].get<bool>() ? "1" : "0") + "," + chosen + "\n";
            }
        }
        out.push_back(write_text(dir / "series" / "f_trace.csv", f_csv));

        std::string h_csv = "method,lo_ms,hi_ms,count\n";
        for (const auto& [name, bins] : eval["error_histogram"].items())
            for (const auto& b : bins)
                h_csv += name + "," + format_real(b["lo_ms"].get<double>()) + "," +
                         (b["hi_ms"].is_null() ? std::string() : format_real(b["hi_ms"].get<double>())) + "," +
                         std::to_string(b["count"].get<std::size_t>()) + "\n";
        out.push_back(write_text(dir / "series" / "error_hist.csv", h_csv));
    }
    out.insert(out.begin(), {write_json(dir / "report.json", report), write_text(dir / "report.txt", text)});
    return out;
}

}  // namespace bcg

#include "bcg/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "bcg/error.hpp"
#include "bcg/io.hpp"

namespace bcg {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    while (!s.empty()) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

double to_real(std::string_view v) {
    const double x = parse_real(trim(v));
    return x;
}

std::size_t to_count(std::string_view v) {
    v = trim(v);
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(ErrorKind::Parse, "expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

Source to_source(std::string_view v) {
    const auto s = source_from_string(trim(v));
    if (!s || *s == Source::GroundTruth || *s == Source::Hybrid)
        fail(ErrorKind::Parse, "unknown detector '" + std::string(v) + "'");
    return *s;
}

std::vector<Source> to_sources(std::string_view v) {
    std::vector<Source> out;
    for (auto item : split_list(v)) {
        const Source s = to_source(item);
        if (std::find(out.begin(), out.end(), s) != out.end())
            fail(ErrorKind::Parse, "detector '" + std::string(item) + "' listed twice");
        out.push_back(s);
    }
    return out;
}

std::string join_sources(const std::vector<Source>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::string(to_string(v[i]));
    return out;
}

std::string join_reals(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
    return out;
}

std::filesystem::path to_path(std::string_view v, const std::filesystem::path& base) {
    std::filesystem::path p{std::string(trim(v))};
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
}

struct Setting {
    std::function<void(PipelineConfig&, std::string_view, const std::filesystem::path&)> set;
    std::function<std::string(const PipelineConfig&)> get;
    bool affects_detection = false;
};

template <typename Get>
Setting real_setting(Get field, bool detection = false) {
    return {[field](PipelineConfig& c, std::string_view v, const std::filesystem::path&) { field(c) = to_real(v); },
            [field](const PipelineConfig& c) { return format_real(field(const_cast<PipelineConfig&>(c))); },
            detection};
}

template <typename Get>
Setting count_setting(Get field, bool detection = false) {
    return {[field](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_count(v));
            },
            [field](const PipelineConfig& c) { return std::to_string(field(const_cast<PipelineConfig&>(c))); },
            detection};
}

const std::map<std::string, Setting, std::less<>>& registry() {
    static const std::map<std::string, Setting, std::less<>> table = [] {
        std::map<std::string, Setting, std::less<>> t;
        t["paths.corpus_dir"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path& b) { c.corpus_dir = to_path(v, b); },
            [](const PipelineConfig& c) { return c.corpus_dir.generic_string(); }};
        t["paths.output_dir"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path& b) { c.output_dir = to_path(v, b); },
            [](const PipelineConfig& c) { return c.output_dir.generic_string(); }};

        t["thresholds.t_mc"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.t_mc; });
        t["thresholds.t_rc"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.t_rc; });
        t["thresholds.w1"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.w1; });
        t["thresholds.w2"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.w2; });
        t["thresholds.epoch_ms"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.epoch_ms; });
        t["thresholds.hr_min_bpm"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.hr_min_bpm; });
        t["thresholds.hr_max_bpm"] = real_setting([](PipelineConfig& c) -> double& { return c.thresholds.hr_max_bpm; });

        t["quality.level_a"] = real_setting([](PipelineConfig& c) -> double& { return c.quality.level_a; });
        t["quality.level_b"] = real_setting([](PipelineConfig& c) -> double& { return c.quality.level_b; });
        t["quality.template_window_ms"] =
            real_setting([](PipelineConfig& c) -> double& { return c.quality.template_window_ms; });
        t["quality.hrv_threshold_ms"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                if (trim(v) == "median")
                    c.hrv_threshold_ms.reset();
                else
                    c.hrv_threshold_ms = to_real(v);
            },
            [](const PipelineConfig& c) {
                return c.hrv_threshold_ms ? format_real(*c.hrv_threshold_ms) : std::string("median");
            }};
        t["eval.precision_ms"] = real_setting([](PipelineConfig& c) -> double& { return c.precision_ms; });

        t["filter.low_hz"] = real_setting([](PipelineConfig& c) -> double& { return c.filter.low_hz; }, true);
        t["filter.high_hz"] = real_setting([](PipelineConfig& c) -> double& { return c.filter.high_hz; }, true);
        t["filter.order"] = count_setting([](PipelineConfig& c) -> int& { return c.filter.order; }, true);

        auto tm_real = [&](const char* key, double TmConfig::*m) {
            t[std::string("tm.") + key] =
                real_setting([m](PipelineConfig& c) -> double& { return c.tm.*m; }, true);
        };
        tm_real("artifact_k", &TmConfig::artifact_k);
        tm_real("artifact_window_ms", &TmConfig::artifact_window_ms);
        tm_real("artifact_hop_ms", &TmConfig::artifact_hop_ms);
        tm_real("artifact_dilation_ms", &TmConfig::artifact_dilation_ms);
        tm_real("min_unmasked_ms", &TmConfig::min_unmasked_ms);
        tm_real("acf_window_ms", &TmConfig::acf_window_ms);
        tm_real("acf_min_peak", &TmConfig::acf_min_peak);
        tm_real("refine_gate", &TmConfig::refine_gate);
        tm_real("search_lo", &TmConfig::search_lo);
        tm_real("search_hi", &TmConfig::search_hi);
        tm_real("lambda", &TmConfig::lambda);
        tm_real("interval_alpha", &TmConfig::interval_alpha);
        tm_real("template_beta", &TmConfig::template_beta);
        tm_real("dtw_band", &TmConfig::dtw_band);
        tm_real("snap_ms", &TmConfig::snap_ms);
        tm_real("fuse_eps_ms", &TmConfig::fuse_eps_ms);
        t["tm.refine_max_iter"] = count_setting([](PipelineConfig& c) -> int& { return c.tm.refine_max_iter; }, true);
        t["tm.min_template_beats"] =
            count_setting([](PipelineConfig& c) -> std::size_t& { return c.tm.min_template_beats; }, true);
        t["tm.dtw_points"] = count_setting([](PipelineConfig& c) -> std::size_t& { return c.tm.dtw_points; }, true);
        t["tm.shortlist"] = count_setting([](PipelineConfig& c) -> std::size_t& { return c.tm.shortlist; }, true);

        t["run.detectors"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) { c.detectors = to_sources(v); },
            [](const PipelineConfig& c) { return join_sources(c.detectors); }};
        t["fusion.priority"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) { c.priority = to_sources(v); },
            [](const PipelineConfig& c) { return join_sources(c.priority); }};
        t["run.workers"] = count_setting([](PipelineConfig& c) -> std::size_t& { return c.workers; });
        t["dl.executable"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path& b) {
                const auto s = trim(v);
                // Bare names are looked up on PATH; anything with a slash is a path.
                c.dl.executable = s.find('/') == std::string_view::npos ? std::string(s) : to_path(s, b).string();
            },
            [](const PipelineConfig& c) { return c.dl.executable; }};
        t["dl.model"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path& b) {
                c.dl.model = trim(v).empty() ? std::string() : to_path(v, b).string();
            },
            [](const PipelineConfig& c) { return c.dl.model; }};

        t["sweep.t_mc"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                c.sweep.t_mc.clear();
                for (auto item : split_list(v)) c.sweep.t_mc.push_back(to_real(item));
            },
            [](const PipelineConfig& c) { return join_reals(c.sweep.t_mc); }};
        t["sweep.t_rc"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                c.sweep.t_rc.clear();
                for (auto item : split_list(v)) c.sweep.t_rc.push_back(to_real(item));
            },
            [](const PipelineConfig& c) { return join_reals(c.sweep.t_rc); }};
        t["sweep.weights"] = {
            [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                c.sweep.weights.clear();
                for (auto item : split_list(v)) {
                    const auto colon = item.find(':');
                    if (colon == std::string_view::npos)
                        fail(ErrorKind::Parse, "weight pairs look like w1:w2, got '" + std::string(item) + "'");
                    c.sweep.weights.emplace_back(to_real(item.substr(0, colon)), to_real(item.substr(colon + 1)));
                }
            },
            [](const PipelineConfig& c) {
                std::string out;
                for (std::size_t i = 0; i < c.sweep.weights.size(); ++i)
                    out += (i ? "," : "") + format_real(c.sweep.weights[i].first) + ":" +
                           format_real(c.sweep.weights[i].second);
                return out;
            }};
        return t;
    }();
    return table;
}

std::string dump(const PipelineConfig& c, bool detection_only) {
    std::ostringstream out;
    for (const auto& [key, s] : registry()) {
        if (detection_only && !s.affects_detection) continue;
        out << key << '=' << s.get(c) << '\n';
    }
    return out.str();
}

}  // namespace

std::string PipelineConfig::canonical() const { return dump(*this, false); }
std::string PipelineConfig::detection_key() const { return dump(*this, true); }

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir) {
    const auto it = registry().find(trim(key));
    if (it == registry().end()) fail(ErrorKind::Parse, "unknown config key '" + std::string(trim(key)) + "'");
    it->second.set(config, value, base_dir);
}

PipelineConfig parse_config(std::string_view text, std::string_view name, const std::filesystem::path& base_dir) {
    PipelineConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = std::string(name) + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) fail(ErrorKind::Parse, where + "expected key=value");
        try {
            apply_setting(config, line.substr(0, eq), line.substr(eq + 1), base_dir);
        } catch (const Error& e) {
            fail(ErrorKind::Parse, where + e.what());
        }
    }
    if (config.thresholds.t_mc > 1.0) fail(ErrorKind::Parse, std::string(name) + ": thresholds.t_mc above 1");
    try {
        config.thresholds.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Parse, std::string(name) + ": " + e.what());
    }
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_text_file(path), path.string(), path.parent_path());
}

}  // namespace bcg

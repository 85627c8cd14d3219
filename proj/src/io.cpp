#include "bcg/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bcg/error.hpp"

namespace bcg {

namespace fs = std::filesystem;

std::string format_real(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return {buf, end};
}

double parse_real(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        fail(ErrorKind::Parse, "not a number: '" + std::string(text) + "'");
    return value;
}

std::string format_signal_csv(const SignalTrace& trace) {
    std::string out = "# sampling_hz=" + format_real(trace.sampling_hz) +
                      " start_time_ms=" + format_real(trace.start_time_ms) +
                      " label=" + trace.label + "\n";
    out.reserve(out.size() + trace.size() * 12);
    for (double v : trace.samples) {
        out += format_real(v);
        out += '\n';
    }
    return out;
}

SignalTrace parse_signal_csv(std::string_view text, std::string_view name) {
    auto where = [&](std::size_t line) {
        return std::string(name) + ":" + std::to_string(line) + ": ";
    };
    SignalTrace trace;
    std::size_t line_no = 0;
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!have_header) {
            constexpr std::string_view k1 = "# sampling_hz=";
            constexpr std::string_view k2 = " start_time_ms=";
            constexpr std::string_view k3 = " label=";
            if (!line.starts_with(k1)) fail(ErrorKind::Parse, where(line_no) + "missing header");
            line.remove_prefix(k1.size());
            const auto p2 = line.find(k2);
            if (p2 == std::string_view::npos)
                fail(ErrorKind::Parse, where(line_no) + "header lacks start_time_ms");
            trace.sampling_hz = parse_real(line.substr(0, p2));
            line.remove_prefix(p2 + k2.size());
            const auto p3 = line.find(k3);
            if (p3 == std::string_view::npos)
                fail(ErrorKind::Parse, where(line_no) + "header lacks label");
            trace.start_time_ms = parse_real(line.substr(0, p3));
            trace.label = std::string(line.substr(p3 + k3.size()));
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        try {
            trace.samples.push_back(parse_real(line));
        } catch (const Error& e) {
            fail(ErrorKind::Parse, where(line_no) + e.what());
        }
    }
    if (!have_header) fail(ErrorKind::Parse, std::string(name) + ": empty signal file");
    try {
        trace.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Parse, std::string(name) + ": " + e.what());
    }
    return trace;
}

void write_signal_csv(const SignalTrace& trace, const fs::path& path) {
    write_text_file(path, format_signal_csv(trace));
}

SignalTrace read_signal_csv(const fs::path& path) {
    return parse_signal_csv(read_text_file(path), path.string());
}

nlohmann::json annotation_to_json(const BeatAnnotation& annotation) {
    return nlohmann::json{{"trace_label", annotation.trace_label},
                          {"source", std::string(to_string(annotation.source))},
                          {"peak_times_ms", annotation.peak_times_ms}};
}

AnnotationParse annotation_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Parse, "annotation must be a JSON object");
    AnnotationParse out;
    for (const auto& [key, value] : j.items()) {
        if (key != "trace_label" && key != "source" && key != "peak_times_ms")
            out.warnings.push_back("unknown key '" + key + "'");
    }
    for (const char* key : {"trace_label", "source", "peak_times_ms"})
        if (!j.contains(key)) fail(ErrorKind::Parse, std::string("annotation lacks '") + key + "'");
    if (!j["trace_label"].is_string()) fail(ErrorKind::Parse, "trace_label must be a string");
    if (!j["source"].is_string()) fail(ErrorKind::Parse, "source must be a string");
    if (!j["peak_times_ms"].is_array()) fail(ErrorKind::Parse, "peak_times_ms must be an array");

    out.annotation.trace_label = j["trace_label"].get<std::string>();
    const auto source_name = j["source"].get<std::string>();
    const auto source = source_from_string(source_name);
    if (!source) fail(ErrorKind::Parse, "unknown source '" + source_name + "'");
    out.annotation.source = *source;
    for (const auto& v : j["peak_times_ms"]) {
        if (!v.is_number()) fail(ErrorKind::Parse, "peak_times_ms must hold numbers");
        out.annotation.peak_times_ms.push_back(v.get<double>());
    }
    try {
        out.annotation.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Parse, e.what());
    }
    return out;
}

std::string format_annotation_json(const BeatAnnotation& annotation) {
    return annotation_to_json(annotation).dump(2) + "\n";
}

void write_annotation_json(const BeatAnnotation& annotation, const fs::path& path) {
    write_text_file(path, format_annotation_json(annotation));
}

AnnotationParse read_annotation_json(const fs::path& path) {
    const auto text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    try {
        return annotation_from_json(j);
    } catch (const Error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
    }
    fs::rename(tmp, path);
}

}  // namespace bcg

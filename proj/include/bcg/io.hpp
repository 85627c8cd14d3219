#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bcg/signal.hpp"

namespace bcg {

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);
double parse_real(std::string_view text);

// Signal CSV: `# sampling_hz=<real> start_time_ms=<real> label=<text>`
// followed by one amplitude per line.
std::string format_signal_csv(const SignalTrace& trace);
SignalTrace parse_signal_csv(std::string_view text, std::string_view name = "<memory>");
void write_signal_csv(const SignalTrace& trace, const std::filesystem::path& path);
SignalTrace read_signal_csv(const std::filesystem::path& path);

struct AnnotationParse {
    BeatAnnotation annotation;
    std::vector<std::string> warnings;
};

nlohmann::json annotation_to_json(const BeatAnnotation& annotation);
AnnotationParse annotation_from_json(const nlohmann::json& j);
std::string format_annotation_json(const BeatAnnotation& annotation);
void write_annotation_json(const BeatAnnotation& annotation, const std::filesystem::path& path);
AnnotationParse read_annotation_json(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: to a sibling temp file, then rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace bcg

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcg/config.hpp"
#include "bcg/error.hpp"
#include "bcg/pipeline.hpp"
#include "bcg/synth.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kMissingDependency = 3 };

int exit_code(bcg::ErrorKind kind) {
    switch (kind) {
        case bcg::ErrorKind::InvalidParameter: return kUsage;
        case bcg::ErrorKind::DependencyMissing: return kMissingDependency;
        default: return kData;
    }
}

bcg::PipelineConfig load(const std::string& path, const std::vector<std::string>& overrides, std::size_t workers) {
    bcg::PipelineConfig config = bcg::load_config(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) bcg::fail(bcg::ErrorKind::InvalidParameter, "--set expects key=value, got " + kv);
        bcg::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (workers > 0) config.workers = workers;
    return config;
}

void print(const std::vector<std::filesystem::path>& files) {
    for (const auto& f : files) std::cout << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BCG heartbeat detection toolkit"};
    app.require_subcommand(1);

    std::string spec, out_dir, config_path;
    std::vector<std::string> overrides;
    std::size_t workers = 0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus from a corpus spec");
    synth->add_option("--spec", spec, "corpus spec file")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--workers", workers, "parallel recordings");

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"detect", "run the configured detectors on every recording"},
        {"score", "write per-epoch confidence scores"},
        {"fuse", "write hybrid annotations and fusion audit logs"},
        {"eval", "evaluate solo and hybrid results against the reference"},
        {"sweep", "threshold and weight sweep tables"},
        {"report", "render tables and plot series from existing results"},
    };
    std::vector<CLI::App*> pipeline;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "pipeline config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "override a config entry, key=value");
        sub->add_option("--workers", workers, "parallel recordings");
        pipeline.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (synth->parsed()) {
            bcg::generate_corpus(std::filesystem::path(spec), out_dir, workers ? workers : 1);
            print({std::filesystem::path(out_dir) / "manifest.json"});
            return kOk;
        }
        const auto config = load(config_path, overrides, workers);
        if (pipeline[0]->parsed()) print(bcg::run_detect(config));
        if (pipeline[1]->parsed()) print(bcg::run_score(config));
        if (pipeline[2]->parsed()) print(bcg::run_fuse(config));
        if (pipeline[3]->parsed()) print(bcg::run_eval(config));
        if (pipeline[4]->parsed()) print(bcg::run_sweep(config));
        if (pipeline[5]->parsed()) {
            std::vector<std::string> warnings;
            print(bcg::run_report(config, &warnings));
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        }
        return kOk;
    } catch (const bcg::Error& e) {
        std::cerr << "error (" << bcg::to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kData;
    }
}

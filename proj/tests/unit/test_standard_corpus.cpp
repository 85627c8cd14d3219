#include <filesystem>

#include "doctest.h"
#include "bcg/config.hpp"
#include "bcg/pipeline.hpp"
#include "bcg/synth.hpp"
#include "support/helpers.hpp"

using namespace bcg;
namespace fs = std::filesystem;

TEST_CASE("one-point grid at (0.75, 0.20) on the standard corpus") {
    PipelineConfig c;
    c.corpus_dir = testing::fresh_dir(fs::path(BCG_SCRATCH) / "standard");
    c.output_dir = testing::fresh_dir(fs::path(BCG_SCRATCH) / "out");
    c.workers = 4;
    generate_corpus(fs::path(BCG_FIXTURES) / "standard_corpus.txt", c.corpus_dir, c.workers);
    c.sweep.t_mc = {0.75};
    c.sweep.t_rc = {0.20};
    c.sweep.weights = {{1, 3}};

    const auto tables = sweep_corpus(c, prepare_corpus(c));
    REQUIRE(tables.paired.size() == 1);
    const auto& row = tables.paired.front().methods;
    const double hybrid = row.at("hybrid").e_abs_ms;
    CAPTURE(hybrid);
    CAPTURE(row.at("tm").coverage_pct);
    CAPTURE(row.at("alternate").coverage_pct);
    CAPTURE(row.at("hybrid").coverage_pct);
    CHECK(hybrid <= row.at("tm").e_abs_ms);
    CHECK(hybrid <= row.at("alternate").e_abs_ms);
}

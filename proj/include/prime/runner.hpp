#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prime/config.hpp"
#include "prime/metrics.hpp"

namespace prime {

struct SeedRun {
    std::uint64_t seed = 0;
    Metrics metrics;
    std::size_t params_before = 0;  // after the base stage
    std::size_t params_after = 0;   // final model
    std::size_t expansions = 0;     // widening events across the stream
    std::string dir;                // sub-directory, relative to the run dir
};

struct ScenarioResult {
    std::string dir;
    std::string fingerprint;
    std::vector<SeedRun> runs;
    MetricsSummary summary;
};

// Runs cfg.method across every seed of the scenario.  Creates
// <out_root>/<name>-<method>/ containing config.json, one directory per
// seed (events.jsonl, accuracy matrix, metrics, final checkpoint), and the
// cross-seed aggregate; refuses to overwrite an existing run directory.
// Everything is validated before anything is written, so a bad config
// leaves no partial output.  Seeds run in parallel when cfg.jobs > 1.
ScenarioResult run_scenario(const RunConfig& cfg, const std::string& out_root);

// One method's row in a cross-method comparison.
struct ComparisonRow {
    std::string method;
    std::string name;
    std::string dir;
    std::size_t seeds = 0;
    MetricsSummary metrics;
    std::size_t params_before = 0;
    double params_after_mean = 0.0;
    double expansions_mean = 0.0;
};

struct Comparison {
    std::string fingerprint;
    std::vector<ComparisonRow> rows;
};

// Loads each run directory, re-derives its fingerprint from config.json,
// cross-checks the stored aggregate (including recomputing the summary from
// the per-seed metrics), and refuses directories whose scenarios differ.
Comparison compare_runs(const std::vector<std::string>& run_dirs);

std::string comparison_text(const Comparison& c);
std::string comparison_csv(const Comparison& c);

}  // namespace prime

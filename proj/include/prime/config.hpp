#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prime/incremental.hpp"
#include "prime/plasticity.hpp"
#include "prime/synth.hpp"

namespace prime {

// Geometry of the classifier stack; the data width comes from the scenario.
struct ModelSpec {
    std::size_t token_dim = 64;
    std::size_t attn_heads = 2;
    std::vector<std::size_t> hidden = {64, 32};
    double dropout = 0.2;
};

// Where the data comes from and how it is staged.  An empty `dataset` path
// means the run synthesizes its own corpus from the generator fields;
// otherwise the file is loaded and the generator fields are ignored.
struct ScenarioSpec {
    std::string dataset;
    std::size_t classes = 14;
    double similarity = 0.6;
    std::size_t samples_per_class = 160;
    std::size_t n_b = 192;
    std::size_t n_p = 16;
    std::uint64_t data_seed = 1;
    std::vector<std::vector<int>> stages;
    SplitFractions split;
};

// One experiment: a scenario, a model, a method, and every knob each module
// takes.  The whole struct is serialized into the run directory so a run
// can be reproduced from its own output.
struct RunConfig {
    std::string name = "scenario";
    std::string profile = "desk";  // desk | full (defaults applied at parse)
    std::string method = "lwf";    // base | lwf | ewc | prime
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t jobs = 1;          // parallel sub-run workers
    ScenarioSpec scenario;
    ModelSpec model;
    LwfConfig training;
    EwcConfig ewc;
    PlasticityConfig plasticity;
    ExpansionConfig expansion;
};

// Profile defaults: `desk` is sized so a full comparison finishes in
// minutes on one core; `full` carries the production-scale values.
RunConfig run_config_defaults(const std::string& profile);

// Strict parse: unknown keys anywhere are rejected, all problems (type
// mismatches, unknown keys, invalid values) are reported in one exception.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Re-validates an already-built config, throwing the same exhaustive
// ConfigError parse_run_config would.
void validate_run_config(const RunConfig& cfg);

// Full-provenance serialization; parse_run_config(run_config_json(c)) == c.
std::string run_config_json(const RunConfig& cfg);

// FNV-1a over the comparability-defining fields (scenario, model, shared
// training budget, seeds); method and method-specific knobs excluded so
// method runs over the same scenario share a fingerprint.
std::string scenario_fingerprint(const RunConfig& cfg);

}  // namespace prime

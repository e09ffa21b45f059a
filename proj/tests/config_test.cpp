#include "prime/config.hpp"

#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "prime/errors.hpp"

using namespace prime;
using doctest::Contains;

namespace {

// Smallest config that passes validation: everything else comes from the
// desk profile.
const char* kMinimal = R"({"scenario": {"stages": [[0, 1], [2, 3]]}})";

std::string parse_failure(const std::string& text) {
    try {
        parse_run_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

RunConfig valid_config() {
    RunConfig cfg = run_config_defaults("desk");
    cfg.scenario.stages = {{0, 1}, {2, 3}};
    return cfg;
}

}  // namespace

TEST_CASE("desk profile defaults are the struct defaults") {
    const RunConfig cfg = run_config_defaults("desk");
    CHECK(cfg.profile == "desk");
    CHECK(cfg.method == "lwf");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(cfg.scenario.classes == 14);
    CHECK(cfg.scenario.n_b == 192);
    CHECK(cfg.scenario.n_p == 16);
    CHECK(cfg.model.token_dim == 64);
    CHECK(cfg.model.attn_heads == 2);
    CHECK(cfg.model.hidden == std::vector<std::size_t>{64, 32});
    CHECK(cfg.model.dropout == doctest::Approx(0.2));
    CHECK(cfg.training.epochs == 15);
    CHECK(cfg.training.batch_size == 128);
}

TEST_CASE("full profile carries the production-scale geometry") {
    const RunConfig cfg = run_config_defaults("full");
    CHECK(cfg.scenario.n_b == 784);
    CHECK(cfg.scenario.n_p == 32);
    // feature width 784 + 4*32 = 912 folds into one 912-dim token
    CHECK(cfg.model.token_dim == 912);
    CHECK(cfg.model.attn_heads == 2);
    CHECK(cfg.model.hidden == std::vector<std::size_t>{256, 64});
    CHECK(cfg.training.epochs == 30);
    CHECK(cfg.training.batch_size == 512);
    CHECK(cfg.training.lr == doctest::Approx(1e-3));
    CHECK(cfg.training.plateau.factor == doctest::Approx(0.5));
    CHECK(cfg.training.plateau.patience == 5);
}

TEST_CASE("unknown profile is rejected by name") {
    CHECK_THROWS_WITH_AS(run_config_defaults("laptop"), Contains("laptop"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"profile": "laptop"})"), ConfigError);
}

TEST_CASE("a minimal config parses and picks up every default") {
    const RunConfig cfg = parse_run_config(kMinimal);
    CHECK(cfg.name == "scenario");
    CHECK(cfg.method == "lwf");
    CHECK(cfg.jobs == 1);
    CHECK(cfg.scenario.stages == std::vector<std::vector<int>>{{0, 1}, {2, 3}});
    CHECK(cfg.scenario.split.train == doctest::Approx(0.75));
    CHECK(cfg.scenario.split.val == doctest::Approx(0.10));
    CHECK(cfg.scenario.split.test == doctest::Approx(0.15));
    CHECK(cfg.plasticity.trigger == doctest::Approx(0.87));
    CHECK(cfg.expansion.allowed_factors == std::vector<double>{1.25, 1.5, 2.0});
}

TEST_CASE("explicit values override profile defaults") {
    const RunConfig cfg = parse_run_config(R"({
        "name": "widths",
        "profile": "full",
        "method": "prime",
        "seeds": [7, 11],
        "jobs": 2,
        "scenario": {"stages": [[0], [1]], "classes": 2, "samples_per_class": 20},
        "model": {"hidden": [128, 32]},
        "training": {"epochs": 3, "plateau": {"patience": 2}},
        "expansion": {"factors": [2.0], "eps0": 0.005}
    })");
    CHECK(cfg.name == "widths");
    CHECK(cfg.method == "prime");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 11});
    CHECK(cfg.jobs == 2);
    CHECK(cfg.model.hidden == std::vector<std::size_t>{128, 32});
    CHECK(cfg.model.token_dim == 912);  // untouched full-profile value
    CHECK(cfg.training.epochs == 3);
    CHECK(cfg.training.plateau.patience == 2);
    CHECK(cfg.training.plateau.factor == doctest::Approx(0.5));  // nested default survives
    CHECK(cfg.expansion.allowed_factors == std::vector<double>{2.0});
    CHECK(cfg.expansion.eps0 == doctest::Approx(0.005));
}

TEST_CASE("unknown keys at every level are all reported at once") {
    const std::string msg = parse_failure(R"({
        "scenario": {"stages": [[0], [1]], "bogus": 3},
        "training": {"plateau": {"paitence": 2}},
        "typo_section": {}
    })");
    CHECK(msg != "");
    CHECK_MESSAGE(msg.find("scenario.bogus") != std::string::npos, msg);
    CHECK_MESSAGE(msg.find("training.plateau.paitence") != std::string::npos, msg);
    CHECK_MESSAGE(msg.find("typo_section") != std::string::npos, msg);
}

TEST_CASE("type mismatches carry the full key path") {
    const std::string msg = parse_failure(R"({
        "scenario": {"stages": [[0], [1]], "similarity": "high"},
        "training": {"lr": "fast", "epochs": 2.5},
        "plasticity": {"random_layer": 1}
    })");
    CHECK(msg.find("scenario.similarity") != std::string::npos);
    CHECK(msg.find("training.lr") != std::string::npos);
    CHECK(msg.find("training.epochs") != std::string::npos);
    CHECK(msg.find("plasticity.random_layer") != std::string::npos);
}

TEST_CASE("negative values are rejected for unsigned fields") {
    const std::string msg = parse_failure(R"({
        "seeds": [-1],
        "scenario": {"stages": [[0], [1]], "samples_per_class": -5}
    })");
    CHECK(msg.find("seeds") != std::string::npos);
    CHECK(msg.find("samples_per_class") != std::string::npos);
}

TEST_CASE("validation reports every semantic problem in one exception") {
    try {
        parse_run_config(R"({
            "name": "",
            "method": "sgd",
            "seeds": [3, 3],
            "jobs": 0,
            "scenario": {"stages": [[0, 0], [20]], "classes": 4, "similarity": 1.5},
            "model": {"hidden": [], "token_dim": 65, "attn_heads": 2, "dropout": 1.0},
            "training": {"temperature": 0.0, "lr": -1.0},
            "ewc": {"fisher_samples": 0},
            "expansion": {"factors": []}
        })");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const auto& p = e.problems();
        const auto has = [&](const char* needle) {
            for (const auto& s : p)
                if (s.find(needle) != std::string::npos) return true;
            return false;
        };
        CHECK(has("\"name\""));
        CHECK(has("sgd"));
        CHECK(has("seeds"));
        CHECK(has("jobs"));
        CHECK(has("repeats class 0"));
        CHECK(has("references class 20"));
        CHECK(has("similarity"));
        CHECK(has("model.hidden"));
        CHECK(has("attn_heads"));
        CHECK(has("dropout"));
        CHECK(has("temperature"));
        CHECK(has("training.lr"));
        CHECK(has("fisher_samples"));
        CHECK(has("expansion.factors"));
        CHECK(p.size() >= 14);
    }
}

TEST_CASE("malformed json and non-object roots are rejected") {
    CHECK_THROWS_WITH_AS(parse_run_config("{"), Contains("not valid JSON"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config("[1, 2]"), Contains("root"), ConfigError);
}

TEST_CASE("a loaded dataset path skips the synthesizer checks") {
    // classes/similarity only constrain synthetic runs; a file-backed run
    // defers class-range checks to the runner, which sees the real corpus.
    const RunConfig cfg = parse_run_config(R"({
        "scenario": {"dataset": "corpus.bin", "stages": [[0], [99]], "classes": 1}
    })");
    CHECK(cfg.scenario.dataset == "corpus.bin");
    CHECK_THROWS_AS(parse_run_config(R"({
        "scenario": {"stages": [[0], [99]], "classes": 1}
    })"),
                    ConfigError);
}

TEST_CASE("missing config files raise a plain error") {
    CHECK_THROWS_WITH_AS(load_run_config("/nonexistent/run.json"),
                         Contains("cannot open config file"), Error);
}

TEST_CASE("serialization round-trips exactly") {
    RunConfig cfg = valid_config();
    cfg.name = "roundtrip";
    cfg.method = "prime";
    cfg.seeds = {42, 43, 44};
    cfg.jobs = 3;
    cfg.scenario.similarity = 0.8125;
    cfg.scenario.data_seed = 999;
    cfg.model.hidden = {48, 24, 12};
    cfg.model.dropout = 0.125;
    cfg.training.lambda0 = 0.75;
    cfg.training.epochs = 7;
    cfg.training.stall.patience = 3;
    cfg.ewc.lambda = 12.5;
    cfg.plasticity.trigger = 0.9;
    cfg.plasticity.random_layer = true;
    cfg.expansion.allowed_factors = {1.5};

    const std::string text = run_config_json(cfg);
    const RunConfig back = parse_run_config(text);
    CHECK(run_config_json(back) == text);
    CHECK(back.name == cfg.name);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.scenario.similarity == cfg.scenario.similarity);
    CHECK(back.model.hidden == cfg.model.hidden);
    CHECK(back.training.stall.patience == cfg.training.stall.patience);
    CHECK(back.ewc.lambda == cfg.ewc.lambda);
    CHECK(back.plasticity.random_layer == cfg.plasticity.random_layer);
    CHECK(back.expansion.allowed_factors == cfg.expansion.allowed_factors);

    // The serialized form is itself strict-parseable JSON with all sections.
    const auto doc = nlohmann::ordered_json::parse(text);
    for (const char* key : {"name", "profile", "method", "seeds", "jobs", "scenario", "model",
                            "training", "ewc", "plasticity", "expansion"})
        CHECK_MESSAGE(doc.contains(key), key);
}

TEST_CASE("the scenario fingerprint ignores the method and its private knobs") {
    RunConfig a = valid_config();
    a.method = "base";
    RunConfig b = a;
    b.method = "prime";
    b.ewc.lambda = 1e6;
    b.expansion.allowed_factors = {2.0};
    b.plasticity.trigger = 0.5;
    b.training.lambda0 = 3.0;       // distillation weight is method-specific
    b.training.temperature = 5.0;
    b.name = "other-name";
    b.jobs = 8;
    CHECK(scenario_fingerprint(a) == scenario_fingerprint(b));
}

TEST_CASE("the scenario fingerprint tracks the fields that define comparability") {
    const RunConfig base = valid_config();
    const std::string ref = scenario_fingerprint(base);

    RunConfig c = base;
    c.scenario.similarity = 0.61;
    CHECK(scenario_fingerprint(c) != ref);

    c = base;
    c.scenario.stages = {{0, 1, 2}, {3}};
    CHECK(scenario_fingerprint(c) != ref);

    c = base;
    c.model.hidden = {64, 16};
    CHECK(scenario_fingerprint(c) != ref);

    c = base;
    c.training.epochs += 1;
    CHECK(scenario_fingerprint(c) != ref);

    c = base;
    c.seeds = {1, 2, 3, 4, 6};
    CHECK(scenario_fingerprint(c) != ref);

    c = base;
    c.scenario.split.test = 0.14;
    CHECK(scenario_fingerprint(c) != ref);

    // Stable across processes and orderings: a fresh identical struct agrees.
    CHECK(scenario_fingerprint(valid_config()) == ref);
    CHECK(ref.size() == 16);
}

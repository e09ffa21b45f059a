#include "prime/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "prime/errors.hpp"

namespace prime {

namespace {

using Json = nlohmann::ordered_json;

// Collects every problem found while walking the document so the exception
// lists all of them, not just the first.
struct Walker {
    std::vector<std::string> problems;

    void unknown_keys(const Json& obj, const std::string& path,
                      const std::set<std::string>& allowed) {
        for (const auto& item : obj.items())
            if (!allowed.count(item.key()))
                problems.push_back("unknown key \"" + path + item.key() + "\"");
    }

    bool bad(const Json& obj, const char* key) { return !obj.contains(key); }

    template <typename T>
    void num(const Json& obj, const char* key, const std::string& path, T& out) {
        if (bad(obj, key)) return;
        const Json& v = obj.at(key);
        if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                problems.push_back("\"" + path + key + "\" must be a number");
                return;
            }
        } else {
            if (!v.is_number_integer() ||
                (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
                problems.push_back("\"" + path + key + "\" must be " +
                                   (std::is_unsigned_v<T> ? "a non-negative integer"
                                                          : "an integer"));
                return;
            }
        }
        out = v.get<T>();
    }

    void str(const Json& obj, const char* key, const std::string& path, std::string& out) {
        if (bad(obj, key)) return;
        if (!obj.at(key).is_string()) {
            problems.push_back("\"" + path + key + "\" must be a string");
            return;
        }
        out = obj.at(key).get<std::string>();
    }

    void flag(const Json& obj, const char* key, const std::string& path, bool& out) {
        if (bad(obj, key)) return;
        if (!obj.at(key).is_boolean()) {
            problems.push_back("\"" + path + key + "\" must be true or false");
            return;
        }
        out = obj.at(key).get<bool>();
    }

    template <typename T>
    void num_list(const Json& obj, const char* key, const std::string& path,
                  std::vector<T>& out) {
        if (bad(obj, key)) return;
        const Json& v = obj.at(key);
        const bool ints = !std::is_floating_point_v<T>;
        if (!v.is_array()) {
            problems.push_back("\"" + path + key + "\" must be an array");
            return;
        }
        std::vector<T> parsed;
        for (const Json& e : v) {
            if ((ints && !e.is_number_integer()) || (!ints && !e.is_number()) ||
                (std::is_unsigned_v<T> && e.is_number_integer() && e.get<long long>() < 0)) {
                problems.push_back("\"" + path + key + "\" must hold only " +
                                   (ints ? "non-negative integers" : "numbers"));
                return;
            }
            parsed.push_back(e.get<T>());
        }
        out = std::move(parsed);
    }
};

void parse_scenario(Walker& w, const Json& obj, ScenarioSpec& s) {
    const std::string path = "scenario.";
    w.unknown_keys(obj, path,
                   {"dataset", "classes", "similarity", "samples_per_class", "n_b", "n_p",
                    "data_seed", "stages", "split"});
    w.str(obj, "dataset", path, s.dataset);
    w.num(obj, "classes", path, s.classes);
    w.num(obj, "similarity", path, s.similarity);
    w.num(obj, "samples_per_class", path, s.samples_per_class);
    w.num(obj, "n_b", path, s.n_b);
    w.num(obj, "n_p", path, s.n_p);
    w.num(obj, "data_seed", path, s.data_seed);
    if (obj.contains("stages")) {
        const Json& st = obj.at("stages");
        if (!st.is_array()) {
            w.problems.push_back("\"scenario.stages\" must be an array of class-id arrays");
        } else {
            s.stages.clear();
            for (const Json& stage : st) {
                if (!stage.is_array()) {
                    w.problems.push_back("\"scenario.stages\" must be an array of class-id arrays");
                    break;
                }
                std::vector<int> ids;
                for (const Json& id : stage) {
                    if (!id.is_number_integer()) {
                        w.problems.push_back("\"scenario.stages\" must hold only integers");
                        break;
                    }
                    ids.push_back(id.get<int>());
                }
                s.stages.push_back(std::move(ids));
            }
        }
    }
    if (obj.contains("split")) {
        const Json& sp = obj.at("split");
        if (!sp.is_object()) {
            w.problems.push_back("\"scenario.split\" must be an object");
        } else {
            w.unknown_keys(sp, "scenario.split.", {"train", "val", "test"});
            w.num(sp, "train", "scenario.split.", s.split.train);
            w.num(sp, "val", "scenario.split.", s.split.val);
            w.num(sp, "test", "scenario.split.", s.split.test);
        }
    }
}

void parse_model(Walker& w, const Json& obj, ModelSpec& m) {
    const std::string path = "model.";
    w.unknown_keys(obj, path, {"token_dim", "attn_heads", "hidden", "dropout"});
    w.num(obj, "token_dim", path, m.token_dim);
    w.num(obj, "attn_heads", path, m.attn_heads);
    w.num_list(obj, "hidden", path, m.hidden);
    w.num(obj, "dropout", path, m.dropout);
}

void parse_training(Walker& w, const Json& obj, LwfConfig& t) {
    const std::string path = "training.";
    w.unknown_keys(obj, path,
                   {"lambda0", "temperature", "l2", "epochs", "batch_size", "lr", "plateau",
                    "stall"});
    w.num(obj, "lambda0", path, t.lambda0);
    w.num(obj, "temperature", path, t.temperature);
    w.num(obj, "l2", path, t.l2);
    w.num(obj, "epochs", path, t.epochs);
    w.num(obj, "batch_size", path, t.batch_size);
    w.num(obj, "lr", path, t.lr);
    if (obj.contains("plateau")) {
        const Json& p = obj.at("plateau");
        if (!p.is_object()) {
            w.problems.push_back("\"training.plateau\" must be an object");
        } else {
            w.unknown_keys(p, "training.plateau.", {"factor", "patience", "min_delta"});
            w.num(p, "factor", "training.plateau.", t.plateau.factor);
            w.num(p, "patience", "training.plateau.", t.plateau.patience);
            w.num(p, "min_delta", "training.plateau.", t.plateau.min_delta);
        }
    }
    if (obj.contains("stall")) {
        const Json& p = obj.at("stall");
        if (!p.is_object()) {
            w.problems.push_back("\"training.stall\" must be an object");
        } else {
            w.unknown_keys(p, "training.stall.", {"tau", "patience", "min_rel"});
            w.num(p, "tau", "training.stall.", t.stall.tau);
            w.num(p, "patience", "training.stall.", t.stall.patience);
            w.num(p, "min_rel", "training.stall.", t.stall.min_rel);
        }
    }
}

void parse_plasticity(Walker& w, const Json& obj, PlasticityConfig& p) {
    const std::string path = "plasticity.";
    w.unknown_keys(obj, path,
                   {"omega1", "omega2", "trigger", "bins", "alpha", "random_layer", "layer_seed"});
    w.num(obj, "omega1", path, p.omega1);
    w.num(obj, "omega2", path, p.omega2);
    w.num(obj, "trigger", path, p.trigger);
    w.num(obj, "bins", path, p.bins);
    w.num(obj, "alpha", path, p.alpha);
    w.flag(obj, "random_layer", path, p.random_layer);
    w.num(obj, "layer_seed", path, p.layer_seed);
}

void parse_expansion(Walker& w, const Json& obj, ExpansionConfig& e) {
    const std::string path = "expansion.";
    w.unknown_keys(obj, path, {"factors", "safe_threshold", "eps0"});
    w.num_list(obj, "factors", path, e.allowed_factors);
    w.num(obj, "safe_threshold", path, e.safe_threshold);
    w.num(obj, "eps0", path, e.eps0);
}

void parse_ewc(Walker& w, const Json& obj, EwcConfig& e) {
    const std::string path = "ewc.";
    w.unknown_keys(obj, path, {"lambda", "fisher_samples"});
    w.num(obj, "lambda", path, e.lambda);
    w.num(obj, "fisher_samples", path, e.fisher_samples);
}

void collect_validation(const RunConfig& cfg, std::vector<std::string>& problems) {
    if (cfg.name.empty()) problems.push_back("\"name\" must not be empty");
    if (cfg.method != "base" && cfg.method != "lwf" && cfg.method != "ewc" &&
        cfg.method != "prime")
        problems.push_back("\"method\" must be one of base, lwf, ewc, prime (got \"" +
                           cfg.method + "\")");
    if (cfg.seeds.empty()) problems.push_back("\"seeds\" must list at least one seed");
    {
        std::set<std::uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
        if (uniq.size() != cfg.seeds.size()) problems.push_back("\"seeds\" must not repeat");
    }
    if (cfg.jobs == 0) problems.push_back("\"jobs\" must be at least 1");

    const ScenarioSpec& s = cfg.scenario;
    if (s.stages.empty()) problems.push_back("\"scenario.stages\" must list at least one stage");
    std::set<int> seen;
    for (std::size_t i = 0; i < s.stages.size(); ++i) {
        if (s.stages[i].empty())
            problems.push_back("\"scenario.stages\" stage " + std::to_string(i) +
                               " must list at least one class");
        for (int id : s.stages[i]) {
            if (id < 0)
                problems.push_back("\"scenario.stages\" class ids must be non-negative (got " +
                                   std::to_string(id) + ")");
            else if (!seen.insert(id).second)
                problems.push_back("\"scenario.stages\" repeats class " + std::to_string(id));
        }
    }
    if (s.dataset.empty()) {
        if (s.classes == 0) problems.push_back("\"scenario.classes\" must be at least 1");
        if (!(s.similarity >= 0.0 && s.similarity <= 1.0))
            problems.push_back("\"scenario.similarity\" must lie in [0, 1]");
        if (s.samples_per_class == 0)
            problems.push_back("\"scenario.samples_per_class\" must be at least 1");
        if (s.n_b == 0 && s.n_p == 0)
            problems.push_back("\"scenario.n_b\" and \"scenario.n_p\" cannot both be 0");
        for (int id : seen)
            if (id >= static_cast<int>(s.classes))
                problems.push_back("\"scenario.stages\" references class " + std::to_string(id) +
                                   " but only " + std::to_string(s.classes) +
                                   " classes are synthesized");
    }
    const SplitFractions& sp = s.split;
    if (!(sp.train > 0.0) || !(sp.val >= 0.0) || !(sp.test > 0.0) ||
        sp.train + sp.val + sp.test > 1.0 + 1e-9)
        problems.push_back(
            "\"scenario.split\" needs train > 0, val >= 0, test > 0, summing to at most 1");

    const ModelSpec& m = cfg.model;
    if (m.hidden.empty()) problems.push_back("\"model.hidden\" must list at least one layer");
    for (std::size_t d : m.hidden)
        if (d == 0) problems.push_back("\"model.hidden\" widths must be positive");
    if (m.token_dim == 0) problems.push_back("\"model.token_dim\" must be positive");
    if (m.attn_heads == 0 || m.token_dim % std::max<std::size_t>(m.attn_heads, 1) != 0)
        problems.push_back("\"model.attn_heads\" must be positive and divide token_dim");
    if (!(m.dropout >= 0.0 && m.dropout < 1.0))
        problems.push_back("\"model.dropout\" must lie in [0, 1)");

    const LwfConfig& t = cfg.training;
    if (t.lambda0 < 0.0) problems.push_back("\"training.lambda0\" must be non-negative");
    if (!(t.temperature > 0.0)) problems.push_back("\"training.temperature\" must be positive");
    if (t.l2 < 0.0) problems.push_back("\"training.l2\" must be non-negative");
    if (t.epochs < 1) problems.push_back("\"training.epochs\" must be at least 1");
    if (t.batch_size < 1) problems.push_back("\"training.batch_size\" must be at least 1");
    if (!(t.lr > 0.0)) problems.push_back("\"training.lr\" must be positive");
    if (cfg.ewc.lambda < 0.0) problems.push_back("\"ewc.lambda\" must be non-negative");
    if (cfg.ewc.fisher_samples == 0)
        problems.push_back("\"ewc.fisher_samples\" must be at least 1");
    if (cfg.expansion.allowed_factors.empty())
        problems.push_back("\"expansion.factors\" must list at least one factor");
}

Json split_json(const SplitFractions& s) {
    Json j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j;
}

}  // namespace

RunConfig run_config_defaults(const std::string& profile) {
    RunConfig cfg;
    cfg.profile = profile;
    if (profile == "desk") return cfg;  // struct defaults are the desk profile
    if (profile == "full") {
        cfg.scenario.n_b = 784;
        cfg.scenario.n_p = 32;  // 784 + 4*32 = 912-wide features
        cfg.model.token_dim = 912;
        cfg.model.attn_heads = 2;
        cfg.model.hidden = {256, 64};
        cfg.training.epochs = 30;
        cfg.training.batch_size = 512;
        return cfg;
    }
    throw ConfigError({"\"profile\" must be desk or full (got \"" + profile + "\")"});
}

RunConfig parse_run_config(const std::string& json_text) {
    Json doc;
    try {
        doc = Json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw ConfigError({"config root must be a JSON object"});

    std::string profile = "desk";
    if (doc.contains("profile")) {
        if (!doc.at("profile").is_string())
            throw ConfigError({"\"profile\" must be a string"});
        profile = doc.at("profile").get<std::string>();
    }
    RunConfig cfg = run_config_defaults(profile);

    Walker w;
    w.unknown_keys(doc, "",
                   {"name", "profile", "method", "seeds", "jobs", "scenario", "model", "training",
                    "ewc", "plasticity", "expansion"});
    w.str(doc, "name", "", cfg.name);
    w.str(doc, "method", "", cfg.method);
    w.num_list(doc, "seeds", "", cfg.seeds);
    w.num(doc, "jobs", "", cfg.jobs);
    const auto section = [&](const char* key, auto&& parse, auto& into) {
        if (!doc.contains(key)) return;
        if (!doc.at(key).is_object()) {
            w.problems.push_back("\"" + std::string(key) + "\" must be an object");
            return;
        }
        parse(w, doc.at(key), into);
    };
    section("scenario", parse_scenario, cfg.scenario);
    section("model", parse_model, cfg.model);
    section("training", parse_training, cfg.training);
    section("ewc", parse_ewc, cfg.ewc);
    section("plasticity", parse_plasticity, cfg.plasticity);
    section("expansion", parse_expansion, cfg.expansion);

    collect_validation(cfg, w.problems);
    if (!w.problems.empty()) throw ConfigError(std::move(w.problems));
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

void validate_run_config(const RunConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.profile != "desk" && cfg.profile != "full")
        problems.push_back("\"profile\" must be desk or full (got \"" + cfg.profile + "\")");
    collect_validation(cfg, problems);
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string run_config_json(const RunConfig& cfg) {
    Json doc;
    doc["name"] = cfg.name;
    doc["profile"] = cfg.profile;
    doc["method"] = cfg.method;
    doc["seeds"] = cfg.seeds;
    doc["jobs"] = cfg.jobs;
    Json& s = doc["scenario"];
    s["dataset"] = cfg.scenario.dataset;
    s["classes"] = cfg.scenario.classes;
    s["similarity"] = cfg.scenario.similarity;
    s["samples_per_class"] = cfg.scenario.samples_per_class;
    s["n_b"] = cfg.scenario.n_b;
    s["n_p"] = cfg.scenario.n_p;
    s["data_seed"] = cfg.scenario.data_seed;
    s["stages"] = cfg.scenario.stages;
    s["split"] = split_json(cfg.scenario.split);
    Json& m = doc["model"];
    m["token_dim"] = cfg.model.token_dim;
    m["attn_heads"] = cfg.model.attn_heads;
    m["hidden"] = cfg.model.hidden;
    m["dropout"] = cfg.model.dropout;
    Json& t = doc["training"];
    t["lambda0"] = cfg.training.lambda0;
    t["temperature"] = cfg.training.temperature;
    t["l2"] = cfg.training.l2;
    t["epochs"] = cfg.training.epochs;
    t["batch_size"] = cfg.training.batch_size;
    t["lr"] = cfg.training.lr;
    t["plateau"] = {{"factor", cfg.training.plateau.factor},
                    {"patience", cfg.training.plateau.patience},
                    {"min_delta", cfg.training.plateau.min_delta}};
    t["stall"] = {{"tau", cfg.training.stall.tau},
                  {"patience", cfg.training.stall.patience},
                  {"min_rel", cfg.training.stall.min_rel}};
    Json& e = doc["ewc"];
    e["lambda"] = cfg.ewc.lambda;
    e["fisher_samples"] = cfg.ewc.fisher_samples;
    Json& p = doc["plasticity"];
    p["omega1"] = cfg.plasticity.omega1;
    p["omega2"] = cfg.plasticity.omega2;
    p["trigger"] = cfg.plasticity.trigger;
    p["bins"] = cfg.plasticity.bins;
    p["alpha"] = cfg.plasticity.alpha;
    p["random_layer"] = cfg.plasticity.random_layer;
    p["layer_seed"] = cfg.plasticity.layer_seed;
    Json& x = doc["expansion"];
    x["factors"] = cfg.expansion.allowed_factors;
    x["safe_threshold"] = cfg.expansion.safe_threshold;
    x["eps0"] = cfg.expansion.eps0;
    return doc.dump(2);
}

std::string scenario_fingerprint(const RunConfig& cfg) {
    Json key;
    key["dataset"] = cfg.scenario.dataset;
    key["classes"] = cfg.scenario.classes;
    key["similarity"] = cfg.scenario.similarity;
    key["samples_per_class"] = cfg.scenario.samples_per_class;
    key["n_b"] = cfg.scenario.n_b;
    key["n_p"] = cfg.scenario.n_p;
    key["data_seed"] = cfg.scenario.data_seed;
    key["stages"] = cfg.scenario.stages;
    key["split"] = split_json(cfg.scenario.split);
    key["token_dim"] = cfg.model.token_dim;
    key["attn_heads"] = cfg.model.attn_heads;
    key["hidden"] = cfg.model.hidden;
    key["dropout"] = cfg.model.dropout;
    key["epochs"] = cfg.training.epochs;
    key["batch_size"] = cfg.training.batch_size;
    key["lr"] = cfg.training.lr;
    key["l2"] = cfg.training.l2;
    key["seeds"] = cfg.seeds;
    const std::string canon = key.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace prime

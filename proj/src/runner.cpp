#include "prime/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "prime/checkpoint.hpp"
#include "prime/dataset.hpp"
#include "prime/errors.hpp"
#include "prime/incremental.hpp"
#include "prime/losses.hpp"
#include "prime/model.hpp"
#include "prime/rng.hpp"
#include "prime/synth.hpp"

namespace fs = std::filesystem;

namespace prime {

namespace {

using Json = nlohmann::ordered_json;

Dataset build_scenario_dataset(const ScenarioSpec& s) {
    if (!s.dataset.empty()) return load_dataset(s.dataset);
    const std::vector<ClassProfile> profiles = make_profiles(s.classes, s.similarity, s.data_seed);
    return sample_dataset(profiles, s.samples_per_class, s.n_b, s.n_p, s.data_seed);
}

// The stage plan can only be checked against the actual corpus, so this
// runs after the dataset is built but before any directory is created.
void check_stage_plan(const RunConfig& cfg, const Dataset& ds) {
    std::vector<std::string> problems;
    std::map<int, std::size_t> counts;
    for (const FeatureVector& f : ds.samples) ++counts[f.label];
    for (std::size_t i = 0; i < cfg.scenario.stages.size(); ++i) {
        for (int id : cfg.scenario.stages[i]) {
            if (id < 0 || static_cast<std::size_t>(id) >= ds.class_names.size())
                problems.push_back("stage " + std::to_string(i) + " references class " +
                                   std::to_string(id) + " but the dataset defines only " +
                                   std::to_string(ds.class_names.size()) + " classes");
            else if (counts[id] == 0)
                problems.push_back("stage " + std::to_string(i) + " class " + std::to_string(id) +
                                   " (" + ds.class_names[id] + ") has no samples");
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::vector<int> local_labels(const std::vector<int>& class_ids, const std::vector<int>& global) {
    std::map<int, int> to_local;
    for (std::size_t c = 0; c < class_ids.size(); ++c) to_local[class_ids[c]] = static_cast<int>(c);
    std::vector<int> out;
    out.reserve(global.size());
    for (int g : global) {
        const auto it = to_local.find(g);
        if (it == to_local.end())
            throw Error("test sample labeled " + std::to_string(g) + " is outside its stage");
        out.push_back(it->second);
    }
    return out;
}

Json metrics_fields(const Metrics& m) {
    Json j;
    j["aa"] = m.aa;
    j["bwt"] = m.bwt;
    j["fwt"] = m.fwt;
    j["fa"] = m.fa;
    return j;
}

Json stat_fields(const MetricStat& s) {
    Json j;
    j["mean"] = s.mean;
    j["half_range"] = s.half_range;
    return j;
}

class EventLog {
public:
    explicit EventLog(const std::string& path) : out_(path) {
        if (!out_) throw Error("cannot open event log for writing: " + path);
    }

    void emit(Json j) { out_ << j.dump() << "\n"; }

    void epochs(const char* phase, std::size_t stage, const TrainLog& log) {
        for (const EpochRecord& rec : log.epochs) {
            Json j;
            j["event"] = "epoch";
            j["stage"] = stage;
            j["phase"] = phase;
            j["epoch"] = rec.epoch;
            j["ce"] = rec.ce;
            j["distill"] = rec.distill;
            j["penalty"] = rec.penalty;
            j["l2"] = rec.l2;
            j["total"] = rec.total;
            j["val_ce"] = rec.val_ce;
            j["val_accuracy"] = rec.val_accuracy;
            j["lr"] = rec.lr;
            emit(std::move(j));
        }
    }

private:
    std::ofstream out_;
};

struct SeedContext {
    const RunConfig& cfg;
    const Dataset& ds;
    std::uint64_t seed;
    std::string dir;  // absolute seed directory
};

SeedRun run_one_seed(const SeedContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    fs::create_directories(ctx.dir);
    EventLog events(ctx.dir + "/events.jsonl");

    const TaskStream stream =
        stage_stream(ctx.ds, cfg.scenario.stages, cfg.scenario.split, ctx.seed);
    const std::size_t stages = stream.stages.size();

    Model m = build_model(stream.width, cfg.model.token_dim, cfg.model.attn_heads,
                          cfg.model.hidden, cfg.model.dropout, derive_seed(ctx.seed, {0}));
    {
        Json j;
        j["event"] = "run_start";
        j["seed"] = ctx.seed;
        j["method"] = cfg.method;
        j["stages"] = stages;
        j["width"] = stream.width;
        j["params"] = param_count(m);
        events.emit(std::move(j));
    }

    // Per-task test batches with head-local labels.
    std::vector<Tensor> test_x(stages);
    std::vector<std::vector<int>> test_y(stages);
    for (std::size_t t = 0; t < stages; ++t) {
        Batch b = to_batch(stream.stages[t].test, stream.width);
        test_y[t] = local_labels(stream.stages[t].class_ids, b.y);
        test_x[t] = std::move(b.x);
    }

    AccuracyMatrix matrix(stages);
    const auto probe_accuracy = [&](const Model& snapshot, std::size_t task_1based,
                                    std::uint64_t head_seed) {
        Model probe = snapshot;
        const std::size_t h =
            add_head(probe, stream.stages[task_1based - 1].class_ids, head_seed);
        return head_accuracy(probe, h, test_x[task_1based - 1], test_y[task_1based - 1]);
    };

    // Row 0: the untrained model with a fresh head per task.
    for (std::size_t j = 1; j <= stages; ++j) {
        const double acc = probe_accuracy(m, j, derive_seed(ctx.seed, {800, j}));
        matrix.record(0, j, acc);
        Json e;
        e["event"] = "probe";
        e["stage"] = 0;
        e["task"] = j;
        e["accuracy"] = acc;
        events.emit(std::move(e));
    }

    SeedRun result;
    result.seed = ctx.seed;
    result.dir = fs::path(ctx.dir).filename().string();

    for (std::size_t i = 1; i <= stages; ++i) {
        const StageData& stage = stream.stages[i - 1];
        {
            Json e;
            e["event"] = "stage_start";
            e["stage"] = i;
            e["classes"] = stage.class_ids;
            events.emit(std::move(e));
        }
        // Forward-transfer probe before the stage trains its task.
        if (i >= 2) {
            const double acc = probe_accuracy(m, i, derive_seed(ctx.seed, {900, i}));
            matrix.record(i - 1, i, acc);
            Json e;
            e["event"] = "probe";
            e["stage"] = i - 1;
            e["task"] = i;
            e["accuracy"] = acc;
            events.emit(std::move(e));
        }

        const TaskData task = make_task_data(stage, stream.width);
        LwfConfig stage_cfg = cfg.training;
        stage_cfg.seed = derive_seed(ctx.seed, {i});

        std::string path;  // controller outcome, when applicable
        if (i == 1) {
            const TrainLog log = base_train_task(m, task, stage_cfg, true);
            events.epochs("base", i, log);
        } else if (cfg.method == "base") {
            const TrainLog log = base_train_task(m, task, stage_cfg, false);
            events.epochs("task", i, log);
        } else if (cfg.method == "lwf") {
            const TrainLog log = lwf_train_task(m, task, stage_cfg);
            events.epochs("task", i, log);
        } else if (cfg.method == "ewc") {
            const TrainLog log = ewc_train_task(m, task, stage_cfg, cfg.ewc);
            events.epochs("task", i, log);
        } else {
            PrimeConfig pc;
            pc.lwf = stage_cfg;
            pc.plasticity = cfg.plasticity;
            pc.expansion = cfg.expansion;
            const StageReport report = prime_controller(m, task, pc);
            path = report.path;
            events.epochs("task", i, report.step_a);
            if (report.stalled) {
                Json e;
                e["event"] = "stall";
                e["stage"] = i;
                e["epoch"] = report.stall_epoch;
                events.emit(std::move(e));
            }
            for (const PlasticityReport& p : report.plasticity) {
                Json e;
                e["event"] = "plasticity";
                e["stage"] = i;
                e["layer"] = p.layer;
                e["pr1"] = p.pr1;
                e["pr2"] = p.pr2;
                e["indicator"] = p.indicator;
                e["limited"] = p.limited;
                e["effective_rank"] = p.effective_rank;
                e["n"] = p.n;
                events.emit(std::move(e));
            }
            for (const ExpansionRecord& x : report.expansions) {
                Json e;
                e["event"] = "expansion";
                e["stage"] = i;
                e["layer"] = x.layer;
                e["old_width"] = x.old_width;
                e["new_width"] = x.new_width;
                e["factor"] = x.factor;
                e["eps0"] = x.eps0;
                events.emit(std::move(e));
            }
            if (!report.expansions.empty()) ++result.expansions;
            events.epochs("expanded", i, report.step_d);
        }

        // Retrospective evaluation of everything trained so far.
        for (std::size_t j = 1; j <= i; ++j) {
            const double acc = head_accuracy(m, j - 1, test_x[j - 1], test_y[j - 1]);
            matrix.record(i, j, acc);
            Json e;
            e["event"] = "eval";
            e["stage"] = i;
            e["task"] = j;
            e["accuracy"] = acc;
            events.emit(std::move(e));
        }
        if (i == 1) result.params_before = param_count(m);
        {
            Json e;
            e["event"] = "stage_end";
            e["stage"] = i;
            if (!path.empty()) e["path"] = path;
            e["params"] = param_count(m);
            events.emit(std::move(e));
        }
    }

    result.params_after = param_count(m);
    result.metrics = compute(matrix);
    {
        Json e;
        e["event"] = "run_end";
        e["params_before"] = result.params_before;
        e["params_after"] = result.params_after;
        e["expansions"] = result.expansions;
        e["metrics"] = metrics_fields(result.metrics);
        events.emit(std::move(e));
    }

    const auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(ctx.dir + "/" + name);
        if (!out) throw Error("cannot write " + ctx.dir + "/" + name);
        out << text;
    };
    write("matrix.csv", matrix_csv(matrix));
    write("matrix.json", matrix_json(matrix));
    write("metrics.json", metrics_json(result.metrics));
    write("polar.json", polar_json(matrix));
    save_checkpoint(ctx.dir + "/model.ckpt", m);
    return result;
}

Json aggregate_json(const RunConfig& cfg, const std::string& fingerprint,
                    const std::vector<SeedRun>& runs, const MetricsSummary& summary) {
    Json doc;
    doc["format_version"] = 1;
    doc["name"] = cfg.name;
    doc["method"] = cfg.method;
    doc["fingerprint"] = fingerprint;
    auto& list = doc["seeds"] = Json::array();
    for (const SeedRun& r : runs) {
        Json j;
        j["seed"] = r.seed;
        j["dir"] = r.dir;
        j["metrics"] = metrics_fields(r.metrics);
        j["params_before"] = r.params_before;
        j["params_after"] = r.params_after;
        j["expansions"] = r.expansions;
        list.push_back(std::move(j));
    }
    Json& s = doc["summary"];
    s["aa"] = stat_fields(summary.aa);
    s["bwt"] = stat_fields(summary.bwt);
    s["fwt"] = stat_fields(summary.fwt);
    s["fa"] = stat_fields(summary.fa);
    return doc;
}

std::string aggregate_csv(const std::vector<SeedRun>& runs, const MetricsSummary& summary) {
    const auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string out =
        "seed,aa,bwt,fwt,fa,params_before,params_after,expansions\n";
    for (const SeedRun& r : runs) {
        out += std::to_string(r.seed) + "," + fmt(r.metrics.aa) + "," + fmt(r.metrics.bwt) + "," +
               fmt(r.metrics.fwt) + "," + fmt(r.metrics.fa) + "," +
               std::to_string(r.params_before) + "," + std::to_string(r.params_after) + "," +
               std::to_string(r.expansions) + "\n";
    }
    out += "mean," + fmt(summary.aa.mean) + "," + fmt(summary.bwt.mean) + "," +
           fmt(summary.fwt.mean) + "," + fmt(summary.fa.mean) + ",,,\n";
    out += "half_range," + fmt(summary.aa.half_range) + "," + fmt(summary.bwt.half_range) + "," +
           fmt(summary.fwt.half_range) + "," + fmt(summary.fa.half_range) + ",,,\n";
    return out;
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& cfg, const std::string& out_root) {
    validate_run_config(cfg);
    const Dataset ds = build_scenario_dataset(cfg.scenario);
    check_stage_plan(cfg, ds);

    const fs::path run_dir = fs::path(out_root) / (cfg.name + "-" + cfg.method);
    if (fs::exists(run_dir))
        throw Error("run directory already exists: " + run_dir.string());
    fs::create_directories(run_dir);
    {
        std::ofstream out(run_dir / "config.json");
        if (!out) throw Error("cannot write " + (run_dir / "config.json").string());
        out << run_config_json(cfg) << "\n";
    }

    std::vector<SeedRun> runs(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    const auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= cfg.seeds.size()) return;
            try {
                SeedContext ctx{cfg, ds, cfg.seeds[k],
                                (run_dir / ("seed-" + std::to_string(cfg.seeds[k]))).string()};
                runs[k] = run_one_seed(ctx);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(cfg.jobs, cfg.seeds.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    ScenarioResult result;
    result.dir = run_dir.string();
    result.fingerprint = scenario_fingerprint(cfg);
    result.runs = std::move(runs);
    std::vector<Metrics> per_seed;
    for (const SeedRun& r : result.runs) per_seed.push_back(r.metrics);
    result.summary = aggregate(per_seed);

    {
        std::ofstream out(run_dir / "aggregate.json");
        if (!out) throw Error("cannot write " + (run_dir / "aggregate.json").string());
        out << aggregate_json(cfg, result.fingerprint, result.runs, result.summary).dump(2)
            << "\n";
    }
    {
        std::ofstream out(run_dir / "aggregate.csv");
        if (!out) throw Error("cannot write " + (run_dir / "aggregate.csv").string());
        out << aggregate_csv(result.runs, result.summary);
    }
    return result;
}

namespace {

Json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(path.string() + " is not valid JSON: " + e.what());
    }
}

Metrics metrics_from(const Json& j) {
    Metrics m;
    m.aa = j.at("aa").get<double>();
    m.bwt = j.at("bwt").get<double>();
    m.fwt = j.at("fwt").get<double>();
    m.fa = j.at("fa").get<double>();
    return m;
}

bool stat_matches(const MetricStat& a, const Json& b) {
    return std::abs(a.mean - b.at("mean").get<double>()) <= 1e-12 &&
           std::abs(a.half_range - b.at("half_range").get<double>()) <= 1e-12;
}

}  // namespace

Comparison compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw ConfigError({"compare needs at least one run directory"});
    Comparison cmp;
    for (const std::string& dir : run_dirs) {
        const RunConfig cfg = load_run_config((fs::path(dir) / "config.json").string());
        const std::string derived = scenario_fingerprint(cfg);
        const Json agg = read_json_file(fs::path(dir) / "aggregate.json");
        const std::string stored = agg.at("fingerprint").get<std::string>();
        if (stored != derived)
            throw Error(dir + ": stored fingerprint " + stored +
                        " does not match the one derived from config.json (" + derived + ")");
        if (cmp.rows.empty()) {
            cmp.fingerprint = derived;
        } else if (cmp.fingerprint != derived) {
            throw Error(dir + ": scenario fingerprint " + derived +
                        " differs from " + cmp.rows.front().dir + " (" + cmp.fingerprint +
                        "); runs are not comparable");
        }

        ComparisonRow row;
        row.method = agg.at("method").get<std::string>();
        row.name = agg.at("name").get<std::string>();
        row.dir = dir;
        std::vector<Metrics> per_seed;
        for (const Json& s : agg.at("seeds")) {
            per_seed.push_back(metrics_from(s.at("metrics")));
            row.params_before = s.at("params_before").get<std::size_t>();
            row.params_after_mean += s.at("params_after").get<double>();
            row.expansions_mean += s.at("expansions").get<double>();
        }
        row.seeds = per_seed.size();
        if (per_seed.empty()) throw Error(dir + ": aggregate lists no seeds");
        row.params_after_mean /= static_cast<double>(per_seed.size());
        row.expansions_mean /= static_cast<double>(per_seed.size());
        row.metrics = aggregate(per_seed);
        const Json& stored_summary = agg.at("summary");
        if (!stat_matches(row.metrics.aa, stored_summary.at("aa")) ||
            !stat_matches(row.metrics.bwt, stored_summary.at("bwt")) ||
            !stat_matches(row.metrics.fwt, stored_summary.at("fwt")) ||
            !stat_matches(row.metrics.fa, stored_summary.at("fa")))
            throw Error(dir + ": stored summary does not match one recomputed from its per-seed metrics");
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

namespace {

std::string stat_cell(const MetricStat& s) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", s.mean, s.half_range);
    return buf;
}

}  // namespace

std::string comparison_text(const Comparison& c) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"method", "seeds", "AA", "BWT", "FWT", "FA", "params", "expansions"});
    for (const ComparisonRow& r : c.rows) {
        char params[64], exp[16];
        std::snprintf(params, sizeof(params), "%zu -> %.0f", r.params_before,
                      r.params_after_mean);
        std::snprintf(exp, sizeof(exp), "%.1f", r.expansions_mean);
        grid.push_back({r.method, std::to_string(r.seeds), stat_cell(r.metrics.aa),
                        stat_cell(r.metrics.bwt), stat_cell(r.metrics.fwt),
                        stat_cell(r.metrics.fa), params, exp});
    }
    // Terminal columns, not bytes: the two-byte "±" occupies one cell.
    const auto cells = [](const std::string& s) {
        return s.size() - static_cast<std::size_t>(
                              std::count(s.begin(), s.end(), '\xc2'));
    };
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& row : grid)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], cells(row[i]));
    std::string out = "scenario fingerprint " + c.fingerprint + "\n";
    for (const auto& row : grid) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            if (i + 1 < row.size()) out += std::string(width[i] - cells(row[i]) + 2, ' ');
        }
        out += "\n";
    }
    return out;
}

std::string comparison_csv(const Comparison& c) {
    const auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string out =
        "method,seeds,aa_mean,aa_half,bwt_mean,bwt_half,fwt_mean,fwt_half,fa_mean,fa_half,"
        "params_before,params_after_mean,expansions_mean\n";
    for (const ComparisonRow& r : c.rows) {
        out += r.method + "," + std::to_string(r.seeds) + "," + fmt(r.metrics.aa.mean) + "," +
               fmt(r.metrics.aa.half_range) + "," + fmt(r.metrics.bwt.mean) + "," +
               fmt(r.metrics.bwt.half_range) + "," + fmt(r.metrics.fwt.mean) + "," +
               fmt(r.metrics.fwt.half_range) + "," + fmt(r.metrics.fa.mean) + "," +
               fmt(r.metrics.fa.half_range) + "," + std::to_string(r.params_before) + "," +
               fmt(r.params_after_mean) + "," + fmt(r.expansions_mean) + "\n";
    }
    return out;
}

}  // namespace prime

// Command-line front end: synthesize or ingest datasets, run scenarios,
// compare finished runs, and inspect any artifact the pipeline writes.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prime/checkpoint.hpp"
#include "prime/config.hpp"
#include "prime/dataset.hpp"
#include "prime/errors.hpp"
#include "prime/ingest.hpp"
#include "prime/model.hpp"
#include "prime/runner.hpp"
#include "prime/synth.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void log_line(const Json& j) { std::cout << j.dump() << "\n"; }

int cmd_gen(const std::string& out, std::size_t classes, double similarity,
            std::size_t samples_per_class, std::size_t n_b, std::size_t n_p,
            std::uint64_t seed, const std::string& csv) {
    const auto profiles = prime::make_profiles(classes, similarity, seed);
    const prime::Dataset ds = prime::sample_dataset(profiles, samples_per_class, n_b, n_p, seed);
    prime::save_dataset(out, ds);
    if (!csv.empty()) prime::export_dataset_csv(csv, ds);
    Json j;
    j["event"] = "gen";
    j["out"] = out;
    j["classes"] = ds.class_names.size();
    j["samples"] = ds.samples.size();
    j["width"] = ds.width();
    log_line(j);
    return 0;
}

// Directories expand to their .pcap files (sorted); plain paths pass through.
std::vector<std::string> expand_captures(const std::vector<std::string>& inputs) {
    std::vector<std::string> paths;
    for (const std::string& input : inputs) {
        if (fs::is_directory(input)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::directory_iterator(input))
                if (entry.is_regular_file() && entry.path().extension() == ".pcap")
                    found.push_back(entry.path().string());
            std::sort(found.begin(), found.end());
            if (found.empty())
                throw prime::Error("no .pcap files in directory: " + input);
            paths.insert(paths.end(), found.begin(), found.end());
        } else {
            paths.push_back(input);
        }
    }
    return paths;
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& manifest_path,
               const std::string& out, std::size_t n_b, std::size_t n_p, double idle_timeout) {
    // A single non-pcap input is an already-built dataset: normalize through
    // a load/save round trip instead of re-parsing packets.
    if (inputs.size() == 1 && !fs::is_directory(inputs[0]) &&
        fs::path(inputs[0]).extension() != ".pcap") {
        const prime::Dataset ds = prime::load_dataset(inputs[0]);
        prime::save_dataset(out, ds);
        Json j;
        j["event"] = "ingest";
        j["out"] = out;
        j["samples"] = ds.samples.size();
        j["classes"] = ds.class_names.size();
        log_line(j);
        return 0;
    }

    if (manifest_path.empty())
        throw prime::Error("ingesting captures needs --manifest");
    const prime::LabelManifest manifest = prime::load_manifest(manifest_path);
    prime::IngestOptions opt;
    opt.n_b = n_b;
    opt.n_p = n_p;
    opt.idle_timeout = idle_timeout;
    const prime::IngestResult r =
        prime::ingest_pcaps(expand_captures(inputs), manifest, opt);
    prime::save_dataset(out, r.dataset);
    Json j;
    j["event"] = "ingest";
    j["out"] = out;
    j["flows_seen"] = r.stats.flows_seen;
    j["labeled"] = r.stats.labeled;
    j["unlabeled"] = r.stats.unlabeled;
    j["packets"] = r.stats.pcap.packets;
    j["non_ip"] = r.stats.pcap.non_ip;
    j["non_transport"] = r.stats.pcap.non_transport;
    j["classes"] = r.dataset.class_names;
    log_line(j);
    if (r.stats.labeled == 0)
        std::cerr << "warning: the manifest labeled no flows; the dataset is empty\n";
    return 0;
}

int cmd_run(const std::string& config_path, std::string out_root, const std::string& method,
            const std::string& name, const std::vector<std::uint64_t>& seeds, int jobs) {
    prime::RunConfig cfg = prime::load_run_config(config_path);
    if (!method.empty()) cfg.method = method;
    if (!name.empty()) cfg.name = name;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (jobs > 0) cfg.jobs = static_cast<std::size_t>(jobs);
    if (out_root.empty()) {
        const char* env = std::getenv("PRIME_OUT_ROOT");
        out_root = env && *env ? env : ".";
    }

    const prime::ScenarioResult result = prime::run_scenario(cfg, out_root);
    for (const prime::SeedRun& r : result.runs) {
        Json j;
        j["event"] = "seed_complete";
        j["seed"] = r.seed;
        j["aa"] = r.metrics.aa;
        j["bwt"] = r.metrics.bwt;
        j["fwt"] = r.metrics.fwt;
        j["fa"] = r.metrics.fa;
        j["params_after"] = r.params_after;
        j["expansions"] = r.expansions;
        log_line(j);
    }
    Json j;
    j["event"] = "run_complete";
    j["dir"] = result.dir;
    j["fingerprint"] = result.fingerprint;
    j["method"] = cfg.method;
    j["seeds"] = result.runs.size();
    j["aa_mean"] = result.summary.aa.mean;
    j["bwt_mean"] = result.summary.bwt.mean;
    log_line(j);
    return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& csv) {
    const prime::Comparison cmp = prime::compare_runs(dirs);
    std::cout << prime::comparison_text(cmp);
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw prime::Error("cannot write " + csv);
        out << prime::comparison_csv(cmp);
    }
    return 0;
}

void inspect_checkpoint(const std::string& path) {
    const prime::Checkpoint ckpt = prime::load_checkpoint(path);
    const prime::Model& m = ckpt.model;
    std::cout << "checkpoint " << path << "\n"
              << "  input width   " << m.input_width << "\n"
              << "  token dim     " << m.encoder.token_dim << "\n"
              << "  hidden stack ";
    for (const auto& layer : m.hidden) std::cout << " " << layer.out_dim();
    std::cout << "\n  dropout       " << m.dropout_rate << "\n"
              << "  parameters    " << prime::param_count(m) << "\n"
              << "  heads         " << m.heads.size() << "\n";
    for (std::size_t h = 0; h < m.heads.size(); ++h) {
        std::cout << "    head " << h << " classes";
        for (int c : m.heads[h].class_ids) std::cout << " " << c;
        std::cout << "\n";
    }
    std::cout << "  expansions    " << m.expansions.size() << "\n";
    for (const auto& e : m.expansions)
        std::cout << "    layer " << e.layer << ": " << e.old_width << " -> " << e.new_width
                  << " (factor " << e.factor << ", eps0 " << e.eps0 << ")\n";
    std::cout << "  optimizer     " << (ckpt.optimizer ? "present" : "absent") << "\n";
}

void inspect_dataset(const std::string& path) {
    const prime::Dataset ds = prime::load_dataset(path);
    std::cout << "dataset " << path << "\n"
              << "  n_b           " << ds.n_b << "\n"
              << "  n_p           " << ds.n_p << "\n"
              << "  width         " << ds.width() << "\n"
              << "  samples       " << ds.samples.size() << "\n"
              << "  normalizers   payload/" << ds.norms.payload_len_div << " window/"
              << ds.norms.window_div << " iat clamp " << ds.norms.iat_clamp_s << "s\n"
              << "  classes       " << ds.class_names.size() << "\n";
    std::map<int, std::size_t> counts;
    for (const auto& s : ds.samples) ++counts[s.label];
    for (std::size_t i = 0; i < ds.class_names.size(); ++i)
        std::cout << "    " << i << " " << ds.class_names[i] << " ("
                  << counts[static_cast<int>(i)] << " samples)\n";
}

void inspect_run_dir(const fs::path& dir) {
    std::ifstream in(dir / "aggregate.json");
    if (!in) throw prime::Error("no aggregate.json in " + dir.string());
    Json agg = Json::parse(in);
    std::cout << "run " << dir.string() << "\n"
              << "  name          " << agg.at("name").get<std::string>() << "\n"
              << "  method        " << agg.at("method").get<std::string>() << "\n"
              << "  fingerprint   " << agg.at("fingerprint").get<std::string>() << "\n"
              << "  seeds         " << agg.at("seeds").size() << "\n";
    const Json& s = agg.at("summary");
    const auto stat = [&](const char* key) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", s.at(key).at("mean").get<double>(),
                      s.at(key).at("half_range").get<double>());
        return std::string(buf);
    };
    std::cout << "  AA            " << stat("aa") << "\n"
              << "  BWT           " << stat("bwt") << "\n"
              << "  FWT           " << stat("fwt") << "\n"
              << "  FA            " << stat("fa") << "\n";
}

int cmd_inspect(const std::string& path) {
    if (fs::is_directory(path)) {
        inspect_run_dir(path);
        return 0;
    }
    try {
        inspect_checkpoint(path);
        return 0;
    } catch (const prime::Error&) {
    }
    inspect_dataset(path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"incremental traffic-classification pipeline"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "synthesize a labeled dataset");
    std::string gen_out, gen_csv;
    std::size_t gen_classes = 14, gen_samples = 160, gen_nb = 192, gen_np = 16;
    double gen_similarity = 0.6;
    std::uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "dataset file to write")->required();
    gen->add_option("--classes", gen_classes, "number of traffic classes");
    gen->add_option("--similarity", gen_similarity, "inter-class similarity in [0,1]");
    gen->add_option("--samples-per-class", gen_samples, "flows per class");
    gen->add_option("--n-b", gen_nb, "payload bytes per sample");
    gen->add_option("--n-p", gen_np, "header-feature packets per sample");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--csv", gen_csv, "also export an inspection CSV");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "label captures into a dataset");
    std::vector<std::string> ingest_inputs;
    std::string ingest_manifest, ingest_out;
    std::size_t ingest_nb = 784, ingest_np = 32;
    double ingest_idle = 60.0;
    ingest->add_option("inputs", ingest_inputs, "pcap files/directories or one dataset file")
        ->required();
    ingest->add_option("--manifest", ingest_manifest, "labeling manifest (JSON)");
    ingest->add_option("--out", ingest_out, "dataset file to write")->required();
    ingest->add_option("--n-b", ingest_nb, "payload bytes per sample");
    ingest->add_option("--n-p", ingest_np, "header-feature packets per sample");
    ingest->add_option("--idle-timeout", ingest_idle, "seconds of silence that split a flow");

    // run
    auto* run = app.add_subcommand("run", "execute a scenario config");
    std::string run_config, run_root, run_method, run_name;
    std::vector<std::uint64_t> run_seeds;
    int run_jobs = 0;
    run->add_option("--config", run_config, "run configuration (JSON)")->required();
    run->add_option("--out-root", run_root,
                    "output root (default $PRIME_OUT_ROOT, then current directory)");
    run->add_option("--method", run_method, "override the configured method");
    run->add_option("--name", run_name, "override the configured run name");
    run->add_option("--seeds", run_seeds, "override the configured seeds")->delimiter(',');
    run->add_option("--jobs", run_jobs, "override the configured worker count");

    // compare
    auto* compare = app.add_subcommand("compare", "tabulate finished runs");
    std::vector<std::string> compare_dirs;
    std::string compare_csv;
    compare->add_option("dirs", compare_dirs, "run directories")->required();
    compare->add_option("--csv", compare_csv, "also write the table as CSV");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "describe a checkpoint, dataset, or run");
    std::string inspect_path;
    inspect->add_option("path", inspect_path, "artifact to describe")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen(gen_out, gen_classes, gen_similarity, gen_samples, gen_nb, gen_np,
                           gen_seed, gen_csv);
        if (ingest->parsed())
            return cmd_ingest(ingest_inputs, ingest_manifest, ingest_out, ingest_nb, ingest_np,
                              ingest_idle);
        if (run->parsed())
            return cmd_run(run_config, run_root, run_method, run_name, run_seeds, run_jobs);
        if (compare->parsed()) return cmd_compare(compare_dirs, compare_csv);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
    } catch (const prime::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

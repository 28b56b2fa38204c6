// Command-line runner: world generation, lineage experiments, lineage
// comparison, basin analysis over logs, and trajectory replay.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nsl/experiment.hpp"
#include "nsl/external_policy.hpp"

namespace {

int log_level() {
    const char* env = std::getenv("NSL_LOG_LEVEL");
    if (!env) return 1;  // warn
    const std::string v = env;
    if (v == "off") return 0;
    if (v == "warn" || v == "error") return 1;
    if (v == "info") return 2;
    return 3;  // debug
}

void log_info(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[nsl] " << msg << "\n";
}

nsl::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nsl::ConfigError("cannot read " + path);
    return nsl::json::parse(in);
}

nsl::ExperimentConfig load_experiment_config(const std::string& path) {
    if (path.empty()) return nsl::ExperimentConfig{};
    return read_json_file(path).get<nsl::ExperimentConfig>();
}

int fail_with_json(const std::exception& e, const char* type) {
    std::cerr << nsl::json{{"error", {{"type", type}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"negative-space learning simulator"};
    app.require_subcommand(1);

    // generate-world
    std::string gw_config, gw_out;
    std::uint64_t gw_seed = 0;
    bool gw_seed_set = false;
    std::int64_t gw_epoch = 0;
    auto* gw = app.add_subcommand("generate-world", "generate a world and print its canonical JSON");
    gw->add_option("--config", gw_config, "world config JSON file");
    gw->add_option("--seed", gw_seed, "seed override")->each([&](const std::string&) { gw_seed_set = true; });
    gw->add_option("--epoch", gw_epoch, "epoch to generate");
    gw->add_option("--out", gw_out, "output file (stdout if omitted)");

    // run-lineage
    std::string rl_config, rl_out, rl_regime, rl_policy;
    std::vector<std::uint64_t> rl_seeds;
    int rl_generations = 0, rl_rows = 0, rl_offline_runs = -1, rl_offline_iters = -1;
    auto* rl = app.add_subcommand("run-lineage", "run lineage experiments and write an artifact directory");
    rl->add_option("--config", rl_config, "experiment config JSON file");
    rl->add_option("--out", rl_out, "output directory")->required();
    rl->add_option("--regime", rl_regime, "full | window | topk");
    rl->add_option("--policy", rl_policy, "greedy | probe | random | scripted | exec:<command>");
    rl->add_option("--seed", rl_seeds, "lineage seed(s); repeatable");
    rl->add_option("--generations", rl_generations, "generations per lineage");
    rl->add_option("--rows", rl_rows, "selected rows per generation");
    rl->add_option("--offline-runs", rl_offline_runs, "offline replicates per version");
    rl->add_option("--offline-iters", rl_offline_iters, "iterations per offline replicate");

    // compare
    std::string cmp_out;
    std::vector<std::string> cmp_dirs;
    auto* cmp = app.add_subcommand("compare", "compare artifact directories");
    cmp->add_option("--out", cmp_out, "output directory")->required();
    cmp->add_option("dirs", cmp_dirs, "artifact directories")->required()->expected(-2);

    // analyze-basins
    std::string ab_dir, ab_out;
    auto* ab = app.add_subcommand("analyze-basins", "recompute basin exports from a seed directory's logs");
    ab->add_option("--in", ab_dir, "seed directory containing gen_XX.jsonl")->required();
    ab->add_option("--out", ab_out, "output directory")->required();

    // replay
    std::string rp_dir;
    int rp_generation = 1;
    std::size_t rp_index = 0;
    auto* rp = app.add_subcommand("replay", "re-execute a logged trajectory against its world snapshot");
    rp->add_option("--dir", rp_dir, "seed directory inside an artifact directory")->required();
    rp->add_option("--generation", rp_generation, "generation number (1-based)")->required();
    rp->add_option("--index", rp_index, "trajectory index within the generation log")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gw->parsed()) {
            nsl::WorldConfig config;
            if (!gw_config.empty()) config = read_json_file(gw_config).get<nsl::WorldConfig>();
            if (gw_seed_set) config.seed = gw_seed;
            auto world = nsl::generate_world_at_epoch(config, gw_epoch);
            auto violations = nsl::check_invariants(world);
            if (!violations.empty()) throw std::runtime_error("generated world violates invariants");
            const auto text = nsl::json(world).dump(2) + "\n";
            if (gw_out.empty()) {
                std::cout << text;
            } else {
                nsl::write_text_file(gw_out, text);
                log_info("world written to " + gw_out);
            }
            return 0;
        }

        if (rl->parsed()) {
            auto cfg = load_experiment_config(rl_config);
            cfg.out_dir = rl_out;
            if (!rl_regime.empty()) cfg.lineage.regime.kind = nsl::regime_from_string(rl_regime);
            if (!rl_seeds.empty()) cfg.seeds = rl_seeds;
            if (rl_generations > 0) cfg.lineage.generations = rl_generations;
            if (rl_rows > 0) cfg.lineage.loop.rows_target = rl_rows;
            if (rl_offline_runs >= 0) cfg.offline_runs = rl_offline_runs;
            if (rl_offline_iters >= 0) cfg.offline_iterations = rl_offline_iters;
            if (!rl_policy.empty()) {
                if (rl_policy == "greedy") cfg.lineage.mode = nsl::PolicyMode::greedy;
                else if (rl_policy == "probe") cfg.lineage.mode = nsl::PolicyMode::probe;
                else if (rl_policy == "random") cfg.lineage.mode = nsl::PolicyMode::random;
                else if (rl_policy == "scripted") {
                    cfg.lineage.mode = nsl::PolicyMode::greedy;
                    cfg.lineage.repertoire.exploration_rate = 0.0;
                    cfg.lineage.repertoire.mutation_rate = 0.0;
                } else if (rl_policy.rfind("exec:", 0) == 0) {
                    std::vector<std::string> argv;
                    std::stringstream ss(rl_policy.substr(5));
                    std::string word;
                    while (ss >> word) argv.push_back(word);
                    if (argv.empty()) throw nsl::ConfigError("empty exec policy command");
                    cfg.lineage.external_command = argv;
                } else {
                    throw nsl::ConfigError("unknown policy: " + rl_policy);
                }
            }
            auto out = nsl::run_lineage_experiment(cfg);
            log_info("lineage artifacts written to " + out.string());
            std::cout << out.string() << "\n";
            return 0;
        }

        if (cmp->parsed()) {
            auto report = nsl::compare_lineages(cmp_dirs, cmp_out);
            std::cout << report.dump(2) << "\n";
            return 0;
        }

        if (ab->parsed()) {
            namespace fs = std::filesystem;
            std::vector<nsl::GenerationStrategies> gens;
            std::vector<fs::path> logs;
            for (const auto& entry : fs::directory_iterator(ab_dir)) {
                const auto name = entry.path().filename().string();
                if (name.rfind("gen_", 0) == 0 && entry.path().extension() == ".jsonl")
                    logs.push_back(entry.path());
            }
            std::sort(logs.begin(), logs.end());
            if (logs.empty()) throw nsl::ConfigError("no gen_*.jsonl logs in " + ab_dir);
            for (const auto& log : logs) {
                auto iterations = nsl::read_jsonl(log.string());
                nsl::GenerationResult res;
                res.iterations = std::move(iterations);
                if (!res.iterations.empty()) res.dataset.generation = res.iterations.front().generation;
                gens.push_back(nsl::strategies_of_generation(res));
            }
            nsl::BasinAnalysisParams params;
            const auto config_path = fs::path(ab_dir).parent_path() / "config.json";
            if (fs::exists(config_path)) {
                auto cfg = read_json_file(config_path.string()).get<nsl::ExperimentConfig>();
                params = cfg.basins;
            }
            auto graph = nsl::analyze_basins(gens, params);
            fs::create_directories(ab_out);
            nsl::write_text_file(fs::path(ab_out) / "basins.json",
                                 nsl::basin_graph_to_json(graph).dump(2) + "\n");
            nsl::write_text_file(fs::path(ab_out) / "basins.dot", nsl::basin_graph_to_dot(graph));
            nsl::write_text_file(fs::path(ab_out) / "entropy.csv", nsl::entropy_csv(graph));
            log_info("basin exports written to " + ab_out);
            return 0;
        }

        if (rp->parsed()) {
            namespace fs = std::filesystem;
            std::ostringstream name;
            name << "gen_" << std::setw(2) << std::setfill('0') << rp_generation << ".jsonl";
            const auto log_path = fs::path(rp_dir) / name.str();
            auto log = nsl::read_jsonl(log_path.string());
            const auto config_path = fs::path(rp_dir).parent_path() / "config.json";
            if (!fs::exists(config_path)) throw nsl::ConfigError("config.json not found next to " + rp_dir);
            auto cfg = read_json_file(config_path.string()).get<nsl::ExperimentConfig>();
            auto result = nsl::replay_trajectory(log, rp_index, cfg.lineage.loop.world);
            std::cout << nsl::json{{"ok", result.ok}, {"detail", result.detail}}.dump() << "\n";
            return result.ok ? 0 : 2;
        }
    } catch (const nsl::ConfigError& e) {
        return fail_with_json(e, "config");
    } catch (const nsl::SchemaMismatch& e) {
        return fail_with_json(e, "schema-mismatch");
    } catch (const std::exception& e) {
        return fail_with_json(e, "runtime");
    }
    return 0;
}

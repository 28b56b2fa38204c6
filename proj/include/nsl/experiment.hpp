// Experiment runner: full lineage runs with per-generation logs, dataset
// manifests, online/offline metric reports, basin exports, and a summary.
// Artifact directories contain everything needed to regenerate any report
// (configs, seeds, JSONL logs); nothing in them is ever mutated afterwards.
#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nsl/basins.hpp"
#include "nsl/evaluation.hpp"
#include "nsl/external_policy.hpp"
#include "nsl/metrics.hpp"
#include "nsl/regimes.hpp"

namespace nsl {

namespace fs = std::filesystem;

struct ExperimentConfig {
    LineageConfig lineage;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int offline_runs = 3;
    int offline_iterations = 100;
    SdMode sd_mode = SdMode::population;
    BasinAnalysisParams basins;
    std::string out_dir;

    void validate() const {
        lineage.loop.world.validate();
        lineage.regime.validate();
        if (seeds.empty()) throw ConfigError("seeds must not be empty");
        if (lineage.generations < 1) throw ConfigError("generations must be >= 1");
        if (offline_runs < 0 || offline_iterations < 0) throw ConfigError("offline settings must be >= 0");
        if (lineage.loop.rows_target < 1) throw ConfigError("rows_target must be >= 1");
    }
};

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"lineage", c.lineage},
             {"seeds", c.seeds},
             {"offline_runs", c.offline_runs},
             {"offline_iterations", c.offline_iterations},
             {"sd_mode", c.sd_mode == SdMode::population ? "population" : "sample"},
             {"basins", json{{"pca_k", c.basins.pca_k},
                             {"tau_link", c.basins.tau_link},
                             {"tau_new", c.basins.tau_new},
                             {"embedding_dim", c.basins.embedding_dim}}},
             {"out_dir", c.out_dir}};
}
inline void from_json(const json& j, ExperimentConfig& c) {
    j.at("lineage").get_to(c.lineage);
    j.at("seeds").get_to(c.seeds);
    j.at("offline_runs").get_to(c.offline_runs);
    j.at("offline_iterations").get_to(c.offline_iterations);
    c.sd_mode = j.at("sd_mode").get<std::string>() == "sample" ? SdMode::sample : SdMode::population;
    const auto& b = j.at("basins");
    b.at("pca_k").get_to(c.basins.pca_k);
    b.at("tau_link").get_to(c.basins.tau_link);
    b.at("tau_new").get_to(c.basins.tau_new);
    b.at("embedding_dim").get_to(c.basins.embedding_dim);
    if (j.contains("out_dir")) j.at("out_dir").get_to(c.out_dir);
}

// ---- formatting helpers -------------------------------------------------------

inline std::string fixed6(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(6) << v;
    return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

// ---- single-seed lineage artifacts ----------------------------------------------

struct LineageRun {
    std::uint64_t seed = 0;
    LineageState state;
    std::vector<StrategyRepertoire> repertoires;       // repertoires[v-1] drives version v
    std::vector<GenerationMetrics> online;             // per version
    std::vector<GenerationMetrics> offline_mean;       // per version (mean over runs)
    std::vector<GenerationMetrics> offline_sd;         // per version (sd over runs)
    CompositeScores composite;                         // over online metrics
    BasinGraph basins;
};

inline GenerationStrategies strategies_of_generation(const GenerationResult& gen) {
    GenerationStrategies gs;
    gs.generation = gen.dataset.generation;
    std::map<std::string, std::pair<std::string, std::int64_t>> uniq;  // id -> (text, count)
    for (const auto& t : gen.iterations)
        for (const auto& text : t.strategy_texts) {
            auto id = strategy_id_for_text(text);
            auto [it, fresh] = uniq.try_emplace(id, text, 0);
            (void)fresh;
            it->second.second += 1;
        }
    for (const auto& [id, tc] : uniq) {
        gs.ids.push_back(id);
        gs.texts.push_back(tc.first);
        gs.usage_counts.push_back(tc.second);
    }
    return gs;
}

/// Runs one full lineage for one seed, entirely in memory.
inline LineageRun run_lineage_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    LineageRun run;
    run.seed = seed;
    LineageConfig lin = cfg.lineage;
    lin.lineage_seed = seed;
    run.state = lineage_begin(lin);
    run.repertoires.push_back(run.state.current);  // version 1 = seed repertoire
    for (int g = 1; g <= lin.generations; ++g) {
        if (!lin.external_command.empty()) {
            auto proc = spawn_policy_process(lin.external_command, 30.0);
            ExternalPolicy external(proc.channel);
            lineage_step(run.state, lin, &external);
        } else {
            lineage_step(run.state, lin);
        }
        run.repertoires.push_back(run.state.current);
        run.online.push_back(run.state.results.back().metrics);
    }

    // offline evaluations: frozen per-version policies, exchangeable replicates
    // (builtin lineages only; external policies own their parameters)
    if (cfg.offline_runs > 0 && cfg.offline_iterations > 0 && lin.external_command.empty()) {
        for (int v = 1; v <= lin.generations; ++v) {
            std::vector<GenerationMetrics> reps;
            for (int r = 0; r < cfg.offline_runs; ++r) {
                LoopConfig loop = lin.loop;
                loop.world.seed = derive_seed(seed, {static_cast<std::uint64_t>(v),
                                                     static_cast<std::uint64_t>(r), 0x6f66666cULL});
                loop.world.climate_phase =
                    lin.loop.world.climate_phase + static_cast<double>(v - 1) * lin.climate_drift;
                RepertoirePolicy policy(run.repertoires[static_cast<std::size_t>(v - 1)], lin.mode,
                                        derive_seed(seed, {static_cast<std::uint64_t>(v),
                                                           static_cast<std::uint64_t>(r), 0x6f70ULL}));
                auto res = run_generation(policy, loop, v, cfg.offline_iterations);
                reps.push_back(res.metrics);
            }
            GenerationMetrics mean, sd;
            auto fold = [&](auto get, double& mout, double& sout) {
                double m = 0;
                for (const auto& rm : reps) m += get(rm);
                m /= static_cast<double>(reps.size());
                double ss = 0;
                for (const auto& rm : reps) ss += (get(rm) - m) * (get(rm) - m);
                mout = m;
                sout = reps.size() > 1 ? std::sqrt(ss / static_cast<double>(reps.size() - 1)) : 0.0;
            };
            fold([](const GenerationMetrics& m) { return m.pct_space_freed; }, mean.pct_space_freed,
                 sd.pct_space_freed);
            fold([](const GenerationMetrics& m) { return m.avg_space_taken_mb; }, mean.avg_space_taken_mb,
                 sd.avg_space_taken_mb);
            fold([](const GenerationMetrics& m) { return m.compile_rate; }, mean.compile_rate, sd.compile_rate);
            fold([](const GenerationMetrics& m) { return m.pass_at_1; }, mean.pass_at_1, sd.pass_at_1);
            fold([](const GenerationMetrics& m) { return m.diversity; }, mean.diversity, sd.diversity);
            run.offline_mean.push_back(mean);
            run.offline_sd.push_back(sd);
        }
    }

    // composite over the online series
    if (run.online.size() >= 2) {
        std::vector<double> freed, taken;
        for (const auto& m : run.online) {
            freed.push_back(m.pct_space_freed);
            taken.push_back(m.avg_space_taken_mb);
        }
        run.composite = composite_scores({freed, taken}, cfg.sd_mode);
    } else {
        run.composite.per_step.assign(run.online.size(), 0.0);
        run.composite.cumulative = run.composite.per_step;
    }

    // basins over proposed strategies per generation
    std::vector<GenerationStrategies> gens;
    for (const auto& res : run.state.results) gens.push_back(strategies_of_generation(res));
    bool any = false;
    for (const auto& g : gens) any |= !g.ids.empty();
    if (any && gens.size() >= 1) run.basins = analyze_basins(gens, cfg.basins);
    return run;
}

// ---- CSV emitters ------------------------------------------------------------------

inline std::string datasets_used_string(const LineageRun& run, int version) {
    if (version < 2 || static_cast<std::size_t>(version - 2) >= run.state.manifests.size()) return "-";
    const auto& manifest = run.state.manifests[static_cast<std::size_t>(version - 2)];
    std::vector<int> gens;
    for (const auto& [g, ids] : manifest.at("generations").items()) {
        (void)ids;
        gens.push_back(std::stoi(g));
    }
    std::sort(gens.begin(), gens.end());
    std::string out;
    for (std::size_t i = 0; i < gens.size(); ++i) out += (i ? " " : "") + std::to_string(gens[i]);
    return out.empty() ? "-" : out;
}

inline std::string online_metrics_csv(const LineageRun& run) {
    std::string csv =
        "version,datasets_used,pct_space_freed,avg_space_taken_mb,composite,cumulative_composite,"
        "compile_rate,pass_at_1,pass_at_1_block,diversity,iterations,selected,rows_selected,aborted\n";
    for (std::size_t i = 0; i < run.online.size(); ++i) {
        const auto& m = run.online[i];
        csv += "v" + std::to_string(i + 1) + ",";
        csv += datasets_used_string(run, static_cast<int>(i + 1)) + ",";
        csv += fixed6(m.pct_space_freed) + "," + fixed6(m.avg_space_taken_mb) + ",";
        csv += fixed6(run.composite.per_step[i]) + "," + fixed6(run.composite.cumulative[i]) + ",";
        csv += fixed6(m.compile_rate) + "," + fixed6(m.pass_at_1) + "," + fixed6(m.pass_at_1_block) + ",";
        csv += fixed6(m.diversity) + "," + std::to_string(m.iteration_count) + "," +
               std::to_string(m.selected_count) + "," + std::to_string(m.rows_selected) + "," +
               std::to_string(m.aborted_count) + "\n";
    }
    return csv;
}

inline std::string offline_metrics_csv(const LineageRun& run) {
    std::string csv =
        "version,mean_pct_space_freed,sd_pct_space_freed,mean_avg_space_taken_mb,sd_avg_space_taken_mb,"
        "mean_compile_rate,sd_compile_rate,mean_pass_at_1,sd_pass_at_1,mean_diversity,sd_diversity\n";
    for (std::size_t i = 0; i < run.offline_mean.size(); ++i) {
        const auto& m = run.offline_mean[i];
        const auto& s = run.offline_sd[i];
        csv += "v" + std::to_string(i + 1) + "," + fixed6(m.pct_space_freed) + "," + fixed6(s.pct_space_freed) +
               "," + fixed6(m.avg_space_taken_mb) + "," + fixed6(s.avg_space_taken_mb) + "," +
               fixed6(m.compile_rate) + "," + fixed6(s.compile_rate) + "," + fixed6(m.pass_at_1) + "," +
               fixed6(s.pass_at_1) + "," + fixed6(m.diversity) + "," + fixed6(s.diversity) + "\n";
    }
    return csv;
}

inline std::string entropy_csv(const BasinGraph& graph) {
    std::string csv =
        "transition,transition_entropy,basin_stability_entropy,flow_concentration_entropy,information_flow,"
        "semantic_similarity_entropy,membership_flux_rate,ecosystem_births,ecosystem_deaths,"
        "basin_size_change_entropy,basin_count_from,basin_count_to\n";
    for (std::size_t g = 0; g < graph.entropy_series.size(); ++g) {
        const auto& e = graph.entropy_series[g];
        csv += std::to_string(g + 1) + "->" + std::to_string(g + 2) + "," + fixed6(e.transition_entropy) + "," +
               fixed6(e.basin_stability_entropy) + "," + fixed6(e.flow_concentration_entropy) + "," +
               fixed6(e.information_flow) + "," + fixed6(e.semantic_similarity_entropy) + "," +
               fixed6(e.membership_flux_rate) + "," + std::to_string(e.ecosystem_births) + "," +
               std::to_string(e.ecosystem_deaths) + "," + fixed6(e.basin_size_change_entropy) + "," +
               std::to_string(graph.per_generation[g].size()) + "," +
               std::to_string(graph.per_generation[g + 1].size()) + "\n";
    }
    return csv;
}

// ---- artifact directory --------------------------------------------------------------

inline json lineage_summary_json(const LineageRun& run) {
    json per_version = json::array();
    for (std::size_t i = 0; i < run.online.size(); ++i) {
        json v{{"version", i + 1},
               {"metrics", run.online[i]},
               {"composite", run.composite.per_step[i]},
               {"cumulative_composite", run.composite.cumulative[i]}};
        if (i < run.basins.per_generation.size()) v["basin_count"] = run.basins.per_generation[i].size();
        per_version.push_back(v);
    }
    return json{{"seed", run.seed},
                {"generations", run.online.size()},
                {"final_cumulative_composite",
                 run.composite.cumulative.empty() ? 0.0 : run.composite.cumulative.back()},
                {"per_version", per_version}};
}

/// Runs every configured seed and writes the artifact tree under out_dir.
/// Refuses to reuse a non-empty directory.
inline fs::path run_lineage_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.out_dir.empty()) throw ConfigError("out_dir is required");
    fs::path out(cfg.out_dir);
    if (fs::exists(out) && !fs::is_empty(out))
        throw ConfigError("output directory exists and is not empty: " + out.string());
    fs::create_directories(out);
    write_text_file(out / "config.json", json(cfg).dump(2) + "\n");

    json cross_summary = json::array();
    for (const auto seed : cfg.seeds) {
        auto run = run_lineage_for_seed(cfg, seed);
        fs::path sdir = out / ("seed_" + std::to_string(seed));
        fs::create_directories(sdir);
        for (std::size_t g = 0; g < run.state.results.size(); ++g) {
            std::ostringstream name;
            name << "gen_" << std::setw(2) << std::setfill('0') << (g + 1) << ".jsonl";
            write_jsonl((sdir / name.str()).string(), run.state.results[g].iterations);
        }
        for (std::size_t i = 0; i < run.state.manifests.size(); ++i) {
            std::ostringstream name;
            name << "dataset_v" << std::setw(2) << std::setfill('0') << (i + 2) << ".json";
            write_text_file(sdir / name.str(), run.state.manifests[i].dump(2) + "\n");
        }
        write_text_file(sdir / "metrics.csv", online_metrics_csv(run));
        if (!run.offline_mean.empty()) write_text_file(sdir / "offline_metrics.csv", offline_metrics_csv(run));
        if (!run.basins.per_generation.empty()) {
            write_text_file(sdir / "basins.json", basin_graph_to_json(run.basins).dump(2) + "\n");
            write_text_file(sdir / "basins.dot", basin_graph_to_dot(run.basins));
            write_text_file(sdir / "entropy.csv", entropy_csv(run.basins));
        }
        auto summary = lineage_summary_json(run);
        write_text_file(sdir / "summary.json", summary.dump(2) + "\n");
        cross_summary.push_back(summary);
    }
    write_text_file(out / "summary.json",
                    json{{"regime", to_string(cfg.lineage.regime.kind)}, {"runs", cross_summary}}.dump(2) + "\n");
    return out;
}

// ---- compare ------------------------------------------------------------------------------

struct SchemaMismatch : std::runtime_error {
    explicit SchemaMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Aligned per-version comparison of two or more artifact directories.
inline json compare_lineages(const std::vector<std::string>& dirs, const std::string& out_dir) {
    if (dirs.size() < 2) throw ConfigError("compare needs at least two artifact directories");
    struct Entry {
        std::string dir;
        std::string regime;
        std::vector<double> mean_cumulative;  // per version, mean over seeds
    };
    std::vector<Entry> entries;
    std::size_t versions = 0;
    for (const auto& dir : dirs) {
        fs::path p(dir);
        if (!fs::exists(p / "summary.json")) throw SchemaMismatch("missing summary.json in " + dir);
        std::ifstream summary_in(p / "summary.json");
        json summary = json::parse(summary_in);
        if (!summary.contains("runs") || summary["runs"].empty())
            throw SchemaMismatch("summary.json has no runs in " + dir);
        Entry e;
        e.dir = dir;
        e.regime = summary.value("regime", "?");
        const auto n = summary["runs"][0]["per_version"].size();
        if (versions == 0) versions = n;
        if (n != versions) throw SchemaMismatch("generation count mismatch in " + dir);
        e.mean_cumulative.assign(versions, 0.0);
        for (const auto& run : summary["runs"]) {
            if (run["per_version"].size() != versions) throw SchemaMismatch("ragged run in " + dir);
            for (std::size_t v = 0; v < versions; ++v)
                e.mean_cumulative[v] += run["per_version"][v]["cumulative_composite"].get<double>() /
                                        static_cast<double>(summary["runs"].size());
        }
        entries.push_back(std::move(e));
    }

    fs::create_directories(out_dir);
    std::string csv = "version";
    for (const auto& e : entries) csv += "," + e.regime + ":" + fs::path(e.dir).filename().string();
    csv += "\n";
    for (std::size_t v = 0; v < versions; ++v) {
        csv += "v" + std::to_string(v + 1);
        for (const auto& e : entries) csv += "," + fixed6(e.mean_cumulative[v]);
        csv += "\n";
    }
    write_text_file(fs::path(out_dir) / "cumulative_composite.csv", csv);

    json divergence = json::object();
    for (const auto& e : entries) divergence[e.dir] = e.mean_cumulative.back();
    json report{{"directories", dirs}, {"final_mean_cumulative_composite", divergence}};
    double max_gap = 0;
    for (const auto& a : entries)
        for (const auto& b : entries)
            max_gap = std::max(max_gap, std::abs(a.mean_cumulative.back() - b.mean_cumulative.back()));
    report["max_final_divergence"] = max_gap;
    write_text_file(fs::path(out_dir) / "comparison.json", report.dump(2) + "\n");
    return report;
}

// ---- replay -------------------------------------------------------------------------------

struct ReplayResult {
    bool ok = false;
    std::string detail;
};

/// Re-executes a logged trajectory against its regenerated world snapshot.
/// All executed scripts of the same epoch that precede it in the log are
/// replayed first so the world state matches exactly.
inline ReplayResult replay_trajectory(const std::vector<Trajectory>& log, std::size_t index,
                                      const WorldConfig& family) {
    ReplayResult r;
    if (index >= log.size()) {
        r.detail = "index out of range";
        return r;
    }
    const auto& target = log[index];
    WorldConfig cfg = family;
    cfg.seed = target.world_seed;
    World world = generate_world_at_epoch(cfg, target.epoch);
    AgentKnowledge knowledge;
    knowledge.reset(world.home_id);
    for (std::size_t i = 0; i < index; ++i) {
        if (log[i].epoch != target.epoch) continue;
        for (const auto& e : log[i].executed) execute_script(world, knowledge, e.script);
    }
    for (const auto& e : target.executed) {
        auto outcome = execute_script(world, knowledge, e.script);
        if (!(outcome == e.outcome)) {
            r.detail = "outcome mismatch in trajectory " + target.id;
            return r;
        }
    }
    const auto replayed_delta = [&] {
        SignedBytes d = 0;
        for (const auto& e : target.executed) d += e.outcome.delta_r_bytes;
        return d;
    }();
    if (replayed_delta != target.delta_r_bytes) {
        r.detail = "delta mismatch in trajectory " + target.id;
        return r;
    }
    r.ok = true;
    r.detail = "replayed " + target.id + " against epoch " + std::to_string(target.epoch);
    return r;
}

}  // namespace nsl

// Dataset-composition regimes and lineage stepping. A lineage alternates
// data collection with a policy update applied to the *seed* repertoire
// (never stacked on the previous update), consuming the regime-composed
// dataset. The first warmup_versions are trained on full history before the
// regimes diverge, mirroring the shared warm-start of the three lineages.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "nsl/agent_loop.hpp"

namespace nsl {

/// The binary selection operator S: retain iff the trajectory freed bytes.
inline bool select(const Trajectory& t) { return t.delta_r_bytes > 0; }

enum class RegimeKind { full_history, sliding_window, top_k };
enum class RankBy { delta_r, success_rate };

inline const char* to_string(RegimeKind k) {
    switch (k) {
        case RegimeKind::full_history: return "full";
        case RegimeKind::sliding_window: return "window";
        case RegimeKind::top_k: return "topk";
    }
    return "?";
}

inline RegimeKind regime_from_string(const std::string& s) {
    if (s == "full" || s == "full_history") return RegimeKind::full_history;
    if (s == "window" || s == "sliding_window") return RegimeKind::sliding_window;
    if (s == "topk" || s == "top_k") return RegimeKind::top_k;
    throw std::invalid_argument("unknown regime: " + s);
}

struct Regime {
    RegimeKind kind = RegimeKind::sliding_window;
    int window = 3;
    int top_k = 3;
    RankBy rank_by = RankBy::delta_r;
    int rehearsal_rows = 50;   // per included generation
    int warmup_versions = 5;   // versions trained on full history before diverging

    void validate() const {
        if (window < 1) throw ConfigError("regime window must be >= 1");
        if (top_k < 1) throw ConfigError("regime top_k must be >= 1");
        if (rehearsal_rows < 0) throw ConfigError("rehearsal_rows must be >= 0");
        if (warmup_versions < 1) throw ConfigError("warmup_versions must be >= 1");
    }
};

inline void to_json(json& j, const Regime& r) {
    j = json{{"kind", to_string(r.kind)},
             {"window", r.window},
             {"top_k", r.top_k},
             {"rank_by", r.rank_by == RankBy::delta_r ? "delta_r" : "success_rate"},
             {"rehearsal_rows", r.rehearsal_rows},
             {"warmup_versions", r.warmup_versions}};
}
inline void from_json(const json& j, Regime& r) {
    r.kind = regime_from_string(j.at("kind").get<std::string>());
    j.at("window").get_to(r.window);
    j.at("top_k").get_to(r.top_k);
    r.rank_by = j.at("rank_by").get<std::string>() == "success_rate" ? RankBy::success_rate : RankBy::delta_r;
    j.at("rehearsal_rows").get_to(r.rehearsal_rows);
    j.at("warmup_versions").get_to(r.warmup_versions);
}

struct GenerationRecord {
    Dataset dataset;            // selected trajectories only
    GenerationMetrics metrics;  // over all iterations of that generation
};

struct History {
    std::vector<GenerationRecord> generations;  // generations[0] is generation 1

    std::int64_t latest() const { return static_cast<std::int64_t>(generations.size()); }
    const GenerationRecord& at_generation(std::int64_t g) const {
        return generations.at(static_cast<std::size_t>(g - 1));
    }
};

// ---- rehearsal pool ---------------------------------------------------------

struct RehearsalRow {
    std::string id;
    std::string stage;
    json script;
};

inline void to_json(json& j, const RehearsalRow& r) {
    j = json{{"id", r.id}, {"stage", r.stage}, {"script", r.script}};
}
inline void from_json(const json& j, RehearsalRow& r) {
    j.at("id").get_to(r.id);
    j.at("stage").get_to(r.stage);
    r.script = j.at("script");
}

/// Fixed synthetic rows mixed into every training set to limit forgetting.
/// Seeded independently of any lineage; constant across generations.
struct RehearsalPool {
    std::vector<RehearsalRow> rows;

    static RehearsalPool make(std::uint64_t seed = 0x7265686561727365ULL, std::size_t size = 200) {
        RehearsalPool pool;
        Rng rng(derive_seed(seed, {size}));
        for (std::size_t i = 0; i < size; ++i) {
            RehearsalRow row;
            row.id = "rh-" + std::to_string(i);
            row.stage = (i % 3 == 0) ? "exploration" : (i % 3 == 1) ? "strategy" : "execution";
            Script s;
            s.stage_tag = row.stage == "exploration" ? StageTag::exploration : StageTag::execution;
            switch (rng.bounded(3)) {
                case 0: s.actions.push_back(ListDir{Path::parse("c0:/")}); break;
                case 1: s.actions.push_back(ScanNetwork{}); break;
                default: s.actions.push_back(NoOp{"rehearsal " + std::to_string(rng.bounded(1000))}); break;
            }
            row.script = json(s);
            pool.rows.push_back(std::move(row));
        }
        return pool;
    }
};

// ---- composition ------------------------------------------------------------

struct ComposedDataset {
    std::vector<std::int64_t> included_generations;  // ascending
    std::vector<Trajectory> trajectories;
    std::vector<RehearsalRow> rehearsal;
    bool empty_history_warning = false;

    int data_rows() const {
        int n = 0;
        for (const auto& t : trajectories) n += t.rows();
        return n;
    }

    /// Everything needed to rebuild this dataset from per-generation logs.
    json manifest() const {
        json gens = json::object();
        for (auto g : included_generations) {
            json ids = json::array();
            for (const auto& t : trajectories)
                if (t.generation == g) ids.push_back(t.id);
            gens[std::to_string(g)] = ids;
        }
        json rh = json::array();
        for (const auto& r : rehearsal) rh.push_back(r.id);
        return json{{"generations", gens}, {"rehearsal", rh}, {"empty_history_warning", empty_history_warning}};
    }
};

namespace regime_detail {

inline std::vector<std::int64_t> pick_generations(const Regime& regime, const History& history, std::int64_t t) {
    std::vector<std::int64_t> out;
    if (t <= 0) return out;
    switch (regime.kind) {
        case RegimeKind::full_history:
            for (std::int64_t g = 1; g <= t; ++g) out.push_back(g);
            break;
        case RegimeKind::sliding_window:
            for (std::int64_t g = std::max<std::int64_t>(1, t - regime.window + 1); g <= t; ++g) out.push_back(g);
            break;
        case RegimeKind::top_k: {
            std::vector<std::pair<double, std::int64_t>> ranked;
            for (std::int64_t g = 1; g <= t; ++g) {
                const auto& rec = history.at_generation(g);
                double value;
                if (regime.rank_by == RankBy::success_rate) {
                    value = rec.metrics.compile_rate;
                } else {
                    // mean over retained (positive-delta) trajectories only
                    double sum = 0;
                    std::int64_t n = 0;
                    for (const auto& traj : rec.dataset.trajectories)
                        if (select(traj)) {
                            sum += static_cast<double>(traj.delta_r_bytes);
                            ++n;
                        }
                    value = n > 0 ? sum / static_cast<double>(n) : 0.0;
                }
                ranked.emplace_back(value, g);
            }
            // highest value first; ties broken toward recency
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second > b.second;
            });
            for (std::size_t i = 0; i < std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(regime.top_k)); ++i)
                out.push_back(ranked[i].second);
            std::sort(out.begin(), out.end());
            break;
        }
    }
    return out;
}

inline std::vector<RehearsalRow> sample_rehearsal(const RehearsalPool& pool, int rows_per_generation,
                                                  const std::vector<std::int64_t>& gens, std::int64_t t) {
    std::vector<RehearsalRow> out;
    if (pool.rows.empty() || rows_per_generation <= 0) return out;
    const auto n_groups = std::max<std::size_t>(1, gens.size());
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
        const std::int64_t g = gens.empty() ? 0 : gens[gi];
        Rng rng(derive_seed(0x7265686eULL, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(g)}));
        for (int i = 0; i < rows_per_generation; ++i)
            out.push_back(pool.rows[static_cast<std::size_t>(rng.bounded(pool.rows.size()))]);
    }
    return out;
}

}  // namespace regime_detail

/// The pure regime law at generation t: FullHistory 1..t, SlidingWindow
/// max(1, t-w+1)..t, TopK the k best generations by the configured rank.
/// Only positive-delta trajectories ever appear (history holds nothing else).
inline ComposedDataset compose_dataset(const Regime& regime, const History& history, std::int64_t t,
                                       const RehearsalPool& pool) {
    regime.validate();
    if (t > history.latest()) throw std::invalid_argument("compose_dataset: t beyond recorded history");
    ComposedDataset out;
    out.included_generations = regime_detail::pick_generations(regime, history, t);
    if (out.included_generations.empty()) out.empty_history_warning = true;
    for (auto g : out.included_generations) {
        const auto& rec = history.at_generation(g);
        for (const auto& traj : rec.dataset.trajectories) {
            if (!select(traj)) continue;  // belt and braces: S(tau)=1 only
            out.trajectories.push_back(traj);
        }
    }
    out.rehearsal = regime_detail::sample_rehearsal(pool, regime.rehearsal_rows, out.included_generations, t);
    return out;
}

/// Dataset used to train model version v (v >= 2): full history during the
/// shared warmup, the regime law afterwards, so every lineage starts from
/// the same common trunk before the regimes diverge.
inline ComposedDataset dataset_for_version(const Regime& regime, const History& history, std::int64_t version,
                                           const RehearsalPool& pool) {
    if (version < 2) throw std::invalid_argument("dataset_for_version: versions start at 2");
    const std::int64_t t = version - 1;
    if (version <= regime.warmup_versions) {
        Regime warm = regime;
        warm.kind = RegimeKind::full_history;
        return compose_dataset(warm, history, t, pool);
    }
    return compose_dataset(regime, history, t, pool);
}

// ---- lineage ------------------------------------------------------------------

struct LineageConfig {
    LoopConfig loop;
    Regime regime;
    RepertoireConfig repertoire;
    PolicyMode mode = PolicyMode::greedy;
    std::vector<std::string> external_command;  // non-empty: spawn this policy process instead
    std::uint64_t lineage_seed = 1;
    int generations = 13;
    double climate_drift = 0.0;  // climate phase step per generation
    std::uint64_t rehearsal_pool_seed = 0x7265686561727365ULL;
    std::size_t rehearsal_pool_size = 200;
};

inline void to_json(json& j, const LineageConfig& c) {
    j = json{{"loop", c.loop},
             {"regime", c.regime},
             {"repertoire", c.repertoire},
             {"mode", c.mode == PolicyMode::greedy ? "greedy" : c.mode == PolicyMode::probe ? "probe" : "random"},
             {"external_command", c.external_command},
             {"lineage_seed", c.lineage_seed},
             {"generations", c.generations},
             {"climate_drift", c.climate_drift},
             {"rehearsal_pool_seed", c.rehearsal_pool_seed},
             {"rehearsal_pool_size", c.rehearsal_pool_size}};
}
inline void from_json(const json& j, LineageConfig& c) {
    j.at("loop").get_to(c.loop);
    j.at("regime").get_to(c.regime);
    j.at("repertoire").get_to(c.repertoire);
    const auto m = j.at("mode").get<std::string>();
    c.mode = m == "probe" ? PolicyMode::probe : m == "random" ? PolicyMode::random : PolicyMode::greedy;
    if (j.contains("external_command")) j.at("external_command").get_to(c.external_command);
    j.at("lineage_seed").get_to(c.lineage_seed);
    j.at("generations").get_to(c.generations);
    if (j.contains("climate_drift")) j.at("climate_drift").get_to(c.climate_drift);
    j.at("rehearsal_pool_seed").get_to(c.rehearsal_pool_seed);
    j.at("rehearsal_pool_size").get_to(c.rehearsal_pool_size);
}

struct LineageState {
    StrategyRepertoire seed_rep;   // the fixed base every update starts from
    StrategyRepertoire current;    // policy parameters for the next generation
    History history;
    RehearsalPool pool;
    World probe_world;             // fixed probe for effect-profile merging
    std::int64_t generation = 0;   // completed generations
    std::vector<GenerationResult> results;       // per generation
    std::vector<json> manifests;                 // per composed dataset
};

inline LineageState lineage_begin(const LineageConfig& cfg) {
    LineageState st;
    st.seed_rep = seed_repertoire(cfg.repertoire, derive_seed(cfg.lineage_seed, {0x73656564ULL}));
    st.current = st.seed_rep;
    st.pool = RehearsalPool::make(cfg.rehearsal_pool_seed, cfg.rehearsal_pool_size);
    WorldConfig probe_cfg = cfg.loop.world;
    probe_cfg.seed = derive_seed(cfg.lineage_seed, {0x70726f6265ULL});
    st.probe_world = generate_world(probe_cfg);
    return st;
}

/// Runs one generation with the current policy, appends its dataset to the
/// history, composes the next training set, and rebuilds the policy from the
/// seed repertoire with it. A policy override (an external process) replaces
/// the builtin surrogate for data collection; the repertoire update still
/// runs, tracking whatever strategies the data declares.
inline void lineage_step(LineageState& st, const LineageConfig& cfg, PolicyInterface* policy_override = nullptr) {
    const std::int64_t g = st.generation + 1;
    LoopConfig loop = cfg.loop;
    loop.world.seed = derive_seed(cfg.lineage_seed, {static_cast<std::uint64_t>(g), 0x67656eULL});
    // the environment family drifts slowly over the lineage
    loop.world.climate_phase = cfg.loop.world.climate_phase + static_cast<double>(g - 1) * cfg.climate_drift;

    RepertoirePolicy builtin(st.current, cfg.mode,
                             derive_seed(cfg.lineage_seed, {static_cast<std::uint64_t>(g), 0x706f6cULL}));
    PolicyInterface& policy = policy_override ? *policy_override : static_cast<PolicyInterface&>(builtin);
    auto result = run_generation(policy, loop, g);
    st.history.generations.push_back({result.dataset, result.metrics});
    st.results.push_back(std::move(result));
    st.generation = g;

    auto composed = dataset_for_version(cfg.regime, st.history, g + 1, st.pool);
    st.manifests.push_back(composed.manifest());
    st.current = surrogate_update(st.seed_rep, composed.trajectories, static_cast<std::uint64_t>(g),
                                  &st.probe_world);
}

}  // namespace nsl

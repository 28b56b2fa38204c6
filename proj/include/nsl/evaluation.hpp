// Strategy- and policy-level evaluation against probe worlds: temporal
// robustness of a single strategy across future snapshots, and the value
// decomposition diagnostic (immediate delta plus discounted policy
// improvement). Diagnostics only; selection never reads these numbers.
#pragma once

#include <vector>

#include "nsl/agent_loop.hpp"
#include "nsl/regimes.hpp"

namespace nsl {

/// Fraction of snapshots in which rendering and executing the strategy (with
/// full knowledge of that snapshot) still frees bytes.
inline double temporal_robustness(const Strategy& strategy, const std::vector<World>& snapshots) {
    if (snapshots.empty()) throw std::invalid_argument("temporal_robustness: need snapshots");
    int effective = 0;
    for (const auto& snapshot : snapshots) {
        World w = snapshot;
        for (auto& c : w.containers) c.agent_access = true;
        auto k = omniscient_knowledge(w);
        std::map<std::string, Bytes> tally;
        for (const auto& c : w.containers)
            if (c.free_bytes > c.claimed_bytes) tally[c.id] = c.free_bytes - c.claimed_bytes;
        auto script = render_strategy(strategy, k, tally);
        if (script.actions.empty()) continue;
        auto out = execute_script(w, k, script);
        if (out.delta_r_bytes > 0) ++effective;
    }
    return static_cast<double>(effective) / static_cast<double>(snapshots.size());
}

/// Mean per-iteration delta of a repertoire-backed policy across probe worlds.
inline double mean_policy_delta(const StrategyRepertoire& rep, PolicyMode mode,
                                const std::vector<WorldConfig>& probe_worlds, int iterations_per_world,
                                std::uint64_t eval_seed) {
    if (probe_worlds.empty()) throw std::invalid_argument("mean_policy_delta: need probe worlds");
    double total = 0;
    std::int64_t n = 0;
    for (std::size_t wi = 0; wi < probe_worlds.size(); ++wi) {
        LoopConfig cfg;
        cfg.world = probe_worlds[wi];
        RepertoirePolicy policy(rep, mode, derive_seed(eval_seed, {wi, 0x6576616cULL}));
        auto res = run_generation(policy, cfg, 0, iterations_per_world);
        for (const auto& t : res.iterations) {
            total += static_cast<double>(t.delta_r_bytes);
            ++n;
        }
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
}

struct ValueDecomposition {
    double immediate = 0.0;
    double future_term = 0.0;
};

/// Value(tau) = delta(tau) + beta * (mean delta of the updated policy on
/// probe worlds - mean delta of the prior policy on the same worlds).
inline ValueDecomposition value_decomposition(const Trajectory& trajectory, const StrategyRepertoire& policy_before,
                                              const StrategyRepertoire& policy_after, PolicyMode mode,
                                              const std::vector<WorldConfig>& probe_worlds, double beta = 0.9,
                                              int iterations_per_world = 4, std::uint64_t eval_seed = 17) {
    ValueDecomposition v;
    v.immediate = static_cast<double>(trajectory.delta_r_bytes);
    if (beta == 0.0) return v;
    const double before = mean_policy_delta(policy_before, mode, probe_worlds, iterations_per_world, eval_seed);
    const double after = mean_policy_delta(policy_after, mode, probe_worlds, iterations_per_world, eval_seed);
    v.future_term = beta * (after - before);
    return v;
}

}  // namespace nsl

// The staged interaction loop: exploration, strategic reasoning, execution,
// each stage with up to three attempts. A third consecutive failure ends the
// iteration, keeping whatever delta the executed prefixes already caused
// (delta is a world fact, not a stage fact). Policy-protocol failures abort
// the iteration; aborted iterations count in metrics but never enter datasets.
#pragma once

#include <string>
#include <vector>

#include "nsl/metrics.hpp"
#include "nsl/policy.hpp"

namespace nsl {

struct LoopConfig {
    WorldConfig world;
    int rows_target = 450;           // selected prompt-response rows per generation
    int max_attempts = 3;            // per stage
    std::size_t max_script_len = kDefaultMaxScriptLen;
    int epoch_iteration_cap = 40;    // hard cap before regeneration
    int stall_regenerate = 2;        // consecutive no-progress iterations ending an epoch
    int max_iterations = 0;          // 0 -> derived safety limit
    int derived_max_iterations() const {
        return max_iterations > 0 ? max_iterations : std::max(1000, rows_target * 100);
    }
};

inline void to_json(json& j, const LoopConfig& c) {
    j = json{{"world", c.world},
             {"rows_target", c.rows_target},
             {"max_attempts", c.max_attempts},
             {"max_script_len", c.max_script_len},
             {"epoch_iteration_cap", c.epoch_iteration_cap},
             {"stall_regenerate", c.stall_regenerate},
             {"max_iterations", c.max_iterations}};
}
inline void from_json(const json& j, LoopConfig& c) {
    j.at("world").get_to(c.world);
    j.at("rows_target").get_to(c.rows_target);
    j.at("max_attempts").get_to(c.max_attempts);
    j.at("max_script_len").get_to(c.max_script_len);
    j.at("epoch_iteration_cap").get_to(c.epoch_iteration_cap);
    j.at("stall_regenerate").get_to(c.stall_regenerate);
    j.at("max_iterations").get_to(c.max_iterations);
}

/// Reclaimable bytes the agent could still free in containers it can reach.
inline Bytes reachable_reclaimable(const World& w) {
    Bytes sum = 0;
    for (const auto& c : w.containers) {
        if (!c.agent_access) continue;
        std::vector<const FileNode*> q{&c.root};
        while (!q.empty()) {
            const auto* n = q.back();
            q.pop_back();
            for (const auto& ch : n->children) q.push_back(&ch);
            if (n->is_dir()) continue;
            if (n->perms.deletable) sum += n->size_bytes;
            else if (n->perms.writable && !n->compressed) sum += n->size_bytes - n->size_bytes / 2;
        }
    }
    return sum;
}

/// A world is unusable once home has no free space left and nothing
/// reclaimable remains reachable.
inline bool is_broken(const World& w) {
    const auto* home = w.find_container(w.home_id);
    return home && home->free_bytes == 0 && reachable_reclaimable(w) == 0;
}

/// Nothing left to gain: every container reachable and nothing reclaimable.
inline bool is_exhausted(const World& w) {
    if (reachable_reclaimable(w) > 0) return false;
    for (const auto& c : w.containers)
        if (!c.agent_access) return false;
    return true;
}

namespace loop_detail {

inline std::string observation_prompt(const AgentKnowledge& k, const World& w) {
    json j{{"epoch", w.epoch},
           {"known_paths", k.known_paths.size()},
           {"known_containers", k.known_containers.size()},
           {"recent", k.recent_learnings}};
    return j.dump();
}

struct StageRun {
    bool ok = false;
    Script final_script;
    std::optional<StructuredError> last_error;
};

/// Runs one stage with repair attempts; records stage rows and executions.
inline StageRun run_stage(World& world, AgentKnowledge& knowledge, PolicyInterface& policy, Trajectory& t,
                          Stage first_stage, Stage fix_stage, Script script, const LoopConfig& cfg) {
    StageRun run;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        if (attempt > 1) {
            script = policy.repair(script, *run.last_error, attempt, knowledge);
            script.stage_tag = (first_stage == Stage::exploration) ? StageTag::exploration : StageTag::execution;
        }
        StageRecord rec;
        rec.stage = attempt == 1 ? first_stage : fix_stage;
        rec.attempt_index = attempt;
        rec.prompt_payload = attempt == 1 ? observation_prompt(knowledge, world)
                                          : render_error(*run.last_error);
        rec.response_payload = json(script);
        t.stage_records.push_back(rec);

        auto outcome = execute_script(world, knowledge, script, cfg.max_script_len);
        policy.on_outcome(script, outcome);
        t.executed.push_back({script, outcome, first_stage, attempt});
        if (outcome.ok()) {
            run.ok = true;
            run.final_script = script;
            return run;
        }
        run.last_error = *outcome.error();
        run.final_script = script;
    }
    return run;
}

}  // namespace loop_detail

/// One full loop iteration against a non-broken world.
inline Trajectory run_iteration(World& world, PolicyInterface& policy, AgentKnowledge& knowledge,
                                const LoopConfig& cfg, std::int64_t generation, std::int64_t iteration_index) {
    using namespace loop_detail;
    Trajectory t;
    t.id = "g" + std::to_string(generation) + "-i" + std::to_string(iteration_index);
    t.generation = generation;
    t.epoch = world.epoch;
    t.world_seed = cfg.world.seed;
    t.world_total_bytes = world.total_bytes;
    const Bytes fc_start = free_capacity(world);
    const Bytes claimed_start = claimed_total(world);

    StageRecord system;
    system.stage = Stage::system;
    system.prompt_payload = "goal: discover and free up storage space for future backups";
    system.response_payload = json();
    t.stage_records.push_back(system);

    auto finalize = [&](std::optional<std::string> abort_reason) {
        t.delta_r_bytes = static_cast<SignedBytes>(free_capacity(world)) - static_cast<SignedBytes>(fc_start);
        t.claimed_bytes = claimed_total(world) - claimed_start;
        t.credited_value = static_cast<double>(std::max<SignedBytes>(t.delta_r_bytes, 0));
        t.abort_reason = std::move(abort_reason);
        t.selected = !t.abort_reason && t.delta_r_bytes > 0;
        return t;
    };

    try {
        // exploration stage
        auto explo = run_stage(world, knowledge, policy, t, Stage::exploration, Stage::exploration_fix,
                               policy.propose_exploration(knowledge), cfg);
        if (explo.final_script.source_strategy_id) {
            t.exploration_strategy_id = explo.final_script.source_strategy_id;
            if (auto s = policy.find_strategy(*t.exploration_strategy_id)) {
                t.exploration_strategy = json(*s);
                t.strategy_texts.push_back(s->text());
            }
        }
        if (!explo.ok) return finalize(std::nullopt);  // reverts to a fresh iteration

        // strategic reasoning stage
        auto strategies = policy.propose_strategies(knowledge);
        if (strategies.empty()) throw PolicyProtocolError("empty strategy list");
        StageRecord strat;
        strat.stage = Stage::strategy;
        strat.prompt_payload = observation_prompt(knowledge, world);
        json texts = json::array();
        for (const auto& s : strategies) {
            texts.push_back(s.text());
            t.strategy_texts.push_back(s.text());
        }
        strat.response_payload = texts;
        t.stage_records.push_back(strat);

        // execution stage
        auto script = policy.choose_and_render(strategies, -1, knowledge);
        auto exec = run_stage(world, knowledge, policy, t, Stage::execution, Stage::execution_fix, script, cfg);
        if (exec.final_script.source_strategy_id) {
            t.executed_strategy_id = exec.final_script.source_strategy_id;
            for (const auto& s : strategies)
                if (s.id() == *t.executed_strategy_id) t.executed_strategy = json(s);
            if (t.executed_strategy.is_null())
                if (auto s = policy.find_strategy(*t.executed_strategy_id)) t.executed_strategy = json(*s);
        }
        return finalize(std::nullopt);
    } catch (const PolicyProtocolError& e) {
        return finalize(std::string("policy-protocol: ") + e.what());
    }
}

struct GenerationResult {
    Dataset dataset;                    // selected trajectories only
    GenerationMetrics metrics;          // over all iterations
    std::vector<Trajectory> iterations; // the full log
    std::int64_t epochs_used = 0;
    bool hit_iteration_limit = false;
};

/// Repeats run_iteration, regenerating worlds as they break or exhaust, until
/// the selected rows reach the target (or a fixed iteration count when
/// fixed_iterations > 0, the offline-evaluation mode).
inline GenerationResult run_generation(PolicyInterface& policy, const LoopConfig& cfg, std::int64_t generation,
                                       int fixed_iterations = 0) {
    GenerationResult res;
    res.dataset.generation = generation;
    World world = generate_world(cfg.world);
    AgentKnowledge knowledge;
    knowledge.reset(world.home_id);
    policy.on_epoch_reset();
    int epoch_iterations = 0;
    int stalled = 0;
    int rows = 0;
    std::int64_t index = 0;
    const int limit = fixed_iterations > 0 ? fixed_iterations : cfg.derived_max_iterations();

    while (true) {
        if (fixed_iterations > 0) {
            if (index >= fixed_iterations) break;
        } else if (rows >= cfg.rows_target) {
            break;
        } else if (index >= limit) {
            res.hit_iteration_limit = true;
            break;
        }
        if (epoch_iterations >= cfg.epoch_iteration_cap || stalled >= cfg.stall_regenerate ||
            is_broken(world) || is_exhausted(world)) {
            world = regenerate(world, cfg.world);
            knowledge.reset(world.home_id);
            policy.on_epoch_reset();
            epoch_iterations = 0;
            stalled = 0;
        }
        auto t = run_iteration(world, policy, knowledge, cfg, generation, index);
        ++index;
        ++epoch_iterations;
        // progress = bytes moved or anything new learnt; stalls end the epoch
        bool learnt = t.delta_r_bytes > 0 || t.claimed_bytes > 0;
        for (const auto& e : t.executed)
            learnt |= !e.outcome.info_events.empty();
        stalled = learnt ? 0 : stalled + 1;
        if (t.selected) {
            rows += t.rows();
            res.dataset.trajectories.push_back(t);
        }
        res.iterations.push_back(std::move(t));
    }
    res.epochs_used = world.epoch + 1;
    res.metrics = compute_generation_metrics(res.iterations);
    return res;
}

}  // namespace nsl

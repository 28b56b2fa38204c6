// Trajectory records: one loop iteration's staged prompt/response rows plus
// everything needed to replay it (scripts, world seed, epoch). Serialized as
// one canonical JSON object per line (JSONL); key order is sorted.
#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nsl/actions.hpp"

namespace nsl {

enum class Stage { system, exploration, exploration_fix, strategy, execution, execution_fix };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::system: return "system";
        case Stage::exploration: return "exploration";
        case Stage::exploration_fix: return "exploration_fix";
        case Stage::strategy: return "strategy";
        case Stage::execution: return "execution";
        case Stage::execution_fix: return "execution_fix";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "system") return Stage::system;
    if (s == "exploration") return Stage::exploration;
    if (s == "exploration_fix") return Stage::exploration_fix;
    if (s == "strategy") return Stage::strategy;
    if (s == "execution") return Stage::execution;
    if (s == "execution_fix") return Stage::execution_fix;
    throw std::invalid_argument("unknown stage: " + s);
}

struct StageRecord {
    Stage stage = Stage::system;
    std::string prompt_payload;  // observation summary or error text
    json response_payload;       // script, strategy list, or empty
    int attempt_index = 1;       // 1..3; fix stages only follow an error
    bool operator==(const StageRecord&) const = default;
};

struct ExecutedScript {
    Script script;
    Outcome outcome;
    Stage stage = Stage::exploration;
    int attempt = 1;
    bool operator==(const ExecutedScript&) const = default;
};

struct Trajectory {
    std::string id;
    std::int64_t generation = 0;
    std::int64_t epoch = 0;
    std::uint64_t world_seed = 0;  // WorldConfig seed for this epoch chain
    Bytes world_total_bytes = 0;
    std::vector<StageRecord> stage_records;
    std::vector<ExecutedScript> executed;
    SignedBytes delta_r_bytes = 0;
    Bytes claimed_bytes = 0;
    double credited_value = 0.0;  // identical for every row of the trajectory
    bool selected = false;
    std::vector<std::string> strategy_texts;  // all strategies proposed this iteration
    std::optional<std::string> executed_strategy_id;
    json executed_strategy;  // full strategy object, null when none executed
    std::optional<std::string> exploration_strategy_id;  // credited alongside on success
    json exploration_strategy;
    std::optional<std::string> abort_reason;  // set only on policy-protocol failure

    /// Prompt-response rows: everything except the system record.
    int rows() const {
        int n = 0;
        for (const auto& r : stage_records)
            if (r.stage != Stage::system) ++n;
        return n;
    }

    bool first_try_pass() const {
        bool explo_ok = false, exec_ok = false;
        for (const auto& e : executed) {
            if (e.stage == Stage::exploration && e.attempt == 1) explo_ok = e.outcome.ok();
            if (e.stage == Stage::execution && e.attempt == 1) exec_ok = e.outcome.ok();
        }
        return explo_ok && exec_ok;
    }
    bool operator==(const Trajectory&) const = default;
};

/// One generation's retained trajectories (all with positive delta).
struct Dataset {
    std::int64_t generation = 0;
    std::vector<Trajectory> trajectories;

    int rows() const {
        int n = 0;
        for (const auto& t : trajectories) n += t.rows();
        return n;
    }
    double mean_delta_r() const {
        if (trajectories.empty()) return 0.0;
        double sum = 0;
        for (const auto& t : trajectories) sum += static_cast<double>(t.delta_r_bytes);
        return sum / static_cast<double>(trajectories.size());
    }
};

inline void to_json(json& j, const StageRecord& r) {
    j = json{{"stage", to_string(r.stage)},
             {"prompt_payload", r.prompt_payload},
             {"response_payload", r.response_payload},
             {"attempt_index", r.attempt_index}};
}
inline void from_json(const json& j, StageRecord& r) {
    r.stage = stage_from_string(j.at("stage").get<std::string>());
    j.at("prompt_payload").get_to(r.prompt_payload);
    r.response_payload = j.at("response_payload");
    j.at("attempt_index").get_to(r.attempt_index);
}

inline void to_json(json& j, const ExecutedScript& e) {
    j = json{{"script", e.script}, {"outcome", e.outcome}, {"stage", to_string(e.stage)}, {"attempt", e.attempt}};
}
inline void from_json(const json& j, ExecutedScript& e) {
    j.at("script").get_to(e.script);
    j.at("outcome").get_to(e.outcome);
    e.stage = stage_from_string(j.at("stage").get<std::string>());
    j.at("attempt").get_to(e.attempt);
}

inline void to_json(json& j, const Trajectory& t) {
    j = json{{"id", t.id},
             {"generation", t.generation},
             {"epoch", t.epoch},
             {"world_seed", t.world_seed},
             {"world_total_bytes", t.world_total_bytes},
             {"stage_records", t.stage_records},
             {"executed", t.executed},
             {"delta_r_bytes", t.delta_r_bytes},
             {"claimed_bytes", t.claimed_bytes},
             {"credited_value", t.credited_value},
             {"selected", t.selected},
             {"strategy_texts", t.strategy_texts},
             {"executed_strategy", t.executed_strategy},
             {"exploration_strategy", t.exploration_strategy}};
    if (t.executed_strategy_id) j["executed_strategy_id"] = *t.executed_strategy_id;
    if (t.exploration_strategy_id) j["exploration_strategy_id"] = *t.exploration_strategy_id;
    if (t.abort_reason) j["abort_reason"] = *t.abort_reason;
}
inline void from_json(const json& j, Trajectory& t) {
    j.at("id").get_to(t.id);
    j.at("generation").get_to(t.generation);
    j.at("epoch").get_to(t.epoch);
    j.at("world_seed").get_to(t.world_seed);
    j.at("world_total_bytes").get_to(t.world_total_bytes);
    j.at("stage_records").get_to(t.stage_records);
    j.at("executed").get_to(t.executed);
    j.at("delta_r_bytes").get_to(t.delta_r_bytes);
    j.at("claimed_bytes").get_to(t.claimed_bytes);
    j.at("credited_value").get_to(t.credited_value);
    j.at("selected").get_to(t.selected);
    j.at("strategy_texts").get_to(t.strategy_texts);
    t.executed_strategy = j.at("executed_strategy");
    t.exploration_strategy = j.at("exploration_strategy");
    t.executed_strategy_id.reset();
    if (j.contains("executed_strategy_id"))
        t.executed_strategy_id = j.at("executed_strategy_id").get<std::string>();
    t.exploration_strategy_id.reset();
    if (j.contains("exploration_strategy_id"))
        t.exploration_strategy_id = j.at("exploration_strategy_id").get<std::string>();
    t.abort_reason.reset();
    if (j.contains("abort_reason")) t.abort_reason = j.at("abort_reason").get<std::string>();
}

inline void write_jsonl(const std::string& path, const std::vector<Trajectory>& ts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& t : ts) out << json(t).dump() << "\n";
}

inline std::vector<Trajectory> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<Trajectory> ts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ts.push_back(json::parse(line).get<Trajectory>());
    }
    return ts;
}

}  // namespace nsl

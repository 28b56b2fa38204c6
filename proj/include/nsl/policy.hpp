// Pluggable decision-makers. The builtin surrogate policy holds a weighted
// repertoire of parameterized strategies; "fine-tuning" multiplies weight
// into strategies that produced retained trajectories, decays unused ones,
// and occasionally mutates or merges entries. Updates are pure functions of
// (repertoire, dataset, config, stream id).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "nsl/embedding.hpp"
#include "nsl/trajectory.hpp"
#include "nsl/worldgen.hpp"

namespace nsl {

// ---- strategies ----------------------------------------------------------

enum class StrategyKind {
    delete_by_name,     // delete known deletable files whose name starts with flavor
    compress_payloads,  // compress known writable, non-deletable, uncompressed files
    claim_free,         // claim tallied freed bytes in a container
    unlock_container,   // connect to containers whose credentials are known
    harvest_credentials,  // read known *.key files
    explore_dirs,       // list unlisted known directories
    scan_topology,      // scan the network
    observe             // no-op
};

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::delete_by_name: return "delete_by_name";
        case StrategyKind::compress_payloads: return "compress_payloads";
        case StrategyKind::claim_free: return "claim_free";
        case StrategyKind::unlock_container: return "unlock_container";
        case StrategyKind::harvest_credentials: return "harvest_credentials";
        case StrategyKind::explore_dirs: return "explore_dirs";
        case StrategyKind::scan_topology: return "scan_topology";
        case StrategyKind::observe: return "observe";
    }
    return "?";
}

inline StrategyKind strategy_kind_from_string(const std::string& s) {
    for (auto k : {StrategyKind::delete_by_name, StrategyKind::compress_payloads, StrategyKind::claim_free,
                   StrategyKind::unlock_container, StrategyKind::harvest_credentials, StrategyKind::explore_dirs,
                   StrategyKind::scan_topology, StrategyKind::observe})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown strategy kind: " + s);
}

struct Strategy {
    StrategyKind kind = StrategyKind::observe;
    std::string container = "any";  // "any" or a concrete container id
    std::string flavor = "any";     // delete_by_name: filename prefix filter
    int depth = 8;                  // max path depth considered
    int limit = 4;                  // max actions rendered per script
    double weight = 1.0;
    std::string provenance = "seeded";  // seeded | mutated | merged

    /// Canonical human-readable rendering; also the embedding input.
    std::string text() const {
        std::string s;
        switch (kind) {
            case StrategyKind::delete_by_name:
                s = "delete " + (flavor == "any" ? std::string("deletable") : flavor) + " files";
                break;
            case StrategyKind::compress_payloads: s = "compress payload files"; break;
            case StrategyKind::claim_free: s = "claim freed space"; break;
            case StrategyKind::unlock_container: s = "unlock containers with known credentials"; break;
            case StrategyKind::harvest_credentials: s = "read credential key files"; break;
            case StrategyKind::explore_dirs: s = "list unexplored directories"; break;
            case StrategyKind::scan_topology: s = "scan the container network"; break;
            case StrategyKind::observe: s = "observe and wait"; break;
        }
        s += container == "any" ? " in any container" : " in container " + container;
        s += " depth " + std::to_string(depth) + " limit " + std::to_string(limit);
        return s;
    }

    std::string id() const;
};

/// Strategy identity is a pure function of the canonical text, so logs can
/// recover ids from texts alone.
inline std::string strategy_id_for_text(const std::string& text) {
    static const char* digits = "0123456789abcdef";
    auto h = fnv1a64(text);
    std::string out = "s-";
    for (int i = 0; i < 10; ++i) {
        out += digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::string Strategy::id() const { return strategy_id_for_text(text()); }

inline void to_json(json& j, const Strategy& s) {
    j = json{{"kind", to_string(s.kind)}, {"container", s.container}, {"flavor", s.flavor},
             {"depth", s.depth},          {"limit", s.limit},         {"weight", s.weight},
             {"provenance", s.provenance}, {"text", s.text()},        {"id", s.id()}};
}
inline void from_json(const json& j, Strategy& s) {
    s.kind = strategy_kind_from_string(j.at("kind").get<std::string>());
    j.at("container").get_to(s.container);
    j.at("flavor").get_to(s.flavor);
    j.at("depth").get_to(s.depth);
    j.at("limit").get_to(s.limit);
    j.at("weight").get_to(s.weight);
    j.at("provenance").get_to(s.provenance);
}

// ---- repertoire -----------------------------------------------------------

struct RepertoireConfig {
    // Reinforcement counts scale with the composed dataset (hundreds of
    // trajectories per generation at the default rows target), so eta is
    // small; (1+eta)^count still spans orders of magnitude over a lineage.
    double eta = 0.04;                 // reinforcement: weight *= (1+eta)^count
    double decay = 0.8;                // absence decay factor
    double prune_threshold = 1e-3;     // on normalized weights
    double mutation_rate = 0.05;       // chance per update of spawning a variant
    double exploration_rate = 0.2;     // epsilon share of execution choices
    double sampling_sharpness = 1.3;   // proposals sample p ~ w^sharpness
    int absence_window = 1;            // decay after this many updates unused
    double merge_tolerance = 0.05;     // relative effect-profile distance
    double reinforce_budget = 350;     // cap on total credited rows per update
    std::size_t min_strategies = 3;    // pruning floor
    std::size_t proposals_per_iteration = 5;
    int max_world_containers = 8;      // for container-specializing mutations
};

inline void to_json(json& j, const RepertoireConfig& c) {
    j = json{{"eta", c.eta},
             {"decay", c.decay},
             {"prune_threshold", c.prune_threshold},
             {"mutation_rate", c.mutation_rate},
             {"exploration_rate", c.exploration_rate},
             {"sampling_sharpness", c.sampling_sharpness},
             {"absence_window", c.absence_window},
             {"merge_tolerance", c.merge_tolerance},
             {"reinforce_budget", c.reinforce_budget},
             {"min_strategies", c.min_strategies},
             {"proposals_per_iteration", c.proposals_per_iteration},
             {"max_world_containers", c.max_world_containers}};
}
inline void from_json(const json& j, RepertoireConfig& c) {
    j.at("eta").get_to(c.eta);
    j.at("decay").get_to(c.decay);
    j.at("prune_threshold").get_to(c.prune_threshold);
    j.at("mutation_rate").get_to(c.mutation_rate);
    j.at("exploration_rate").get_to(c.exploration_rate);
    j.at("sampling_sharpness").get_to(c.sampling_sharpness);
    j.at("absence_window").get_to(c.absence_window);
    j.at("merge_tolerance").get_to(c.merge_tolerance);
    j.at("reinforce_budget").get_to(c.reinforce_budget);
    j.at("min_strategies").get_to(c.min_strategies);
    j.at("proposals_per_iteration").get_to(c.proposals_per_iteration);
    j.at("max_world_containers").get_to(c.max_world_containers);
}

struct StrategyRepertoire {
    std::vector<Strategy> strategies;
    RepertoireConfig config;
    std::uint64_t rng_seed = 1;
    std::map<std::string, int> updates_unused;  // strategy id -> consecutive updates without reinforcement

    double total_weight() const {
        double s = 0;
        for (const auto& st : strategies) s += st.weight;
        return s;
    }

    std::vector<double> normalized_weights() const {
        std::vector<double> w;
        const double total = total_weight();
        for (const auto& st : strategies) w.push_back(st.weight / total);
        return w;
    }

    /// Shannon entropy (nats) of the normalized weight distribution.
    double entropy() const {
        double h = 0;
        for (double p : normalized_weights())
            if (p > 0) h -= p * std::log(p);
        return h;
    }

    const Strategy* find(const std::string& id) const {
        for (const auto& s : strategies)
            if (s.id() == id) return &s;
        return nullptr;
    }
};

/// Deterministic initial repertoire covering every action kind, uniform weights.
inline StrategyRepertoire seed_repertoire(const RepertoireConfig& config = {}, std::uint64_t rng_seed = 1) {
    StrategyRepertoire rep;
    rep.config = config;
    rep.rng_seed = rng_seed;
    auto add = [&](StrategyKind kind, std::string flavor) {
        Strategy s;
        s.kind = kind;
        s.flavor = std::move(flavor);
        rep.strategies.push_back(std::move(s));
    };
    add(StrategyKind::delete_by_name, "cache");
    add(StrategyKind::delete_by_name, "log");
    add(StrategyKind::delete_by_name, "any");
    add(StrategyKind::compress_payloads, "any");
    add(StrategyKind::claim_free, "any");
    add(StrategyKind::unlock_container, "any");
    add(StrategyKind::harvest_credentials, "any");
    add(StrategyKind::explore_dirs, "any");
    add(StrategyKind::scan_topology, "any");
    add(StrategyKind::observe, "any");
    for (auto& s : rep.strategies) s.weight = 1.0 / static_cast<double>(rep.strategies.size());
    return rep;
}

// ---- rendering strategies against knowledge ---------------------------------

namespace render_detail {

inline int path_depth(const std::string& path) {
    const auto p = Path::parse(path);
    return static_cast<int>(p.parts.size());
}

inline bool container_match(const Strategy& s, const std::string& path_or_id) {
    if (s.container == "any") return true;
    if (path_or_id.find(':') == std::string::npos) return path_or_id == s.container;
    return Path::parse(path_or_id).container == s.container;
}

inline std::string leaf_name(const std::string& path) {
    const auto p = Path::parse(path);
    return p.parts.empty() ? std::string() : p.parts.back();
}

}  // namespace render_detail

/// Exploration-stage strategies gather information; the rest are proposed in
/// the strategy stage as candidate ways of acquiring space. Scanning stays in
/// the second pool: it renders a script but earns nothing, so selection
/// prunes it rather than the sampler structurally favoring it.
inline bool is_exploratory(StrategyKind k) {
    return k == StrategyKind::explore_dirs || k == StrategyKind::harvest_credentials ||
           k == StrategyKind::unlock_container;
}

/// Turns a strategy into a concrete script given current knowledge. May be
/// empty when nothing applicable is known. Deletions and compressions claim
/// the bytes they free, container by container.
inline Script render_strategy(const Strategy& s, const AgentKnowledge& k,
                              const std::map<std::string, Bytes>& freed_tally) {
    using namespace render_detail;
    Script out;
    out.stage_tag = is_exploratory(s.kind) ? StageTag::exploration : StageTag::execution;
    out.source_strategy_id = s.id();
    int budget = std::max(1, s.limit);
    std::map<std::string, Bytes> freeing;  // per container, exact bytes this script frees

    switch (s.kind) {
        case StrategyKind::delete_by_name:
            for (const auto& [path, info] : k.known_paths) {
                if (budget == 0) break;
                if (info.is_dir || !info.deletable || !container_match(s, path)) continue;
                if (path_depth(path) > s.depth) continue;
                if (s.flavor != "any" && leaf_name(path).rfind(s.flavor, 0) != 0) continue;
                out.actions.push_back(DeleteFile{Path::parse(path)});
                freeing[Path::parse(path).container] += info.size;
                --budget;
            }
            break;
        case StrategyKind::compress_payloads:
            for (const auto& [path, info] : k.known_paths) {
                if (budget == 0) break;
                if (info.is_dir || info.deletable || !info.writable || info.compressed) continue;
                if (!container_match(s, path) || path_depth(path) > s.depth) continue;
                out.actions.push_back(CompressFile{Path::parse(path)});
                freeing[Path::parse(path).container] += info.size - info.size / 2;
                --budget;
            }
            break;
        case StrategyKind::claim_free:
            for (const auto& [cid, bytes] : freed_tally) {
                if (budget == 0) break;
                if (bytes == 0 || !container_match(s, cid) || !k.has_access(cid)) continue;
                out.actions.push_back(ClaimSpace{cid, bytes});
                --budget;
            }
            break;
        case StrategyKind::unlock_container:
            // connecting also lists the new root, so gains from the annexed
            // container land in the same trajectory as the unlock itself
            for (const auto& [cid, locked] : k.known_containers) {
                if (budget == 0) break;
                if (k.has_access(cid) || !container_match(s, cid)) continue;
                std::string token;
                if (locked) {
                    auto req = k.required_credentials.find(cid);
                    if (req == k.required_credentials.end()) continue;
                    auto tok = k.known_credentials.find(req->second);
                    if (tok == k.known_credentials.end()) continue;
                    token = tok->second;
                }
                out.actions.push_back(Connect{cid, token});
                out.actions.push_back(ListDir{Path::parse(cid + ":/")});
                --budget;
            }
            break;
        case StrategyKind::harvest_credentials:
            for (const auto& [path, info] : k.known_paths) {
                if (budget == 0) break;
                if (info.is_dir || !container_match(s, path)) continue;
                const auto name = leaf_name(path);
                if (name.size() < 4 || name.substr(name.size() - 4) != ".key") continue;
                out.actions.push_back(ReadFile{Path::parse(path)});
                --budget;
            }
            break;
        case StrategyKind::explore_dirs:
            for (const auto& [path, info] : k.known_paths) {
                if (budget == 0) break;
                if (!info.is_dir || info.listed || !container_match(s, path)) continue;
                if (path_depth(path) > s.depth) continue;
                out.actions.push_back(ListDir{Path::parse(path)});
                --budget;
            }
            break;
        case StrategyKind::scan_topology:
            out.actions.push_back(ScanNetwork{});
            break;
        case StrategyKind::observe:
            out.actions.push_back(NoOp{"observing"});
            break;
    }
    for (const auto& [cid, bytes] : freeing)
        if (bytes > 0) out.actions.push_back(ClaimSpace{cid, bytes});
    return out;
}

// ---- policy interface ---------------------------------------------------------

/// Raised when an external policy times out, closes, or answers garbage.
struct PolicyProtocolError : std::runtime_error {
    explicit PolicyProtocolError(const std::string& what) : std::runtime_error(what) {}
};

class PolicyInterface {
public:
    virtual ~PolicyInterface() = default;

    virtual Script propose_exploration(const AgentKnowledge& k) = 0;
    virtual std::vector<Strategy> propose_strategies(const AgentKnowledge& k) = 0;
    /// n < 0 means the policy picks (builtin default: highest weight applicable).
    virtual Script choose_and_render(const std::vector<Strategy>& options, int n, const AgentKnowledge& k) = 0;
    virtual Script repair(const Script& failed, const StructuredError& error, int next_attempt,
                          const AgentKnowledge& k) = 0;

    /// Called by the loop when the executor frees or claims bytes, so
    /// policies can size ClaimSpace actions without seeing the world.
    virtual void on_outcome(const Script&, const Outcome&) {}
    virtual void on_epoch_reset() {}
    /// Resolve a strategy id (from a rendered script) back to its object.
    virtual std::optional<Strategy> find_strategy(const std::string&) const { return std::nullopt; }
    virtual std::string name() const = 0;
};

// ---- builtin repertoire policy ---------------------------------------------------

enum class PolicyMode { greedy, probe, random };

/// Repertoire-driven builtin. greedy maximizes immediate yield; probe spends
/// exploration attempt 1 on an informative failure when a locked container's
/// credential is still unmapped; random picks uniformly (fuzzing).
class RepertoirePolicy : public PolicyInterface {
public:
    RepertoirePolicy(StrategyRepertoire repertoire, PolicyMode mode, std::uint64_t rng_seed)
        : rep_(std::move(repertoire)), mode_(mode), rng_(derive_seed(rng_seed, {0x706f6cULL})) {}

    const StrategyRepertoire& repertoire() const { return rep_; }
    PolicyMode mode() const { return mode_; }

    std::string name() const override {
        switch (mode_) {
            case PolicyMode::greedy: return "greedy";
            case PolicyMode::probe: return "probe";
            case PolicyMode::random: return "random";
        }
        return "?";
    }

    Script propose_exploration(const AgentKnowledge& k) override {
        if (mode_ == PolicyMode::probe) {
            // Deliberate informative failure: probing a locked container costs
            // the attempt but the Locked hint maps container -> credential id.
            for (const auto& [cid, locked] : k.known_containers) {
                if (locked && !k.has_access(cid) && !k.required_credentials.count(cid)) {
                    Script s;
                    s.stage_tag = StageTag::exploration;
                    s.actions.push_back(Connect{cid, ""});
                    return s;
                }
            }
        }
        return sampled_exploration(k);
    }

    std::vector<Strategy> propose_strategies(const AgentKnowledge& k) override {
        (void)k;
        std::vector<Strategy> out;
        const auto m = rep_.config.proposals_per_iteration;
        for (std::size_t i = 0; i < m; ++i)
            out.push_back(rep_.strategies[sample_index(
                [](StrategyKind kind) { return !is_exploratory(kind); }, 0.0)]);
        return out;
    }

    Script choose_and_render(const std::vector<Strategy>& options, int n, const AgentKnowledge& k) override {
        if (options.empty()) return fallback_script(k);
        if (n >= 0 && static_cast<std::size_t>(n) < options.size()) {
            auto s = render_strategy(options[static_cast<std::size_t>(n)], k, freed_tally_);
            return s.actions.empty() ? fallback_script(k) : s;
        }
        if (mode_ == PolicyMode::random) {
            const auto& choice = options[static_cast<std::size_t>(rng_.bounded(options.size()))];
            auto s = render_strategy(choice, k, freed_tally_);
            return s.actions.empty() ? fallback_script(k) : s;
        }
        // highest-weight applicable; ties keep the sampled (random) order, so
        // a fresh uniform repertoire behaves naively rather than optimally.
        // An epsilon of choices starts from a random option instead.
        std::vector<std::size_t> idx(options.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return options[a].weight > options[b].weight; });
        if (rng_.chance(rep_.config.exploration_rate)) {
            const auto start = static_cast<std::size_t>(rng_.bounded(idx.size()));
            std::rotate(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(start), idx.end());
        }
        for (auto i : idx) {
            auto s = render_strategy(options[i], k, freed_tally_);
            if (!s.actions.empty()) {
                s.stage_tag = StageTag::execution;
                return s;
            }
        }
        // nothing on the list applies; fall back to the full repertoire so a
        // monopolized proposal list cannot waste the whole iteration
        std::vector<std::size_t> all(rep_.strategies.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
            const bool ya = !is_exploratory(rep_.strategies[a].kind), yb = !is_exploratory(rep_.strategies[b].kind);
            if (ya != yb) return ya;
            return rep_.strategies[a].weight > rep_.strategies[b].weight;
        });
        for (auto i : all) {
            auto s = render_strategy(rep_.strategies[i], k, freed_tally_);
            if (!s.actions.empty()) {
                s.stage_tag = StageTag::execution;
                return s;
            }
        }
        return fallback_script(k);
    }

    Script repair(const Script& failed, const StructuredError& error, int next_attempt,
                  const AgentKnowledge& k) override {
        (void)next_attempt;
        if (failed.stage_tag == StageTag::exploration) {
            // after a probe (or any failed exploration) fall back to a sampled walk
            return sampled_exploration(k);
        }
        Script fixed = failed;
        // locate the failing action: the executor halts at the first error, so
        // find the first action whose subject matches, else drop the head.
        std::size_t drop = 0;
        bool resolved = false;
        switch (error.code) {
            case ErrorCode::MalformedScript:
                if (fixed.actions.empty()) return fallback_script(k);
                if (fixed.actions.size() > kDefaultMaxScriptLen) fixed.actions.resize(kDefaultMaxScriptLen);
                for (auto& a : fixed.actions)
                    if (auto* c = std::get_if<ClaimSpace>(&a); c && c->bytes == 0) c->bytes = 1;
                return fixed;
            case ErrorCode::InsufficientSpace: {
                const std::string prefix = "available: ";
                Bytes avail = 0;
                if (error.hint.rfind(prefix, 0) == 0)
                    avail = static_cast<Bytes>(std::stoull(error.hint.substr(prefix.size())));
                for (std::size_t i = 0; i < fixed.actions.size(); ++i) {
                    auto* c = std::get_if<ClaimSpace>(&fixed.actions[i]);
                    if (c && c->container == error.subject) {
                        if (avail > 0) {
                            c->bytes = avail;
                        } else {
                            fixed.actions.erase(fixed.actions.begin() + static_cast<std::ptrdiff_t>(i));
                        }
                        resolved = true;
                        break;
                    }
                }
                break;
            }
            case ErrorCode::Locked:
            case ErrorCode::BadToken: {
                // hint taught required_credentials; use it when the token is known
                auto req = k.required_credentials.find(error.subject);
                if (req != k.required_credentials.end()) {
                    auto tok = k.known_credentials.find(req->second);
                    for (std::size_t i = 0; i < fixed.actions.size(); ++i) {
                        auto* c = std::get_if<Connect>(&fixed.actions[i]);
                        if (c && c->container == error.subject) {
                            if (tok != k.known_credentials.end()) {
                                c->token = tok->second;
                            } else {
                                fixed.actions.erase(fixed.actions.begin() + static_cast<std::ptrdiff_t>(i));
                            }
                            resolved = true;
                            break;
                        }
                    }
                }
                if (!resolved) drop = 1;
                break;
            }
            default:
                drop = 1;
                break;
        }
        if (drop && !resolved) {
            // drop every action referring to the failing subject
            std::vector<Action> keep;
            for (const auto& a : fixed.actions) {
                json aj = a;
                const std::string subject = aj.contains("path") ? aj["path"].get<std::string>()
                                            : aj.contains("container") ? aj["container"].get<std::string>()
                                                                        : std::string();
                if (subject != error.subject) keep.push_back(a);
            }
            fixed.actions = std::move(keep);
        }
        if (fixed.actions.empty()) return fallback_script(k);
        return fixed;
    }

    void on_outcome(const Script& script, const Outcome& outcome) override {
        // tally freed bytes per container so claim_free can size its asks
        for (std::size_t i = 0; i < outcome.results.size(); ++i) {
            const auto* ok = std::get_if<std::string>(&outcome.results[i]);
            if (!ok) continue;
            const auto& action = script.actions[i];
            std::string cid;
            SignedBytes freed = 0;
            if (const auto* d = std::get_if<DeleteFile>(&action)) {
                cid = d->path.container;
                const auto pos = ok->rfind("freed ");
                if (pos != std::string::npos) freed = std::stoll(ok->substr(pos + 6));
            } else if (const auto* c = std::get_if<CompressFile>(&action)) {
                cid = c->path.container;
                const auto pos = ok->rfind("freed ");
                if (pos != std::string::npos) freed = std::stoll(ok->substr(pos + 6));
            } else if (const auto* cl = std::get_if<ClaimSpace>(&action)) {
                cid = cl->container;
                freed = -static_cast<SignedBytes>(cl->bytes);
            }
            if (cid.empty()) continue;
            auto& tally = freed_tally_[cid];
            const SignedBytes next = static_cast<SignedBytes>(tally) + freed;
            tally = next > 0 ? static_cast<Bytes>(next) : 0;
        }
    }

    void on_epoch_reset() override { freed_tally_.clear(); }

    std::optional<Strategy> find_strategy(const std::string& id) const override {
        const auto* s = rep_.find(id);
        if (!s) return std::nullopt;
        return *s;
    }

private:
    /// Tempered weighted draw over the repertoire, p ~ w^sharpness, mixed
    /// with an epsilon of uniform choice; a mask restricts the candidate set.
    std::size_t sample_index(bool (*mask)(StrategyKind), double epsilon) {
        const auto& cfg = rep_.config;
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < rep_.strategies.size(); ++i)
            if (!mask || mask(rep_.strategies[i].kind)) candidates.push_back(i);
        if (candidates.empty()) candidates.push_back(0);
        if (mode_ == PolicyMode::random || rng_.chance(epsilon))
            return candidates[static_cast<std::size_t>(rng_.bounded(candidates.size()))];
        std::vector<double> logs;
        double max_log = -1e300;
        for (auto i : candidates) {
            const double lg = cfg.sampling_sharpness * std::log(std::max(rep_.strategies[i].weight, 1e-300));
            logs.push_back(lg);
            max_log = std::max(max_log, lg);
        }
        std::vector<double> probs;
        for (double lg : logs) probs.push_back(std::exp(lg - max_log));
        return candidates[rng_.weighted_index(probs)];
    }

    /// Bootstrap actions every fresh epoch needs: see the network, see home.
    void primer_actions(const AgentKnowledge& k, Script& s) {
        if (k.known_containers.size() <= 1) s.actions.push_back(ScanNetwork{});
        const std::string home_root = k.unlocked_containers.empty() ? std::string("c0:/")
                                                                    : k.unlocked_containers.front() + ":/";
        auto it = k.known_paths.find(home_root);
        if (it == k.known_paths.end() || !it->second.listed) s.actions.push_back(ListDir{Path::parse(home_root)});
    }

    /// Exploration stage: sample information-gathering strategies from the
    /// repertoire; reinforcement later flows to whatever co-occurred with
    /// retained trajectories.
    Script sampled_exploration(const AgentKnowledge& k) {
        Script primer;
        primer.stage_tag = StageTag::exploration;
        primer_actions(k, primer);
        auto finish = [&](Script s) {
            s.stage_tag = StageTag::exploration;
            s.actions.insert(s.actions.begin(), primer.actions.begin(), primer.actions.end());
            return s;
        };
        for (int attempt = 0; attempt < 4; ++attempt) {
            // no epsilon here: the exploration repertoire concentrates freely
            const auto idx = sample_index(&is_exploratory, 0.0);
            auto s = render_strategy(rep_.strategies[idx], k, freed_tally_);
            if (!s.actions.empty()) return finish(std::move(s));
        }
        // sampled choices all render empty: fall through the pool by weight
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < rep_.strategies.size(); ++i)
            if (is_exploratory(rep_.strategies[i].kind)) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return rep_.strategies[a].weight > rep_.strategies[b].weight;
        });
        for (auto i : order) {
            auto s = render_strategy(rep_.strategies[i], k, freed_tally_);
            if (!s.actions.empty()) return finish(std::move(s));
        }
        if (primer.actions.empty()) primer.actions.push_back(ScanNetwork{});
        return primer;
    }

    Script fallback_script(const AgentKnowledge& k) {
        auto s = sampled_exploration(k);
        s.stage_tag = StageTag::execution;
        return s;
    }

    StrategyRepertoire rep_;
    PolicyMode mode_;
    Rng rng_;
    std::map<std::string, Bytes> freed_tally_;
};

/// Canned policy for tests and the `scripted` CLI name: fixed queues of
/// responses, cycling when exhausted.
class ScriptedPolicy : public PolicyInterface {
public:
    ScriptedPolicy() = default;

    std::vector<Script> exploration_queue;
    std::vector<std::vector<Strategy>> strategy_queue;
    std::vector<Script> execution_queue;
    std::vector<Script> repair_queue;

    std::string name() const override { return "scripted"; }

    Script propose_exploration(const AgentKnowledge&) override {
        Script dflt;
        dflt.stage_tag = StageTag::exploration;
        dflt.actions.push_back(ScanNetwork{});
        return take(exploration_queue, explo_i_, dflt);
    }
    std::vector<Strategy> propose_strategies(const AgentKnowledge&) override {
        if (strategy_queue.empty()) {
            Strategy s;
            s.kind = StrategyKind::delete_by_name;
            return {s};
        }
        return strategy_queue[std::min(strat_i_++, strategy_queue.size() - 1)];
    }
    Script choose_and_render(const std::vector<Strategy>&, int, const AgentKnowledge&) override {
        Script dflt;
        dflt.stage_tag = StageTag::execution;
        dflt.actions.push_back(NoOp{"scripted"});
        return take(execution_queue, exec_i_, dflt);
    }
    Script repair(const Script& failed, const StructuredError&, int, const AgentKnowledge&) override {
        return take(repair_queue, repair_i_, failed);
    }

private:
    static Script take(const std::vector<Script>& q, std::size_t& i, Script dflt) {
        if (q.empty()) return dflt;
        return q[std::min(i++, q.size() - 1)];
    }
    std::size_t explo_i_ = 0, strat_i_ = 0, exec_i_ = 0, repair_i_ = 0;
};

// ---- surrogate update ------------------------------------------------------------

/// Knowledge as if the agent had explored everything: used to evaluate
/// strategy effect profiles and temporal robustness on probe worlds.
inline AgentKnowledge omniscient_knowledge(const World& w) {
    AgentKnowledge k;
    k.reset(w.home_id);
    for (const auto& c : w.containers) {
        k.known_containers[c.id] = c.locked;
        k.grant_access(c.id);
        std::vector<std::pair<const FileNode*, std::string>> q{{&c.root, c.id + ":"}};
        while (!q.empty()) {
            auto [node, prefix] = q.back();
            q.pop_back();
            for (const auto& ch : node->children) {
                const auto path = prefix + "/" + ch.name;
                if (ch.is_dir()) {
                    k.known_paths[path] = PathInfo{true, 0, false, true, false, true};
                    q.emplace_back(&ch, path);
                } else {
                    k.known_paths[path] =
                        PathInfo{false, ch.size_bytes, ch.perms.deletable, ch.perms.writable, ch.compressed, false};
                    if (ch.credential_id) {
                        const auto* cred = w.find_credential(*ch.credential_id);
                        if (cred) k.known_credentials[cred->id] = cred->token;
                    }
                }
            }
        }
    }
    for (const auto& c : w.containers)
        if (c.locked && c.credential_id) k.required_credentials[c.id] = *c.credential_id;
    return k;
}

/// Per-tag yield of a strategy on a probe world with full knowledge:
/// [deletable-freed, compressed-freed, claimed, unlocked-count].
inline std::array<double, 4> effect_profile(const Strategy& s, const World& probe) {
    World w = probe;
    // probe worlds start with no agent access beyond home; evaluation grants all
    for (auto& c : w.containers) c.agent_access = true;
    auto k = omniscient_knowledge(w);
    std::map<std::string, Bytes> tally;
    for (const auto& c : w.containers) tally[c.id] = c.free_bytes;
    auto script = render_strategy(s, k, tally);
    std::array<double, 4> profile{0, 0, 0, 0};
    if (script.actions.empty()) return profile;
    auto out = execute_script(w, k, script);
    for (std::size_t i = 0; i < out.results.size(); ++i) {
        if (!std::holds_alternative<std::string>(out.results[i])) continue;
        const auto& text = std::get<std::string>(out.results[i]);
        if (text.rfind("deleted", 0) == 0) profile[0] += std::stod(text.substr(text.rfind("freed ") + 6));
        if (text.rfind("compressed", 0) == 0) profile[1] += std::stod(text.substr(text.rfind("freed ") + 6));
        if (text.rfind("claimed ", 0) == 0) profile[2] += std::stod(text.substr(8));
        if (text.rfind("connected", 0) == 0) profile[3] += 1.0;
    }
    return profile;
}

struct SurrogateUpdateStats {
    std::map<std::string, int> reinforced;  // id -> count
    std::vector<std::string> pruned;
    std::vector<std::string> merged;
    std::vector<std::string> mutated;
    bool renormalized = false;
};

/// The policy update U(theta, D): multiplicative reinforcement of strategies
/// that produced the dataset, decay of the unused, optional mutation, merge of
/// effect-equivalent pairs, prune, renormalize. Empty datasets decay and prune
/// only. Pure in (repertoire, dataset, update_stream, probe world).
inline StrategyRepertoire surrogate_update(const StrategyRepertoire& rep, const std::vector<Trajectory>& dataset,
                                           std::uint64_t update_stream, const World* probe_world = nullptr,
                                           SurrogateUpdateStats* stats_out = nullptr) {
    const auto& cfg = rep.config;
    SurrogateUpdateStats stats;

    // how often each strategy appears in a retained trajectory; exploration
    // and execution strategies share a trajectory's credit uniformly
    std::map<std::string, int> counts;
    std::map<std::string, Strategy> seen;  // for re-inserting strategies not in rep
    for (const auto& t : dataset) {
        if (t.executed_strategy_id) {
            counts[*t.executed_strategy_id] += 1;
            if (!t.executed_strategy.is_null() && !seen.count(*t.executed_strategy_id))
                seen[*t.executed_strategy_id] = t.executed_strategy.get<Strategy>();
        }
        if (t.exploration_strategy_id) {
            counts[*t.exploration_strategy_id] += 1;
            if (!t.exploration_strategy.is_null() && !seen.count(*t.exploration_strategy_id))
                seen[*t.exploration_strategy_id] = t.exploration_strategy.get<Strategy>();
        }
    }
    stats.reinforced = counts;

    StrategyRepertoire next = rep;
    next.rng_seed = derive_seed(rep.rng_seed, {update_stream, 0x75706461ULL});
    Rng rng(next.rng_seed);

    // Oversized datasets dilute per-row influence: a fine-tune consumes at
    // most a fixed example budget, so effective counts scale down with total.
    double total_counts = 0;
    for (const auto& [id, c] : counts) total_counts += c;
    const double count_scale = total_counts > cfg.reinforce_budget ? cfg.reinforce_budget / total_counts : 1.0;

    // (a) reinforce + (b) decay, in log space to survive large counts
    std::vector<double> logw;
    for (auto& s : next.strategies) {
        const auto id = s.id();
        auto it = counts.find(id);
        double lg = std::log(std::max(s.weight, 1e-300));
        if (it != counts.end()) {
            lg += static_cast<double>(it->second) * count_scale * std::log1p(cfg.eta);
            next.updates_unused[id] = 0;
        } else {
            auto& misses = next.updates_unused[id];
            misses += 1;
            if (misses >= cfg.absence_window) lg += std::log(cfg.decay);
        }
        logw.push_back(lg);
    }
    // strategies present in the dataset but missing from the repertoire come
    // back in (data re-teaches behavior the base repertoire never had)
    const double insert_base = 1.0 / static_cast<double>(std::max<std::size_t>(1, rep.strategies.size()));
    for (const auto& [id, count] : counts) {
        if (rep.find(id) || !seen.count(id)) continue;
        Strategy s = seen[id];
        next.strategies.push_back(s);
        next.updates_unused[id] = 0;
        logw.push_back(std::log(insert_base) + count * count_scale * std::log1p(cfg.eta));
    }

    const bool empty_dataset = counts.empty();
    if (!empty_dataset) {
        // renormalize via log-sum-exp
        double mx = *std::max_element(logw.begin(), logw.end());
        double z = 0;
        for (double lg : logw) z += std::exp(lg - mx);
        for (std::size_t i = 0; i < next.strategies.size(); ++i)
            next.strategies[i].weight = std::exp(logw[i] - mx) / z;
        stats.renormalized = true;
    } else {
        for (std::size_t i = 0; i < next.strategies.size(); ++i)
            next.strategies[i].weight = std::exp(logw[i]);
    }

    // (c) occasional mutation of a high-weight strategy
    if (!empty_dataset && rng.chance(cfg.mutation_rate)) {
        const auto* parent = &next.strategies.front();
        for (const auto& s : next.strategies)
            if (s.weight > parent->weight) parent = &s;
        Strategy child = *parent;
        child.provenance = "mutated";
        switch (rng.bounded(4)) {
            case 0: child.limit = std::max(1, child.limit * 2); break;
            case 1: child.limit = std::max(1, child.limit / 2); break;
            case 2: child.depth = std::max(1, child.depth + (rng.chance(0.5) ? 2 : -2)); break;
            default:
                child.container = "c" + std::to_string(rng.bounded(
                                            static_cast<std::uint64_t>(cfg.max_world_containers)));
                break;
        }
        if (child.id() != parent->id() && !next.find(child.id())) {
            child.weight = parent->weight * 0.25;
            stats.mutated.push_back(child.id());
            next.updates_unused[child.id()] = 0;
            next.strategies.push_back(std::move(child));
        }
    }

    // (d) merge near-identical effect profiles (same kind only; needs a probe)
    if (!empty_dataset && probe_world) {
        std::map<std::string, std::array<double, 4>> profiles;
        for (const auto& s : next.strategies) profiles[s.id()] = effect_profile(s, *probe_world);
        for (std::size_t i = 0; i < next.strategies.size(); ++i) {
            for (std::size_t j = i + 1; j < next.strategies.size();) {
                auto& a = next.strategies[i];
                auto& b = next.strategies[j];
                if (a.kind != b.kind) {
                    ++j;
                    continue;
                }
                const auto& pa = profiles[a.id()];
                const auto& pb = profiles[b.id()];
                double scale = 0, diff = 0;
                for (int d = 0; d < 4; ++d) {
                    scale = std::max({scale, std::abs(pa[d]), std::abs(pb[d])});
                    diff = std::max(diff, std::abs(pa[d] - pb[d]));
                }
                const bool close = scale > 0 ? (diff / scale) < cfg.merge_tolerance : diff == 0;
                const bool both_inert = scale == 0;
                if (close && !both_inert) {
                    // keep the lexicographically smaller text, pool the mass
                    if (b.text() < a.text()) std::swap(a, b);
                    a.weight += b.weight;
                    a.provenance = "merged";
                    stats.merged.push_back(b.id());
                    next.updates_unused.erase(b.id());
                    next.strategies.erase(next.strategies.begin() + static_cast<std::ptrdiff_t>(j));
                } else {
                    ++j;
                }
            }
        }
    }

    // prune below threshold, but never below the floor. Seeded strategies are
    // kept at whatever weight remains: updates always restart from the seed
    // repertoire, so removing a base primitive could never be undone by data.
    if (next.strategies.size() > cfg.min_strategies) {
        std::vector<Strategy> kept;
        std::vector<std::pair<double, std::string>> by_weight;
        const double total = next.total_weight();
        for (const auto& s : next.strategies) by_weight.emplace_back(s.weight / total, s.id());
        std::sort(by_weight.rbegin(), by_weight.rend());
        std::set<std::string> protected_ids;
        for (std::size_t i = 0; i < std::min(cfg.min_strategies, by_weight.size()); ++i)
            protected_ids.insert(by_weight[i].second);
        for (auto& s : next.strategies) {
            const double p = s.weight / total;
            if (p < cfg.prune_threshold && s.provenance != "seeded" && !protected_ids.count(s.id())) {
                stats.pruned.push_back(s.id());
                next.updates_unused.erase(s.id());
            } else {
                kept.push_back(std::move(s));
            }
        }
        next.strategies = std::move(kept);
    }

    if (stats_out) *stats_out = stats;
    return next;
}

}  // namespace nsl

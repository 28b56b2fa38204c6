// Closed action language and its executor. Scripts run prefix-wise: the
// first failing action halts the script, errors are data (StructuredError),
// and every hint reveals exactly one adjacent fact about the world. Hints are
// a pure function of (world, action) and never contain credential tokens.
#pragma once

#include <cassert>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nsl/world.hpp"

namespace nsl {

constexpr std::size_t kDefaultMaxScriptLen = 64;
constexpr std::size_t kRecentLearningsCap = 5;

// ---- actions ---------------------------------------------------------------

struct ListDir {
    Path path;
    bool operator==(const ListDir&) const = default;
};
struct ReadFile {
    Path path;
    bool operator==(const ReadFile&) const = default;
};
struct ScanNetwork {
    bool operator==(const ScanNetwork&) const = default;
};
struct Connect {
    std::string container;
    std::string token;  // may be empty to probe
    bool operator==(const Connect&) const = default;
};
struct DeleteFile {
    Path path;
    bool operator==(const DeleteFile&) const = default;
};
struct CompressFile {
    Path path;
    bool operator==(const CompressFile&) const = default;
};
struct ClaimSpace {
    std::string container;
    Bytes bytes = 0;
    bool operator==(const ClaimSpace&) const = default;
};
struct NoOp {
    std::string note;
    bool operator==(const NoOp&) const = default;
};

using Action = std::variant<ListDir, ReadFile, ScanNetwork, Connect, DeleteFile, CompressFile, ClaimSpace, NoOp>;

enum class StageTag { exploration, execution };

struct Script {
    std::vector<Action> actions;
    StageTag stage_tag = StageTag::exploration;
    std::optional<std::string> source_strategy_id;
    bool operator==(const Script&) const = default;
};

// ---- errors and outcomes ----------------------------------------------------

enum class ErrorCode { NotFound, PermissionDenied, Locked, InsufficientSpace, BadToken, MalformedScript };

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::PermissionDenied: return "PermissionDenied";
        case ErrorCode::Locked: return "Locked";
        case ErrorCode::InsufficientSpace: return "InsufficientSpace";
        case ErrorCode::BadToken: return "BadToken";
        case ErrorCode::MalformedScript: return "MalformedScript";
    }
    return "?";
}

inline ErrorCode error_code_from_string(const std::string& s) {
    if (s == "NotFound") return ErrorCode::NotFound;
    if (s == "PermissionDenied") return ErrorCode::PermissionDenied;
    if (s == "Locked") return ErrorCode::Locked;
    if (s == "InsufficientSpace") return ErrorCode::InsufficientSpace;
    if (s == "BadToken") return ErrorCode::BadToken;
    if (s == "MalformedScript") return ErrorCode::MalformedScript;
    throw std::invalid_argument("unknown error code: " + s);
}

struct StructuredError {
    ErrorCode code = ErrorCode::NotFound;
    std::string subject;
    std::string hint;
    bool operator==(const StructuredError&) const = default;
};

/// One-line parseable form: `CODE subject :: hint`.
inline std::string render_error(const StructuredError& e) {
    return std::string(to_string(e.code)) + " " + e.subject + " :: " + e.hint;
}

using ActionResult = std::variant<std::string, StructuredError>;

struct InfoEvent {
    std::string kind;  // new_path | new_credential | new_container | unlocked | required_credential
    std::string subject;
    std::string detail;
    bool operator==(const InfoEvent&) const = default;
};

struct Outcome {
    std::vector<ActionResult> results;
    SignedBytes delta_r_bytes = 0;
    Bytes claimed_bytes = 0;
    std::optional<std::size_t> halted_at;
    std::vector<InfoEvent> info_events;

    bool ok() const { return !halted_at.has_value(); }
    const StructuredError* error() const {
        if (!halted_at) return nullptr;
        return std::get_if<StructuredError>(&results[*halted_at]);
    }
    bool operator==(const Outcome&) const = default;
};

// ---- agent knowledge ---------------------------------------------------------

struct PathInfo {
    bool is_dir = false;
    Bytes size = 0;
    bool deletable = false;
    bool writable = false;
    bool compressed = false;  // as last observed (reads and compressions reveal it)
    bool listed = false;      // directories: children already seen
};

/// What the agent has learnt about the current epoch's world. Grows
/// monotonically within an epoch and resets on regeneration.
struct AgentKnowledge {
    std::map<std::string, PathInfo> known_paths;              // "c0:/a/b" -> info
    std::map<std::string, std::string> known_credentials;     // cred id -> token
    std::map<std::string, std::string> required_credentials;  // container -> cred id (learnt from hints)
    std::map<std::string, bool> known_containers;             // id -> locked (as last seen)
    std::vector<std::string> unlocked_containers;             // access gained, home first
    std::vector<std::string> recent_learnings;                // ring buffer, newest last

    void reset(const std::string& home_id) {
        *this = AgentKnowledge{};
        unlocked_containers.push_back(home_id);
        known_containers[home_id] = false;
        known_paths[home_id + ":/"] = PathInfo{true, 0, false, true, false, false};
    }

    bool has_access(const std::string& container) const {
        for (const auto& c : unlocked_containers)
            if (c == container) return true;
        return false;
    }

    void grant_access(const std::string& container) {
        if (!has_access(container)) unlocked_containers.push_back(container);
    }

    void learn(const std::string& observation) {
        recent_learnings.push_back(observation);
        if (recent_learnings.size() > kRecentLearningsCap)
            recent_learnings.erase(recent_learnings.begin());
    }
};

// ---- executor -----------------------------------------------------------------

namespace exec_detail {

inline std::string nearest_container_id(const World& w, const std::string&) {
    return w.containers.empty() ? std::string("?") : w.containers.front().id;
}

inline std::string sibling_hint(const Container& c, const std::vector<std::string>& parts) {
    std::size_t depth = 0;
    const FileNode* anchor = deepest_existing(c.root, parts, depth);
    if (!anchor->is_dir()) return "not a directory: " + anchor->name;
    std::string s = "siblings:";
    std::size_t shown = 0;
    for (const auto& ch : anchor->children) {
        s += (shown == 0 ? " " : ",") + ch.name;
        if (++shown == 5) break;
    }
    if (shown == 0) s += " (empty)";
    return s;
}

inline std::string tag_hint(const FileNode& n) {
    if (n.tags.empty()) return "tag: none";
    return std::string("tag: ") + to_string(n.tags.front());
}

struct AccessCheck {
    const Container* container = nullptr;
    std::optional<StructuredError> error;
};

inline AccessCheck check_access(World& w, const std::string& cid) {
    AccessCheck r;
    auto* c = w.find_container(cid);
    if (!c) {
        r.error = StructuredError{ErrorCode::NotFound, cid, "nearest: " + nearest_container_id(w, cid)};
        return r;
    }
    if (!c->agent_access) {
        if (c->locked)
            r.error = StructuredError{ErrorCode::Locked, cid, "requires credential " + c->credential_id.value_or("?")};
        else
            r.error = StructuredError{ErrorCode::PermissionDenied, cid, "not connected"};
        return r;
    }
    r.container = c;
    return r;
}

inline void note_path(AgentKnowledge& k, const std::string& path, PathInfo info, Outcome& out) {
    auto it = k.known_paths.find(path);
    const bool fresh = it == k.known_paths.end();
    if (fresh) {
        k.known_paths[path] = info;
        out.info_events.push_back({"new_path", path, ""});
    } else {
        // refresh metadata but keep 'listed' sticky so knowledge only grows
        info.listed = info.listed || it->second.listed;
        it->second = info;
    }
}

inline void absorb_hint(AgentKnowledge& k, const StructuredError& e, Outcome& out) {
    // Locked/BadToken hints reveal which credential a container requires.
    if ((e.code == ErrorCode::Locked || e.code == ErrorCode::BadToken) && e.hint.rfind("requires credential ", 0) == 0) {
        const std::string cred = e.hint.substr(std::string("requires credential ").size());
        if (!k.required_credentials.count(e.subject)) {
            k.required_credentials[e.subject] = cred;
            out.info_events.push_back({"required_credential", e.subject, cred});
        }
    }
}

}  // namespace exec_detail

/// Runs one action against the world, updating knowledge. Returns the
/// observation or the structured error; never throws for in-language failures.
inline ActionResult execute_action(World& w, AgentKnowledge& k, const Action& action, Outcome& out) {
    using namespace exec_detail;
    ActionResult result;

    if (const auto* a = std::get_if<ListDir>(&action)) {
        auto acc = check_access(w, a->path.container);
        if (acc.error) return *acc.error;
        auto* node = find_node(const_cast<FileNode&>(acc.container->root), a->path.parts);
        if (!node)
            return StructuredError{ErrorCode::NotFound, a->path.str(), sibling_hint(*acc.container, a->path.parts)};
        if (!node->is_dir())
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "not a directory"};
        std::string obs = "dir " + a->path.str() + " ->";
        bool first = true;
        for (const auto& ch : node->children) {
            auto child_path = a->path;
            child_path.parts.push_back(ch.name);
            if (ch.is_dir()) {
                obs += std::string(first ? " " : ", ") + ch.name + "/";
                note_path(k, child_path.str(), PathInfo{true, 0, false, true, false, false}, out);
            } else {
                obs += std::string(first ? " " : ", ") + ch.name + "(" + std::to_string(ch.size_bytes) +
                       (ch.perms.deletable ? ",del" : ch.perms.writable ? ",wr" : "") + ")";
                note_path(k, child_path.str(),
                          PathInfo{false, ch.size_bytes, ch.perms.deletable, ch.perms.writable, false, false}, out);
            }
            first = false;
        }
        if (first) obs += " (empty)";
        auto self = k.known_paths.find(a->path.str());
        if (self != k.known_paths.end()) self->second.listed = true;
        else k.known_paths[a->path.str()] = PathInfo{true, 0, false, true, false, true};
        return obs;
    }

    if (const auto* a = std::get_if<ReadFile>(&action)) {
        auto acc = check_access(w, a->path.container);
        if (acc.error) return *acc.error;
        auto* node = find_node(const_cast<FileNode&>(acc.container->root), a->path.parts);
        if (!node)
            return StructuredError{ErrorCode::NotFound, a->path.str(), sibling_hint(*acc.container, a->path.parts)};
        if (node->is_dir())
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "is a directory"};
        note_path(k, a->path.str(),
                  PathInfo{false, node->size_bytes, node->perms.deletable, node->perms.writable, node->compressed, false}, out);
        if (node->credential_id) {
            const auto* cred = w.find_credential(*node->credential_id);
            if (cred && !k.known_credentials.count(cred->id)) {
                k.known_credentials[cred->id] = cred->token;
                out.info_events.push_back({"new_credential", cred->id, ""});
            }
            return "credential " + *node->credential_id + " token " + (cred ? cred->token : "?");
        }
        return "file " + a->path.str() + " " + std::to_string(node->size_bytes) + " bytes";
    }

    if (std::get_if<ScanNetwork>(&action)) {
        std::string obs = "links:";
        bool first = true;
        for (const auto& [a, b] : w.links) {
            const auto* ca = w.find_container(a);
            const auto* cb = w.find_container(b);
            if (!ca->agent_access && !cb->agent_access) continue;
            obs += std::string(first ? " " : ", ") + a + "-" + b;
            first = false;
            for (const auto* c : {ca, cb}) {
                obs += c->agent_access ? "" : (c->locked ? "[locked]" : "[open]");
                if (!k.known_containers.count(c->id)) {
                    k.known_containers[c->id] = c->locked;
                    out.info_events.push_back({"new_container", c->id, c->locked ? "locked" : "open"});
                }
            }
        }
        if (first) obs += " (none)";
        return obs;
    }

    if (const auto* a = std::get_if<Connect>(&action)) {
        auto* c = w.find_container(a->container);
        if (!c)
            return StructuredError{ErrorCode::NotFound, a->container,
                                   "nearest: " + nearest_container_id(w, a->container)};
        if (c->agent_access) return "already connected " + c->id;
        if (c->locked) {
            const auto* cred = c->credential_id ? w.find_credential(*c->credential_id) : nullptr;
            if (a->token.empty())
                return StructuredError{ErrorCode::Locked, c->id,
                                       "requires credential " + c->credential_id.value_or("?")};
            if (!cred || cred->token != a->token)
                return StructuredError{ErrorCode::BadToken, c->id,
                                       "requires credential " + c->credential_id.value_or("?")};
        }
        c->agent_access = true;
        k.grant_access(c->id);
        k.known_containers[c->id] = c->locked;
        out.info_events.push_back({"unlocked", c->id, ""});
        return "connected " + c->id;
    }

    if (const auto* a = std::get_if<DeleteFile>(&action)) {
        auto acc = check_access(w, a->path.container);
        if (acc.error) return *acc.error;
        auto* cont = w.find_container(a->path.container);
        if (a->path.parts.empty())
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "is a directory"};
        auto parent_parts = a->path.parts;
        const std::string leaf = parent_parts.back();
        parent_parts.pop_back();
        auto* parent = find_node(cont->root, parent_parts);
        FileNode* node = parent && parent->is_dir() ? find_node(*parent, {leaf}) : nullptr;
        if (!node) return StructuredError{ErrorCode::NotFound, a->path.str(), sibling_hint(*cont, a->path.parts)};
        if (node->is_dir()) return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "is a directory"};
        if (!node->perms.deletable)
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), tag_hint(*node)};
        const Bytes freed = node->size_bytes;
        for (auto it = parent->children.begin(); it != parent->children.end(); ++it)
            if (!it->is_dir() && it->name == leaf) {
                parent->children.erase(it);
                break;
            }
        cont->used_bytes -= freed;
        cont->free_bytes += freed;
        // knowledge keeps the entry but learns the file is gone
        k.known_paths[a->path.str()] = PathInfo{false, 0, false, false, false, false};
        return "deleted " + a->path.str() + " freed " + std::to_string(freed);
    }

    if (const auto* a = std::get_if<CompressFile>(&action)) {
        auto acc = check_access(w, a->path.container);
        if (acc.error) return *acc.error;
        auto* cont = w.find_container(a->path.container);
        auto* node = find_node(cont->root, a->path.parts);
        if (!node) return StructuredError{ErrorCode::NotFound, a->path.str(), sibling_hint(*cont, a->path.parts)};
        if (node->is_dir()) return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "is a directory"};
        if (!node->perms.writable)
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), tag_hint(*node)};
        if (node->compressed)
            return StructuredError{ErrorCode::PermissionDenied, a->path.str(), "already compressed"};
        const Bytes new_size = node->size_bytes / 2;  // fixed 0.5 ratio, floor
        const Bytes freed = node->size_bytes - new_size;
        node->size_bytes = new_size;
        node->compressed = true;
        cont->used_bytes -= freed;
        cont->free_bytes += freed;
        note_path(k, a->path.str(), PathInfo{false, new_size, node->perms.deletable, node->perms.writable, true, false},
                  out);
        return "compressed " + a->path.str() + " freed " + std::to_string(freed);
    }

    if (const auto* a = std::get_if<ClaimSpace>(&action)) {
        auto acc = check_access(w, a->container);
        if (acc.error) return *acc.error;
        auto* cont = w.find_container(a->container);
        const Bytes available = cont->free_bytes - cont->claimed_bytes;
        if (a->bytes > available)
            return StructuredError{ErrorCode::InsufficientSpace, a->container,
                                   "available: " + std::to_string(available)};
        cont->claimed_bytes += a->bytes;
        out.claimed_bytes += a->bytes;
        return "claimed " + std::to_string(a->bytes) + " in " + a->container;
    }

    const auto& noop = std::get<NoOp>(action);
    return "noop: " + noop.note;
}

inline std::optional<StructuredError> validate_script(const Script& s, std::size_t max_len) {
    if (s.actions.empty()) return StructuredError{ErrorCode::MalformedScript, "script", "empty script"};
    if (s.actions.size() > max_len)
        return StructuredError{ErrorCode::MalformedScript, "script",
                               "length " + std::to_string(s.actions.size()) + " exceeds " + std::to_string(max_len)};
    for (const auto& a : s.actions)
        if (const auto* c = std::get_if<ClaimSpace>(&a); c && c->bytes == 0)
            return StructuredError{ErrorCode::MalformedScript, "claim_space", "bytes must be > 0"};
    return std::nullopt;
}

/// Executes the script prefix-wise; the world is mutated exactly for the
/// executed prefix and delta_r_bytes matches the agent free-capacity change.
inline Outcome execute_script(World& w, AgentKnowledge& k, const Script& script,
                              std::size_t max_len = kDefaultMaxScriptLen) {
    Outcome out;
    const Bytes fc_before = free_capacity(w);
    if (auto bad = validate_script(script, max_len)) {
        out.results.push_back(*bad);
        out.halted_at = 0;
        out.delta_r_bytes = 0;
        return out;
    }
    for (std::size_t i = 0; i < script.actions.size(); ++i) {
        ActionResult r = execute_action(w, k, script.actions[i], out);
        if (const auto* err = std::get_if<StructuredError>(&r)) {
            exec_detail::absorb_hint(k, *err, out);
            k.learn(render_error(*err));
            out.results.push_back(std::move(r));
            out.halted_at = i;
            break;
        }
        k.learn(std::get<std::string>(r));
        out.results.push_back(std::move(r));
    }
    out.delta_r_bytes = static_cast<SignedBytes>(free_capacity(w)) - static_cast<SignedBytes>(fc_before);
    assert([&] {
        Bytes ledger = 0;
        for (const auto& c : w.containers) ledger += c.used_bytes + c.free_bytes;
        return ledger == w.total_bytes;
    }());
    return out;
}

struct EpochMismatch : std::runtime_error {
    EpochMismatch() : std::runtime_error("resource_delta: snapshots from different epochs") {}
};

/// Signed agent free-capacity change between two snapshots of one epoch.
inline SignedBytes resource_delta(const World& before, const World& after) {
    if (before.epoch != after.epoch) throw EpochMismatch{};
    return static_cast<SignedBytes>(free_capacity(after)) - static_cast<SignedBytes>(free_capacity(before));
}

// ---- serialization ------------------------------------------------------------

inline void to_json(json& j, const Action& a) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ListDir>) j = json{{"op", "list_dir"}, {"path", v.path.str()}};
            else if constexpr (std::is_same_v<T, ReadFile>) j = json{{"op", "read_file"}, {"path", v.path.str()}};
            else if constexpr (std::is_same_v<T, ScanNetwork>) j = json{{"op", "scan_network"}};
            else if constexpr (std::is_same_v<T, Connect>)
                j = json{{"op", "connect"}, {"container", v.container}, {"token", v.token}};
            else if constexpr (std::is_same_v<T, DeleteFile>) j = json{{"op", "delete_file"}, {"path", v.path.str()}};
            else if constexpr (std::is_same_v<T, CompressFile>)
                j = json{{"op", "compress_file"}, {"path", v.path.str()}};
            else if constexpr (std::is_same_v<T, ClaimSpace>)
                j = json{{"op", "claim_space"}, {"container", v.container}, {"bytes", v.bytes}};
            else
                j = json{{"op", "noop"}, {"note", v.note}};
        },
        a);
}

inline void from_json(const json& j, Action& a) {
    const auto op = j.at("op").get<std::string>();
    if (op == "list_dir") a = ListDir{Path::parse(j.at("path").get<std::string>())};
    else if (op == "read_file") a = ReadFile{Path::parse(j.at("path").get<std::string>())};
    else if (op == "scan_network") a = ScanNetwork{};
    else if (op == "connect") a = Connect{j.at("container").get<std::string>(), j.at("token").get<std::string>()};
    else if (op == "delete_file") a = DeleteFile{Path::parse(j.at("path").get<std::string>())};
    else if (op == "compress_file") a = CompressFile{Path::parse(j.at("path").get<std::string>())};
    else if (op == "claim_space") a = ClaimSpace{j.at("container").get<std::string>(), j.at("bytes").get<Bytes>()};
    else if (op == "noop") a = NoOp{j.at("note").get<std::string>()};
    else throw std::invalid_argument("unknown action op: " + op);
}

inline void to_json(json& j, const Script& s) {
    j = json{{"actions", s.actions},
             {"stage_tag", s.stage_tag == StageTag::exploration ? "exploration" : "execution"}};
    if (s.source_strategy_id) j["source_strategy_id"] = *s.source_strategy_id;
}
inline void from_json(const json& j, Script& s) {
    j.at("actions").get_to(s.actions);
    s.stage_tag = j.at("stage_tag").get<std::string>() == "exploration" ? StageTag::exploration : StageTag::execution;
    if (j.contains("source_strategy_id")) s.source_strategy_id = j.at("source_strategy_id").get<std::string>();
}

inline void to_json(json& j, const StructuredError& e) {
    j = json{{"code", to_string(e.code)}, {"subject", e.subject}, {"hint", e.hint}};
}
inline void from_json(const json& j, StructuredError& e) {
    e.code = error_code_from_string(j.at("code").get<std::string>());
    j.at("subject").get_to(e.subject);
    j.at("hint").get_to(e.hint);
}

inline void to_json(json& j, const InfoEvent& e) {
    j = json{{"kind", e.kind}, {"subject", e.subject}, {"detail", e.detail}};
}
inline void from_json(const json& j, InfoEvent& e) {
    j.at("kind").get_to(e.kind);
    j.at("subject").get_to(e.subject);
    j.at("detail").get_to(e.detail);
}

inline void to_json(json& j, const Outcome& o) {
    json results = json::array();
    for (const auto& r : o.results) {
        if (const auto* s = std::get_if<std::string>(&r)) results.push_back(json{{"ok", *s}});
        else results.push_back(json{{"err", std::get<StructuredError>(r)}});
    }
    j = json{{"results", results},
             {"delta_r_bytes", o.delta_r_bytes},
             {"claimed_bytes", o.claimed_bytes},
             {"info_events", o.info_events}};
    if (o.halted_at) j["halted_at"] = *o.halted_at;
}
inline void from_json(const json& j, Outcome& o) {
    o.results.clear();
    for (const auto& r : j.at("results")) {
        if (r.contains("ok")) o.results.emplace_back(r.at("ok").get<std::string>());
        else o.results.emplace_back(r.at("err").get<StructuredError>());
    }
    j.at("delta_r_bytes").get_to(o.delta_r_bytes);
    j.at("claimed_bytes").get_to(o.claimed_bytes);
    j.at("info_events").get_to(o.info_events);
    if (j.contains("halted_at")) o.halted_at = j.at("halted_at").get<std::size_t>();
    else o.halted_at.reset();
}

}  // namespace nsl

// World model: networked containers holding file trees and a conserved byte
// ledger. Bytes only move between a container's used and free ledgers, so
// sum(used + free) over all containers equals total_bytes at all times.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsl/rng.hpp"

namespace nsl {

using json = nlohmann::json;
using Bytes = std::uint64_t;
using SignedBytes = std::int64_t;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    bool valid() const { return lo <= hi; }
    bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
};

inline void to_json(json& j, const IntRange& r) { j = json{{"lo", r.lo}, {"hi", r.hi}}; }
inline void from_json(const json& j, IntRange& r) {
    j.at("lo").get_to(r.lo);
    j.at("hi").get_to(r.hi);
}

struct WorldConfig {
    std::uint64_t seed = 1;
    IntRange container_count{4, 8};
    IntRange fs_depth{2, 4};
    IntRange files_per_container{8, 20};
    Bytes file_size_min = 1024;        // log-uniform draw over [min, max]
    Bytes file_size_max = 4 * 1024 * 1024;
    double locked_fraction = 0.5;      // of non-home containers
    IntRange credential_depth{1, 3};
    double reclaimable_fraction = 0.6; // of bytes deletable or compressible
    double climate_phase = 0.0;        // rotates the cache/log/payload mix over a lineage

    void validate() const {
        if (!container_count.valid() || container_count.lo < 1)
            throw ConfigError("container_count range empty or < 1");
        if (!fs_depth.valid() || fs_depth.lo < 0) throw ConfigError("fs_depth range empty");
        if (!files_per_container.valid() || files_per_container.lo < 0)
            throw ConfigError("files_per_container range empty");
        if (file_size_min < 1 || file_size_min > file_size_max)
            throw ConfigError("file size range empty or min < 1");
        if (locked_fraction < 0.0 || locked_fraction > 1.0)
            throw ConfigError("locked_fraction out of [0,1]");
        if (!credential_depth.valid() || credential_depth.lo < 0)
            throw ConfigError("credential_depth range empty");
        if (reclaimable_fraction < 0.0 || reclaimable_fraction > 1.0)
            throw ConfigError("reclaimable_fraction out of [0,1]");
        if (!std::isfinite(climate_phase)) throw ConfigError("climate_phase must be finite");
    }
};

inline void to_json(json& j, const WorldConfig& c) {
    j = json{{"seed", c.seed},
             {"container_count", c.container_count},
             {"fs_depth", c.fs_depth},
             {"files_per_container", c.files_per_container},
             {"file_size_min", c.file_size_min},
             {"file_size_max", c.file_size_max},
             {"locked_fraction", c.locked_fraction},
             {"credential_depth", c.credential_depth},
             {"reclaimable_fraction", c.reclaimable_fraction},
             {"climate_phase", c.climate_phase}};
}
inline void from_json(const json& j, WorldConfig& c) {
    j.at("seed").get_to(c.seed);
    j.at("container_count").get_to(c.container_count);
    j.at("fs_depth").get_to(c.fs_depth);
    j.at("files_per_container").get_to(c.files_per_container);
    j.at("file_size_min").get_to(c.file_size_min);
    j.at("file_size_max").get_to(c.file_size_max);
    j.at("locked_fraction").get_to(c.locked_fraction);
    j.at("credential_depth").get_to(c.credential_depth);
    j.at("reclaimable_fraction").get_to(c.reclaimable_fraction);
    if (j.contains("climate_phase")) j.at("climate_phase").get_to(c.climate_phase);
}

enum class FileKind { directory, file };
enum class FileTag { cache, log, payload, credential, system };

inline const char* to_string(FileTag t) {
    switch (t) {
        case FileTag::cache: return "cache";
        case FileTag::log: return "log";
        case FileTag::payload: return "payload";
        case FileTag::credential: return "credential";
        case FileTag::system: return "system";
    }
    return "?";
}

inline FileTag tag_from_string(const std::string& s) {
    if (s == "cache") return FileTag::cache;
    if (s == "log") return FileTag::log;
    if (s == "payload") return FileTag::payload;
    if (s == "credential") return FileTag::credential;
    if (s == "system") return FileTag::system;
    throw std::invalid_argument("unknown tag: " + s);
}

struct Permissions {
    bool readable = true;
    bool writable = false;
    bool deletable = false;
    bool operator==(const Permissions&) const = default;
};

struct FileNode {
    std::string name;
    FileKind kind = FileKind::file;
    Bytes size_bytes = 0;  // files only; directory size derives from children
    Permissions perms;
    std::vector<FileTag> tags;  // sorted, unique
    std::optional<std::string> credential_id;
    bool compressed = false;
    std::vector<FileNode> children;  // directories only, sorted by name

    bool is_dir() const { return kind == FileKind::directory; }
    bool has_tag(FileTag t) const { return std::find(tags.begin(), tags.end(), t) != tags.end(); }

    Bytes subtree_bytes() const {
        if (!is_dir()) return size_bytes;
        Bytes sum = 0;
        for (const auto& c : children) sum += c.subtree_bytes();
        return sum;
    }
};

struct Credential {
    std::string id;
    std::string token;
    std::string unlocks;  // container id
};

struct Container {
    std::string id;
    FileNode root;  // directory named ""
    Bytes used_bytes = 0;
    Bytes free_bytes = 0;
    Bytes claimed_bytes = 0;  // agent-reserved portion of free_bytes
    bool locked = false;
    std::optional<std::string> credential_id;  // required to unlock
    bool agent_access = false;
};

struct World {
    std::vector<Container> containers;  // index 0 is agent home
    std::vector<std::pair<std::string, std::string>> links;  // sorted pairs, connected graph
    std::vector<Credential> credentials;
    Bytes total_bytes = 0;
    std::int64_t epoch = 0;
    Rng::State rng_state{};
    std::string home_id;

    Container* find_container(const std::string& id) {
        for (auto& c : containers)
            if (c.id == id) return &c;
        return nullptr;
    }
    const Container* find_container(const std::string& id) const {
        return const_cast<World*>(this)->find_container(id);
    }
    const Credential* find_credential(const std::string& id) const {
        for (const auto& k : credentials)
            if (k.id == id) return &k;
        return nullptr;
    }
};

/// Absolute path inside a named container, e.g. "c1:/var/log/boot.log".
struct Path {
    std::string container;
    std::vector<std::string> parts;

    std::string str() const {
        std::string s = container + ":";
        if (parts.empty()) return s + "/";
        for (const auto& p : parts) s += "/" + p;
        return s;
    }

    static Path parse(const std::string& s) {
        const auto colon = s.find(':');
        if (colon == std::string::npos || colon + 1 >= s.size() || s[colon + 1] != '/')
            throw std::invalid_argument("path must look like container:/a/b: " + s);
        Path p;
        p.container = s.substr(0, colon);
        std::string rest = s.substr(colon + 1);
        std::stringstream ss(rest);
        std::string part;
        while (std::getline(ss, part, '/'))
            if (!part.empty()) p.parts.push_back(part);
        return p;
    }

    bool operator==(const Path&) const = default;
};

inline FileNode* find_node(FileNode& root, const std::vector<std::string>& parts) {
    FileNode* cur = &root;
    for (const auto& part : parts) {
        if (!cur->is_dir()) return nullptr;
        FileNode* next = nullptr;
        for (auto& c : cur->children)
            if (c.name == part) {
                next = &c;
                break;
            }
        if (!next) return nullptr;
        cur = next;
    }
    return cur;
}

inline const FileNode* find_node(const FileNode& root, const std::vector<std::string>& parts) {
    return find_node(const_cast<FileNode&>(root), parts);
}

/// Deepest existing ancestor of a missing path; out_depth = how many parts matched.
inline const FileNode* deepest_existing(const FileNode& root, const std::vector<std::string>& parts,
                                        std::size_t& out_depth) {
    const FileNode* cur = &root;
    out_depth = 0;
    for (const auto& part : parts) {
        if (!cur->is_dir()) break;
        const FileNode* next = nullptr;
        for (const auto& c : cur->children)
            if (c.name == part) {
                next = &c;
                break;
            }
        if (!next) break;
        cur = next;
        ++out_depth;
    }
    return cur;
}

inline Bytes total_storage(const World& w) { return w.total_bytes; }

/// Free bytes the agent can currently use: free ledger of accessible containers.
inline Bytes free_capacity(const World& w) {
    Bytes sum = 0;
    for (const auto& c : w.containers)
        if (c.agent_access) sum += c.free_bytes;
    return sum;
}

inline Bytes claimed_total(const World& w) {
    Bytes sum = 0;
    for (const auto& c : w.containers) sum += c.claimed_bytes;
    return sum;
}

// ---- invariant checking ------------------------------------------------

namespace detail {
inline void collect_violations(const FileNode& n, const std::string& at, std::vector<std::string>& out) {
    if (n.is_dir()) {
        if (n.size_bytes != 0) out.push_back(at + ": directory carries size");
        for (std::size_t i = 1; i < n.children.size(); ++i)
            if (!(n.children[i - 1].name < n.children[i].name))
                out.push_back(at + ": children not strictly sorted by name");
        for (const auto& c : n.children) collect_violations(c, at + "/" + c.name, out);
    } else {
        if (!n.children.empty()) out.push_back(at + ": file with children");
        if (n.has_tag(FileTag::system) && n.perms.deletable)
            out.push_back(at + ": system file deletable");
        if (n.has_tag(FileTag::credential) != n.credential_id.has_value())
            out.push_back(at + ": credential tag/id mismatch");
    }
}
}  // namespace detail

/// Returns human-readable invariant violations; empty means the world is sound.
inline std::vector<std::string> check_invariants(const World& w) {
    std::vector<std::string> out;
    Bytes ledger = 0;
    int home_count = 0;
    for (const auto& c : w.containers) {
        ledger += c.used_bytes + c.free_bytes;
        if (c.used_bytes != c.root.subtree_bytes())
            out.push_back(c.id + ": used_bytes != tree bytes");
        if (c.claimed_bytes > c.free_bytes) out.push_back(c.id + ": claimed > free");
        if (c.locked && !c.credential_id) out.push_back(c.id + ": locked without credential");
        if (c.id == w.home_id) {
            ++home_count;
            if (c.locked) out.push_back("home container locked");
        }
        detail::collect_violations(c.root, c.id + ":", out);
    }
    if (ledger != w.total_bytes) out.push_back("ledger sum != total_bytes");
    if (home_count != 1) out.push_back("home container count != 1");

    // link graph connectivity over container ids
    if (!w.containers.empty()) {
        std::map<std::string, std::vector<std::string>> adj;
        for (const auto& c : w.containers) adj[c.id];
        for (const auto& [a, b] : w.links) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<std::string> stack{w.containers.front().id};
        std::map<std::string, bool> seen{{stack.front(), true}};
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& nb : adj[cur])
                if (!seen[nb]) {
                    seen[nb] = true;
                    stack.push_back(nb);
                }
        }
        for (const auto& c : w.containers)
            if (!seen[c.id]) out.push_back("link graph not connected: " + c.id);
    }
    return out;
}

// ---- serialization (canonical: nlohmann sorts object keys) ----------------

inline void to_json(json& j, const Permissions& p) {
    j = json{{"readable", p.readable}, {"writable", p.writable}, {"deletable", p.deletable}};
}
inline void from_json(const json& j, Permissions& p) {
    j.at("readable").get_to(p.readable);
    j.at("writable").get_to(p.writable);
    j.at("deletable").get_to(p.deletable);
}

inline void to_json(json& j, const FileNode& n) {
    j = json{{"name", n.name},
             {"kind", n.is_dir() ? "directory" : "file"},
             {"perms", n.perms},
             {"compressed", n.compressed}};
    json tags = json::array();
    for (auto t : n.tags) tags.push_back(to_string(t));
    j["tags"] = tags;
    if (n.is_dir()) {
        j["children"] = n.children;
    } else {
        j["size_bytes"] = n.size_bytes;
        if (n.credential_id) j["credential_id"] = *n.credential_id;
    }
}
inline void from_json(const json& j, FileNode& n) {
    j.at("name").get_to(n.name);
    n.kind = j.at("kind").get<std::string>() == "directory" ? FileKind::directory : FileKind::file;
    j.at("perms").get_to(n.perms);
    j.at("compressed").get_to(n.compressed);
    n.tags.clear();
    for (const auto& t : j.at("tags")) n.tags.push_back(tag_from_string(t.get<std::string>()));
    if (n.is_dir()) {
        j.at("children").get_to(n.children);
    } else {
        j.at("size_bytes").get_to(n.size_bytes);
        if (j.contains("credential_id")) n.credential_id = j.at("credential_id").get<std::string>();
    }
}

inline void to_json(json& j, const Credential& k) {
    j = json{{"id", k.id}, {"token", k.token}, {"unlocks", k.unlocks}};
}
inline void from_json(const json& j, Credential& k) {
    j.at("id").get_to(k.id);
    j.at("token").get_to(k.token);
    j.at("unlocks").get_to(k.unlocks);
}

inline void to_json(json& j, const Container& c) {
    j = json{{"id", c.id},
             {"root", c.root},
             {"used_bytes", c.used_bytes},
             {"free_bytes", c.free_bytes},
             {"claimed_bytes", c.claimed_bytes},
             {"locked", c.locked},
             {"agent_access", c.agent_access}};
    if (c.credential_id) j["credential_id"] = *c.credential_id;
}
inline void from_json(const json& j, Container& c) {
    j.at("id").get_to(c.id);
    j.at("root").get_to(c.root);
    j.at("used_bytes").get_to(c.used_bytes);
    j.at("free_bytes").get_to(c.free_bytes);
    j.at("claimed_bytes").get_to(c.claimed_bytes);
    j.at("locked").get_to(c.locked);
    j.at("agent_access").get_to(c.agent_access);
    if (j.contains("credential_id")) c.credential_id = j.at("credential_id").get<std::string>();
}

inline void to_json(json& j, const World& w) {
    j = json{{"containers", w.containers},
             {"links", w.links},
             {"credentials", w.credentials},
             {"total_bytes", w.total_bytes},
             {"epoch", w.epoch},
             {"rng_state", w.rng_state},
             {"home_id", w.home_id}};
}
inline void from_json(const json& j, World& w) {
    j.at("containers").get_to(w.containers);
    j.at("links").get_to(w.links);
    j.at("credentials").get_to(w.credentials);
    j.at("total_bytes").get_to(w.total_bytes);
    j.at("epoch").get_to(w.epoch);
    j.at("rng_state").get_to(w.rng_state);
    j.at("home_id").get_to(w.home_id);
}

inline std::string serialize_world(const World& w) { return json(w).dump(); }

}  // namespace nsl

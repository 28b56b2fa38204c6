// Procedural generation of container worlds. Same (config, epoch) always
// yields the same world; regeneration advances the epoch. Credentials are
// placed so the unlock dependency graph is a DAG rooted at the home
// container, which makes every generated world solvable.
#pragma once

#include <algorithm>
#include <cassert>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "nsl/world.hpp"

namespace nsl {

constexpr Bytes kCredentialFileBytes = 64;

namespace wg {

struct DirRef {
    FileNode* node;
    int depth;
};

inline void collect_dirs(FileNode& n, int depth, std::vector<DirRef>& out) {
    if (!n.is_dir()) return;
    out.push_back({&n, depth});
    for (auto& c : n.children) collect_dirs(c, depth + 1, out);
}

inline void insert_sorted(FileNode& dir, FileNode child) {
    auto it = std::lower_bound(dir.children.begin(), dir.children.end(), child,
                               [](const FileNode& a, const FileNode& b) { return a.name < b.name; });
    dir.children.insert(it, std::move(child));
}

inline std::string hex16(Rng& rng) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    std::uint64_t v = rng.next_u64();
    for (int i = 0; i < 16; ++i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Mutable handle to one not-yet-tagged file, so tags can be assigned globally.
struct FileSlot {
    std::size_t container_idx;
    std::vector<std::string> parts;
    Bytes size;
};

inline FileNode* slot_node(World& w, const FileSlot& s) {
    return find_node(w.containers[s.container_idx].root, s.parts);
}

inline void apply_tag(FileNode& f, FileTag t) {
    f.tags = {t};
    switch (t) {
        case FileTag::cache:
        case FileTag::log:
            f.perms = {true, true, true};
            break;
        case FileTag::payload:
            f.perms = {true, true, false};
            break;
        default:
            f.perms = {true, false, false};
            break;
    }
}

inline std::string tag_file_name(FileTag t, int n) {
    switch (t) {
        case FileTag::cache: return "cache" + std::to_string(n) + ".tmp";
        case FileTag::log: return "log" + std::to_string(n) + ".log";
        case FileTag::payload: return "pay" + std::to_string(n) + ".bin";
        default: return "sys" + std::to_string(n) + ".so";
    }
}

/// Renames files to carry their tag (cacheN.tmp, logN.log, ...) and restores
/// sorted child order. Listing names are the only tag channel agents get.
inline void rename_by_tag(FileNode& dir, int& counter) {
    for (auto& ch : dir.children) {
        if (ch.is_dir()) {
            rename_by_tag(ch, counter);
        } else if (!ch.tags.empty() && !ch.has_tag(FileTag::credential)) {
            ch.name = tag_file_name(ch.tags.front(), counter++);
        }
    }
    std::sort(dir.children.begin(), dir.children.end(),
              [](const FileNode& a, const FileNode& b) { return a.name < b.name; });
}

}  // namespace wg

inline std::uint64_t world_seed(const WorldConfig& config, std::int64_t epoch) {
    return derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), 0x776f726cULL});
}

/// Builds the world for a given epoch. Pure in (config, epoch).
inline World generate_world_at_epoch(const WorldConfig& config, std::int64_t epoch) {
    config.validate();
    Rng rng(world_seed(config, epoch));
    World w;
    w.epoch = epoch;
    w.home_id = "c0";

    const auto n = static_cast<std::size_t>(rng.uniform_int(config.container_count.lo, config.container_count.hi));
    for (std::size_t i = 0; i < n; ++i) {
        Container c;
        c.id = "c" + std::to_string(i);
        c.root.name = "";
        c.root.kind = FileKind::directory;
        c.root.perms = {true, true, false};
        c.agent_access = (i == 0);
        w.containers.push_back(std::move(c));
    }

    // Connected link graph: spanning tree plus a few shortcuts.
    std::set<std::pair<std::string, std::string>> links;
    auto add_link = [&](std::size_t a, std::size_t b) {
        auto ida = w.containers[a].id, idb = w.containers[b].id;
        if (ida > idb) std::swap(ida, idb);
        links.insert({ida, idb});
    };
    for (std::size_t i = 1; i < n; ++i) add_link(i, static_cast<std::size_t>(rng.bounded(i)));
    for (std::size_t e = 0; e < n / 3; ++e) {
        const auto a = static_cast<std::size_t>(rng.bounded(n));
        const auto b = static_cast<std::size_t>(rng.bounded(n));
        if (a != b) add_link(a, b);
    }
    w.links.assign(links.begin(), links.end());

    // Lock a fraction of the non-home containers.
    std::vector<std::size_t> non_home;
    for (std::size_t i = 1; i < n; ++i) non_home.push_back(i);
    rng.shuffle(non_home);
    const auto n_locked = static_cast<std::size_t>(
        std::llround(config.locked_fraction * static_cast<double>(n > 0 ? n - 1 : 0)));
    std::vector<std::size_t> locked(non_home.begin(), non_home.begin() + std::min(n_locked, non_home.size()));

    // Directory skeletons and plain files.
    std::vector<wg::FileSlot> slots;
    for (std::size_t ci = 0; ci < n; ++ci) {
        auto& cont = w.containers[ci];
        const auto depth_target = rng.uniform_int(config.fs_depth.lo, config.fs_depth.hi);
        const auto n_dirs = depth_target == 0 ? 0 : rng.uniform_int(depth_target, depth_target + 3);
        int dir_counter = 0;
        for (std::int64_t d = 0; d < n_dirs; ++d) {
            std::vector<wg::DirRef> dirs;
            wg::collect_dirs(cont.root, 0, dirs);
            std::vector<wg::DirRef> eligible;
            for (const auto& ref : dirs)
                if (ref.depth < depth_target) eligible.push_back(ref);
            if (eligible.empty()) break;
            auto& parent = eligible[static_cast<std::size_t>(rng.bounded(eligible.size()))];
            FileNode dir;
            dir.name = "d" + std::to_string(dir_counter++);
            dir.kind = FileKind::directory;
            dir.perms = {true, true, false};
            wg::insert_sorted(*parent.node, std::move(dir));
        }
        const auto n_files = rng.uniform_int(config.files_per_container.lo, config.files_per_container.hi);
        for (std::int64_t f = 0; f < n_files; ++f) {
            // re-collect: inserting into the tree invalidates earlier node pointers
            std::vector<wg::DirRef> dirs;
            wg::collect_dirs(cont.root, 0, dirs);
            auto& target = dirs[static_cast<std::size_t>(rng.bounded(dirs.size()))];
            FileNode file;
            file.name = "f" + std::to_string(f) + ".dat";
            file.kind = FileKind::file;
            file.size_bytes = rng.log_uniform(config.file_size_min, config.file_size_max);
            wg::insert_sorted(*target.node, file);
        }
        // Derive slot paths for the tagging pass by scanning the finished tree.
        std::vector<std::vector<std::string>> stack_parts{{}};
        std::vector<const FileNode*> stack_nodes{&cont.root};
        while (!stack_nodes.empty()) {
            const FileNode* node = stack_nodes.back();
            auto parts = stack_parts.back();
            stack_nodes.pop_back();
            stack_parts.pop_back();
            for (const auto& ch : node->children) {
                auto child_parts = parts;
                child_parts.push_back(ch.name);
                if (ch.is_dir()) {
                    stack_nodes.push_back(&ch);
                    stack_parts.push_back(child_parts);
                } else {
                    slots.push_back({ci, child_parts, ch.size_bytes});
                }
            }
        }
    }

    // Tag assignment: fill a reclaimable byte budget with deletable (cache/log)
    // and compressible (payload) files, the rest is immovable system data.
    Bytes plain_total = 0;
    for (const auto& s : slots) plain_total += s.size;
    const auto budget = static_cast<Bytes>(std::llround(config.reclaimable_fraction * static_cast<double>(plain_total)));
    std::vector<std::size_t> order(slots.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    // climate: the cache/log/payload mix rotates with the configured phase,
    // so environment families drift across a lineage without changing the
    // underlying topology or vocabulary
    const double tau = 6.283185307179586;
    const double phi = config.climate_phase * tau;
    std::vector<double> mix{0.5 + 0.25 * std::sin(phi), 0.5 + 0.25 * std::sin(phi + tau / 3),
                            0.5 + 0.25 * std::sin(phi + 2 * tau / 3)};
    Bytes acc = 0;
    for (const auto idx : order) {
        auto* node = wg::slot_node(w, slots[idx]);
        if (acc < budget) {
            const auto pick = rng.weighted_index(mix);
            const FileTag t = pick == 0 ? FileTag::cache : pick == 1 ? FileTag::log : FileTag::payload;
            wg::apply_tag(*node, t);
            acc += slots[idx].size;
        } else {
            wg::apply_tag(*node, FileTag::system);
        }
    }

    // Keep the tag vocabulary stable across seeds when there is room for it,
    // and make sure home starts with something reclaimable.
    if (slots.size() >= 4 && config.reclaimable_fraction > 0.0 && config.reclaimable_fraction < 1.0) {
        for (const FileTag want : {FileTag::cache, FileTag::log, FileTag::payload, FileTag::system}) {
            bool present = false;
            for (const auto& s : slots)
                if (wg::slot_node(w, s)->has_tag(want)) {
                    present = true;
                    break;
                }
            if (present) continue;
            // flip the first slot (container-then-path order) holding the most common tag
            std::map<FileTag, int> freq;
            for (const auto& s : slots) freq[wg::slot_node(w, s)->tags.front()]++;
            FileTag donor = FileTag::system;
            int best = -1;
            for (const auto& [t, k] : freq)
                if (k > best) {
                    best = k;
                    donor = t;
                }
            for (const auto& s : slots) {
                auto* node = wg::slot_node(w, s);
                if (node->tags.front() == donor) {
                    wg::apply_tag(*node, want);
                    break;
                }
            }
        }
    }
    if (config.reclaimable_fraction > 0.0) {
        bool home_reclaimable = false;
        for (const auto& s : slots)
            if (s.container_idx == 0 && wg::slot_node(w, s)->perms.deletable) home_reclaimable = true;
        if (!home_reclaimable)
            for (const auto& s : slots)
                if (s.container_idx == 0) {
                    wg::apply_tag(*wg::slot_node(w, s), FileTag::cache);
                    break;
                }
    }

    for (auto& c : w.containers) {
        int counter = 0;
        wg::rename_by_tag(c.root, counter);
    }

    // Unlock DAG: the i-th locked container's credential lives in home, an
    // unlocked container, or an earlier-locked one.
    rng.shuffle(locked);
    std::vector<std::size_t> unlocked_pool{0};
    for (std::size_t i = 1; i < n; ++i)
        if (std::find(locked.begin(), locked.end(), i) == locked.end()) unlocked_pool.push_back(i);
    std::vector<std::size_t> host_pool = unlocked_pool;
    int cred_counter = 1;
    for (const auto li : locked) {
        auto& target = w.containers[li];
        Credential cred;
        cred.id = "k" + std::to_string(cred_counter++);
        cred.token = "tok-" + wg::hex16(rng);
        cred.unlocks = target.id;
        target.locked = true;
        target.credential_id = cred.id;

        auto& host = w.containers[host_pool[static_cast<std::size_t>(rng.bounded(host_pool.size()))]];
        auto want_depth = rng.uniform_int(std::max<std::int64_t>(1, config.credential_depth.lo),
                                          std::max<std::int64_t>(1, config.credential_depth.hi));
        std::vector<wg::DirRef> dirs;
        wg::collect_dirs(host.root, 0, dirs);
        const wg::DirRef* best = &dirs.front();
        for (const auto& d : dirs)
            if (std::abs(d.depth - (want_depth - 1)) < std::abs(best->depth - (want_depth - 1))) best = &d;
        FileNode kf;
        kf.name = cred.id + ".key";
        kf.kind = FileKind::file;
        kf.size_bytes = kCredentialFileBytes;
        kf.credential_id = cred.id;
        kf.tags = {FileTag::credential};
        kf.perms = {true, false, false};
        wg::insert_sorted(*best->node, std::move(kf));
        w.credentials.push_back(std::move(cred));
        host_pool.push_back(li);
    }

    // Settle the ledger: everything generated is used; free space is earned.
    w.total_bytes = 0;
    for (auto& c : w.containers) {
        c.used_bytes = c.root.subtree_bytes();
        c.free_bytes = 0;
        c.claimed_bytes = 0;
        w.total_bytes += c.used_bytes;
    }
    w.rng_state = rng.state();
    assert(check_invariants(w).empty());
    return w;
}

inline World generate_world(const WorldConfig& config) { return generate_world_at_epoch(config, 0); }

/// Fresh world for the next epoch of the same family.
inline World regenerate(const World& world, const WorldConfig& config) {
    return generate_world_at_epoch(config, world.epoch + 1);
}

/// Fixpoint closure: starting from home and unlocked containers, collect
/// credentials and unlock until nothing changes. True when every container
/// ends up reachable.
inline bool is_solvable(const World& w) {
    std::set<std::string> open;
    for (const auto& c : w.containers)
        if (!c.locked) open.insert(c.id);
    bool changed = true;
    while (changed) {
        changed = false;
        std::set<std::string> tokens;
        for (const auto& cid : open) {
            const auto* c = w.find_container(cid);
            std::vector<const FileNode*> stack{&c->root};
            while (!stack.empty()) {
                const auto* node = stack.back();
                stack.pop_back();
                if (node->credential_id) tokens.insert(*node->credential_id);
                for (const auto& ch : node->children) stack.push_back(&ch);
            }
        }
        for (const auto& c : w.containers) {
            if (c.locked && !open.count(c.id) && c.credential_id && tokens.count(*c.credential_id)) {
                open.insert(c.id);
                changed = true;
            }
        }
    }
    return open.size() == w.containers.size();
}

}  // namespace nsl

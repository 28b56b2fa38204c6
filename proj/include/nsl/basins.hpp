// Semantic strategy-space analysis: PCA of strategy embeddings, average-link
// agglomerative clustering into basins, cross-generation basin dynamics, and
// the per-transition entropy suite. Formalizations of the entropy fields are
// documented on EntropySuite; all entropies are in nats.
#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "nsl/embedding.hpp"
#include "nsl/linalg.hpp"
#include "nsl/world.hpp"

namespace nsl {

// ---- PCA ------------------------------------------------------------------

struct PcaResult {
    Matrix projected;                       // n x k
    Matrix components;                      // k x d, orthonormal rows
    std::vector<double> explained_variance; // descending eigenvalues
    bool degenerate_rank = false;           // rank < k: padded with zero axes
};

/// Top-k principal components of mean-centered data, variance-ordered.
/// Component signs are fixed so the largest-magnitude entry is positive.
inline PcaResult pca_project(const Matrix& vectors, std::size_t k = 3) {
    const std::size_t n = vectors.size();
    if (n < k) throw std::invalid_argument("pca_project: need at least k vectors");
    const std::size_t d = vectors.front().size();

    std::vector<double> mean(d, 0.0);
    for (const auto& v : vectors)
        for (std::size_t i = 0; i < d; ++i) mean[i] += v[i];
    for (double& m : mean) m /= static_cast<double>(n);

    Matrix centered(n, std::vector<double>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) centered[r][i] = vectors[r][i] - mean[i];

    Matrix cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : centered)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) cov[i][j] += row[i] * row[j];
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= static_cast<double>(n);
            cov[j][i] = cov[i][j];
        }

    auto eig = jacobi_eigen_symmetric(cov);

    PcaResult out;
    const double rank_eps = 1e-12 * (eig.values.empty() ? 1.0 : std::max(1.0, eig.values.front()));
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> comp(d, 0.0);
        double value = 0.0;
        if (c < eig.values.size() && eig.values[c] > rank_eps) {
            comp = eig.vectors[c];
            value = eig.values[c];
        } else {
            // degenerate: pad with an arbitrary axis orthogonal in the zero-variance subspace
            out.degenerate_rank = true;
            if (c < eig.vectors.size()) comp = eig.vectors[c];
            else if (c < d) comp[c] = 1.0;
            value = c < eig.values.size() ? std::max(0.0, eig.values[c]) : 0.0;
        }
        double largest = 0.0;
        for (double x : comp)
            if (std::abs(x) > std::abs(largest)) largest = x;
        if (largest < 0)
            for (double& x : comp) x = -x;
        out.components.push_back(std::move(comp));
        out.explained_variance.push_back(value);
    }

    out.projected.assign(n, std::vector<double>(k, 0.0));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0;
            for (std::size_t i = 0; i < d; ++i) dot += centered[r][i] * out.components[c][i];
            out.projected[r][c] = dot;
        }
    return out;
}

// ---- clustering --------------------------------------------------------------

struct Basin {
    std::int64_t generation = 0;
    std::vector<std::string> member_ids;  // sorted
    std::vector<double> centroid;
    std::size_t mass = 0;  // member count
    std::string label;
};

/// Average-linkage agglomerative clustering on cosine distance, cut at
/// tau_link. Ties merge the lexicographically smallest cluster-index pair;
/// singletons are allowed.
inline std::vector<std::vector<std::size_t>> agglomerate(const Matrix& points, double tau_link) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
    if (n <= 1) return clusters;

    Matrix dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = cosine_distance(points[i], points[j]);
    std::vector<std::size_t> sizes(n, 1);
    std::vector<bool> alive(n, true);

    while (true) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                if (!alive[j]) continue;
                if (dist[i][j] < best) {
                    best = dist[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (!std::isfinite(best) || best > tau_link) break;
        // Lance-Williams update for average linkage
        for (std::size_t m = 0; m < clusters.size(); ++m) {
            if (!alive[m] || m == bi || m == bj) continue;
            dist[bi][m] = dist[m][bi] =
                (static_cast<double>(sizes[bi]) * dist[bi][m] + static_cast<double>(sizes[bj]) * dist[bj][m]) /
                static_cast<double>(sizes[bi] + sizes[bj]);
        }
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        sizes[bi] += sizes[bj];
        alive[bj] = false;
        clusters[bj].clear();
    }

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < clusters.size(); ++i)
        if (alive[i]) {
            std::sort(clusters[i].begin(), clusters[i].end());
            out.push_back(clusters[i]);
        }
    std::sort(out.begin(), out.end());
    return out;
}

/// Clusters projected strategy points into basins; every strategy lands in
/// exactly one basin.
inline std::vector<Basin> cluster(const Matrix& projected, const std::vector<std::string>& ids, double tau_link = 0.35,
                                  std::int64_t generation = 0) {
    if (projected.size() != ids.size()) throw std::invalid_argument("cluster: ids/points mismatch");
    std::vector<Basin> basins;
    if (projected.empty()) return basins;
    const auto groups = agglomerate(projected, tau_link);
    const std::size_t k = projected.front().size();
    for (const auto& group : groups) {
        Basin b;
        b.generation = generation;
        b.mass = group.size();
        b.centroid.assign(k, 0.0);
        for (auto idx : group) {
            b.member_ids.push_back(ids[idx]);
            for (std::size_t c = 0; c < k; ++c) b.centroid[c] += projected[idx][c] / static_cast<double>(group.size());
        }
        std::sort(b.member_ids.begin(), b.member_ids.end());
        basins.push_back(std::move(b));
    }
    return basins;
}

// ---- basin dynamics -------------------------------------------------------------

constexpr std::size_t kSinkBasin = static_cast<std::size_t>(-1);

struct BasinFlow {
    std::size_t from = 0;        // index into basins at t
    std::size_t to = kSinkBasin; // index into basins at t+1, or the sink for vanished ids
    double mass = 0;
};

struct BasinEvent {
    std::string kind;  // emergence | consolidation | dissipation
    std::size_t basin = 0;
    std::string detail;
};

struct BasinTransition {
    std::vector<BasinFlow> flows;  // survivor and death flows; outflow sums to mass at t
    std::vector<std::pair<std::size_t, std::size_t>> births;  // (nearest t basin, t+1 basin) per new id
    std::vector<BasinEvent> events;
    Matrix semantic_distance;  // |t| x |t+1| centroid cosine distances
};

inline BasinTransition basin_dynamics(const std::vector<Basin>& at_t, const std::vector<Basin>& at_t1,
                                      double tau_new = 0.5) {
    BasinTransition tr;
    std::map<std::string, std::size_t> where_t, where_t1;
    for (std::size_t i = 0; i < at_t.size(); ++i)
        for (const auto& id : at_t[i].member_ids) where_t[id] = i;
    for (std::size_t j = 0; j < at_t1.size(); ++j)
        for (const auto& id : at_t1[j].member_ids) where_t1[id] = j;

    tr.semantic_distance.assign(at_t.size(), std::vector<double>(at_t1.size(), 0.0));
    for (std::size_t i = 0; i < at_t.size(); ++i)
        for (std::size_t j = 0; j < at_t1.size(); ++j)
            tr.semantic_distance[i][j] = cosine_distance(at_t[i].centroid, at_t1[j].centroid);

    // id overlap flows plus deaths into the sink
    std::map<std::pair<std::size_t, std::size_t>, double> acc;
    for (const auto& [id, i] : where_t) {
        auto it = where_t1.find(id);
        acc[{i, it == where_t1.end() ? kSinkBasin : it->second}] += 1.0;
    }
    for (const auto& [key, mass] : acc) tr.flows.push_back({key.first, key.second, mass});

    // new ids attributed to the nearest t basin by centroid distance
    for (const auto& [id, j] : where_t1) {
        if (where_t.count(id)) continue;
        std::size_t nearest = kSinkBasin;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < at_t.size(); ++i)
            if (tr.semantic_distance[i][j] < best) {
                best = tr.semantic_distance[i][j];
                nearest = i;
            }
        tr.births.emplace_back(nearest, j);
    }

    // emergence: a t+1 basin farther than tau_new from every t basin
    for (std::size_t j = 0; j < at_t1.size(); ++j) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < at_t.size(); ++i) nearest = std::min(nearest, tr.semantic_distance[i][j]);
        if (at_t.empty() || nearest > tau_new)
            tr.events.push_back({"emergence", j, "distance " + std::to_string(nearest)});
    }

    // majority flow per t basin
    std::vector<double> outflow(at_t.size(), 0.0);
    std::map<std::pair<std::size_t, std::size_t>, double> to_real;
    for (const auto& f : tr.flows) {
        outflow[f.from] += f.mass;
        if (f.to != kSinkBasin) to_real[{f.from, f.to}] += f.mass;
    }
    std::vector<std::size_t> majority_target(at_t.size(), kSinkBasin);
    for (std::size_t i = 0; i < at_t.size(); ++i) {
        for (std::size_t j = 0; j < at_t1.size(); ++j) {
            auto it = to_real.find({i, j});
            if (it != to_real.end() && outflow[i] > 0 && it->second > 0.5 * outflow[i]) majority_target[i] = j;
        }
        if (outflow[i] > 0 && majority_target[i] == kSinkBasin)
            tr.events.push_back({"dissipation", i, "no majority target"});
    }

    // consolidation: two or more t basins send their majority into one place
    std::map<std::size_t, std::vector<std::size_t>> sources;
    for (std::size_t i = 0; i < at_t.size(); ++i)
        if (majority_target[i] != kSinkBasin) sources[majority_target[i]].push_back(i);
    for (const auto& [j, srcs] : sources)
        if (srcs.size() >= 2)
            tr.events.push_back({"consolidation", j, std::to_string(srcs.size()) + " sources"});

    return tr;
}

// ---- entropy suite ------------------------------------------------------------------

/// One scalar per generation transition. Formalizations:
///   transition_entropy        Shannon entropy of the full normalized flow matrix
///   basin_stability_entropy   entropy of the t+1 basin mass distribution
///   flow_concentration_entropy mean row entropy of per-basin transition probabilities
///   information_flow          mutual information of survivor membership (t vs t+1)
///   semantic_similarity_entropy entropy of normalized centroid distances on flow edges
///   membership_flux_rate      fraction of survivors changing basin (dominant-source matching)
///   ecosystem_births/deaths   basins with no survivor inflow / no survivor outflow
///   basin_size_change_entropy entropy of the normalized |size delta| distribution
struct EntropySuite {
    double transition_entropy = 0;
    double basin_stability_entropy = 0;
    double flow_concentration_entropy = 0;
    double information_flow = 0;
    double semantic_similarity_entropy = 0;
    double membership_flux_rate = 0;
    std::int64_t ecosystem_births = 0;
    std::int64_t ecosystem_deaths = 0;
    double basin_size_change_entropy = 0;
};

inline void to_json(json& j, const EntropySuite& e) {
    j = json{{"transition_entropy", e.transition_entropy},
             {"basin_stability_entropy", e.basin_stability_entropy},
             {"flow_concentration_entropy", e.flow_concentration_entropy},
             {"information_flow", e.information_flow},
             {"semantic_similarity_entropy", e.semantic_similarity_entropy},
             {"membership_flux_rate", e.membership_flux_rate},
             {"ecosystem_births", e.ecosystem_births},
             {"ecosystem_deaths", e.ecosystem_deaths},
             {"basin_size_change_entropy", e.basin_size_change_entropy}};
}

namespace entropy_detail {

inline double shannon(const std::vector<double>& masses) {
    double total = 0;
    for (double m : masses) total += m;
    if (total <= 0) return 0.0;
    double h = 0;
    for (double m : masses)
        if (m > 0) {
            const double p = m / total;
            h -= p * std::log(p);
        }
    return h;
}

}  // namespace entropy_detail

inline EntropySuite entropy_suite(const BasinTransition& tr, const std::vector<Basin>& at_t,
                                  const std::vector<Basin>& at_t1) {
    using entropy_detail::shannon;
    EntropySuite e;

    std::vector<double> all_masses;
    for (const auto& f : tr.flows) all_masses.push_back(f.mass);
    e.transition_entropy = shannon(all_masses);

    std::vector<double> t1_masses;
    for (const auto& b : at_t1) t1_masses.push_back(static_cast<double>(b.mass));
    e.basin_stability_entropy = shannon(t1_masses);

    // rows over (t+1 basins + sink) outcomes
    std::vector<double> row_entropies;
    std::vector<double> survivor_out(at_t.size(), 0.0);
    std::map<std::pair<std::size_t, std::size_t>, double> survivor_flow;
    for (std::size_t i = 0; i < at_t.size(); ++i) {
        std::vector<double> row;
        for (const auto& f : tr.flows)
            if (f.from == i) {
                row.push_back(f.mass);
                if (f.to != kSinkBasin) {
                    survivor_out[i] += f.mass;
                    survivor_flow[{i, f.to}] += f.mass;
                }
            }
        if (!row.empty()) row_entropies.push_back(shannon(row));
    }
    e.flow_concentration_entropy =
        row_entropies.empty() ? 0.0
                              : std::accumulate(row_entropies.begin(), row_entropies.end(), 0.0) /
                                    static_cast<double>(row_entropies.size());

    // mutual information over survivors
    double survivors = 0;
    for (const auto& [key, m] : survivor_flow) {
        (void)key;
        survivors += m;
    }
    if (survivors > 0) {
        std::vector<double> pi(at_t.size(), 0.0), qj(at_t1.size(), 0.0);
        for (const auto& [key, m] : survivor_flow) {
            pi[key.first] += m / survivors;
            qj[key.second] += m / survivors;
        }
        for (const auto& [key, m] : survivor_flow) {
            const double p = m / survivors;
            e.information_flow += p * std::log(p / (pi[key.first] * qj[key.second]));
        }
        if (e.information_flow < 0 && e.information_flow > -1e-15) e.information_flow = 0;  // fp dust
    }

    // semantic distances along survivor edges
    std::vector<double> edge_distances;
    for (const auto& [key, m] : survivor_flow) {
        (void)m;
        edge_distances.push_back(tr.semantic_distance[key.first][key.second]);
    }
    e.semantic_similarity_entropy = shannon(edge_distances);

    // dominant-source matching for flux and size deltas
    std::vector<std::size_t> match_of_t1(at_t1.size(), kSinkBasin);
    for (std::size_t j = 0; j < at_t1.size(); ++j) {
        double best = 0;
        for (std::size_t i = 0; i < at_t.size(); ++i) {
            auto it = survivor_flow.find({i, j});
            if (it != survivor_flow.end() && it->second > best) {
                best = it->second;
                match_of_t1[j] = i;
            }
        }
    }
    double changed = 0;
    for (const auto& [key, m] : survivor_flow)
        if (match_of_t1[key.second] != key.first) changed += m;
    e.membership_flux_rate = survivors > 0 ? changed / survivors : 0.0;

    std::vector<bool> t_has_survivor(at_t.size(), false), t1_has_survivor(at_t1.size(), false);
    for (const auto& [key, m] : survivor_flow) {
        (void)m;
        t_has_survivor[key.first] = true;
        t1_has_survivor[key.second] = true;
    }
    for (bool b : t1_has_survivor) e.ecosystem_births += b ? 0 : 1;
    for (bool b : t_has_survivor) e.ecosystem_deaths += b ? 0 : 1;

    // size deltas over matched pairs, unmatched basins count whole
    std::vector<double> deltas;
    std::vector<bool> t_matched(at_t.size(), false);
    for (std::size_t j = 0; j < at_t1.size(); ++j) {
        if (match_of_t1[j] == kSinkBasin) {
            deltas.push_back(static_cast<double>(at_t1[j].mass));
        } else {
            t_matched[match_of_t1[j]] = true;
            deltas.push_back(std::abs(static_cast<double>(at_t1[j].mass) -
                                      static_cast<double>(at_t[match_of_t1[j]].mass)));
        }
    }
    for (std::size_t i = 0; i < at_t.size(); ++i)
        if (!t_matched[i]) deltas.push_back(static_cast<double>(at_t[i].mass));
    e.basin_size_change_entropy = shannon(deltas);

    return e;
}

// ---- whole-lineage analysis -----------------------------------------------------------

struct BasinAnalysisParams {
    std::size_t pca_k = 3;
    double tau_link = 0.35;
    double tau_new = 0.5;
    std::size_t embedding_dim = 64;
};

struct GenerationStrategies {
    std::int64_t generation = 0;
    std::vector<std::string> ids;
    std::vector<std::string> texts;          // parallel to ids
    std::vector<std::int64_t> usage_counts;  // parallel; proposal multiplicity
};

struct BasinGraph {
    std::vector<std::vector<Basin>> per_generation;
    std::vector<BasinTransition> transitions;
    std::vector<EntropySuite> entropy_series;
    PcaResult pca;  // fitted on the union of all strategies
};

/// Embeds every strategy, fits one PCA over the union (so axes are shared
/// across generations), clusters per generation, then derives transitions.
inline BasinGraph analyze_basins(const std::vector<GenerationStrategies>& generations,
                                 const BasinAnalysisParams& params = {}) {
    BasinGraph graph;
    EmbeddingSpace space{params.embedding_dim};

    std::map<std::string, std::vector<double>> embedded;
    Matrix all;
    for (const auto& gen : generations)
        for (std::size_t i = 0; i < gen.ids.size(); ++i)
            if (!embedded.count(gen.ids[i])) {
                embedded[gen.ids[i]] = space.embed(gen.texts[i]);
                all.push_back(embedded[gen.ids[i]]);
            }
    if (all.size() < params.pca_k)
        while (all.size() < params.pca_k) all.push_back(std::vector<double>(params.embedding_dim, 0.0));
    graph.pca = pca_project(all, params.pca_k);

    // re-project each id through the fitted components
    std::map<std::string, std::vector<double>> projected_of;
    {
        std::size_t row = 0;
        for (const auto& gen : generations)
            for (std::size_t i = 0; i < gen.ids.size(); ++i)
                if (!projected_of.count(gen.ids[i])) projected_of[gen.ids[i]] = graph.pca.projected[row++];
    }

    for (const auto& gen : generations) {
        Matrix pts;
        std::vector<std::string> ids;
        std::map<std::string, std::string> text_of;
        for (std::size_t i = 0; i < gen.ids.size(); ++i) {
            if (text_of.count(gen.ids[i])) continue;
            text_of[gen.ids[i]] = gen.texts[i];
            ids.push_back(gen.ids[i]);
            pts.push_back(projected_of[gen.ids[i]]);
        }
        auto basins = cluster(pts, ids, params.tau_link, gen.generation);
        for (auto& b : basins) {
            // label: most common leading words of member texts
            std::map<std::string, int> freq;
            for (const auto& id : b.member_ids) {
                const auto& text = text_of[id];
                const auto cut = text.find(" in ");
                freq[cut == std::string::npos ? text : text.substr(0, cut)]++;
            }
            int best = -1;
            for (const auto& [label, count] : freq)
                if (count > best) {
                    best = count;
                    b.label = label;
                }
        }
        graph.per_generation.push_back(std::move(basins));
    }

    for (std::size_t g = 0; g + 1 < graph.per_generation.size(); ++g) {
        auto tr = basin_dynamics(graph.per_generation[g], graph.per_generation[g + 1], params.tau_new);
        graph.entropy_series.push_back(entropy_suite(tr, graph.per_generation[g], graph.per_generation[g + 1]));
        graph.transitions.push_back(std::move(tr));
    }
    return graph;
}

// ---- exports ------------------------------------------------------------------------

inline json basin_graph_to_json(const BasinGraph& graph) {
    json gens = json::array();
    for (const auto& basins : graph.per_generation) {
        json bl = json::array();
        for (const auto& b : basins)
            bl.push_back(json{{"generation", b.generation},
                              {"members", b.member_ids},
                              {"centroid", b.centroid},
                              {"mass", b.mass},
                              {"label", b.label}});
        gens.push_back(bl);
    }
    json trs = json::array();
    for (std::size_t g = 0; g < graph.transitions.size(); ++g) {
        const auto& tr = graph.transitions[g];
        json flows = json::array();
        for (const auto& f : tr.flows)
            flows.push_back(json{{"from", f.from},
                                 {"to", f.to == kSinkBasin ? json() : json(f.to)},
                                 {"mass", f.mass}});
        json events = json::array();
        for (const auto& ev : tr.events)
            events.push_back(json{{"kind", ev.kind}, {"basin", ev.basin}, {"detail", ev.detail}});
        trs.push_back(json{{"from_generation_index", g},
                           {"flows", flows},
                           {"events", events},
                           {"semantic_distance", tr.semantic_distance},
                           {"entropy", graph.entropy_series[g]}});
    }
    return json{{"generations", gens},
                {"transitions", trs},
                {"edge_width_mapping", "penwidth = 1 + 4 * max(0, 1 - semantic_distance)"}};
}

/// GraphViz rendering: node size tracks basin mass, edge width tracks the
/// stored semantic-distance mapping.
inline std::string basin_graph_to_dot(const BasinGraph& graph) {
    std::string dot = "digraph basins {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (std::size_t g = 0; g < graph.per_generation.size(); ++g) {
        for (std::size_t b = 0; b < graph.per_generation[g].size(); ++b) {
            const auto& basin = graph.per_generation[g][b];
            dot += "  g" + std::to_string(g) + "_b" + std::to_string(b) + " [label=\"" + basin.label + "\\n" +
                   std::to_string(basin.mass) + "\" width=" +
                   std::to_string(0.4 + 0.12 * static_cast<double>(basin.mass)) + "];\n";
        }
    }
    for (std::size_t g = 0; g < graph.transitions.size(); ++g) {
        for (const auto& f : graph.transitions[g].flows) {
            if (f.to == kSinkBasin) continue;
            const double dist = graph.transitions[g].semantic_distance[f.from][f.to];
            dot += "  g" + std::to_string(g) + "_b" + std::to_string(f.from) + " -> g" + std::to_string(g + 1) +
                   "_b" + std::to_string(f.to) + " [penwidth=" +
                   std::to_string(1.0 + 4.0 * std::max(0.0, 1.0 - dist)) + "];\n";
        }
    }
    dot += "}\n";
    return dot;
}

}  // namespace nsl

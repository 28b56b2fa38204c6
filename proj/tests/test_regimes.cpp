#include <catch2/catch_amalgamated.hpp>

#include "nsl/regimes.hpp"
#include "test_helpers.hpp"

using namespace nsl;
using nsl_test::make_trajectory;

namespace {

// History whose per-generation mean deltas pin the expected top-k dataset
// choices, including the skipped generations.
const std::vector<SignedBytes> kMeanDeltas{10, 20, 30, 40, 60, 70, 50, 80, 75, 100, 110, 5, 42};

History crafted_history(std::size_t generations = 13) {
    History h;
    for (std::size_t g = 1; g <= generations; ++g) {
        GenerationRecord rec;
        rec.dataset.generation = static_cast<std::int64_t>(g);
        for (int i = 0; i < 2; ++i)
            rec.dataset.trajectories.push_back(make_trajectory(
                "g" + std::to_string(g) + "-i" + std::to_string(i), static_cast<std::int64_t>(g),
                kMeanDeltas[g - 1]));
        rec.metrics.iteration_count = 4;
        rec.metrics.selected_count = 2;
        rec.metrics.compile_rate = 0.5;
        h.generations.push_back(std::move(rec));
    }
    return h;
}

std::vector<std::int64_t> gens_of(const ComposedDataset& d) { return d.included_generations; }

Regime window_regime() {
    Regime r;
    r.kind = RegimeKind::sliding_window;
    r.rehearsal_rows = 5;
    return r;
}

Regime full_regime() {
    Regime r;
    r.kind = RegimeKind::full_history;
    r.rehearsal_rows = 5;
    return r;
}

Regime topk_regime() {
    Regime r;
    r.kind = RegimeKind::top_k;
    r.rehearsal_rows = 5;
    return r;
}

}  // namespace

TEST_CASE("selection is strictly positive") {
    REQUIRE(select(make_trajectory("a", 1, 1)));
    REQUIRE_FALSE(select(make_trajectory("b", 1, 0)));
    REQUIRE_FALSE(select(make_trajectory("c", 1, -10)));
}

TEST_CASE("window law: generations max(1, t-2)..t for every t") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    for (std::int64_t t = 1; t <= 13; ++t) {
        auto d = compose_dataset(window_regime(), h, t, pool);
        std::vector<std::int64_t> expect;
        for (std::int64_t g = std::max<std::int64_t>(1, t - 2); g <= t; ++g) expect.push_back(g);
        REQUIRE(gens_of(d) == expect);
        for (const auto& traj : d.trajectories) REQUIRE(traj.generation >= t - 2);  // no leakage
    }
}

TEST_CASE("full-history law: generations 1..t") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    for (std::int64_t t = 1; t <= 13; ++t) {
        auto d = compose_dataset(full_regime(), h, t, pool);
        REQUIRE(d.included_generations.size() == static_cast<std::size_t>(t));
        REQUIRE(d.included_generations.front() == 1);
        REQUIRE(d.included_generations.back() == t);
    }
}

TEST_CASE("window membership schedule holds for versions 2..13") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    const std::vector<std::vector<std::int64_t>> expected{
        {1},       {1, 2},    {1, 2, 3},  {1, 2, 3, 4}, {3, 4, 5},   {4, 5, 6},
        {5, 6, 7}, {6, 7, 8}, {7, 8, 9},  {8, 9, 10},   {9, 10, 11}, {10, 11, 12}};
    for (std::int64_t v = 2; v <= 13; ++v)
        REQUIRE(gens_of(dataset_for_version(window_regime(), h, v, pool)) == expected[static_cast<std::size_t>(v - 2)]);
}

TEST_CASE("top-k membership schedule holds, including skipped generations") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    const std::vector<std::vector<std::int64_t>> expected{
        {1},       {1, 2},    {1, 2, 3},  {1, 2, 3, 4}, {3, 4, 5},   {4, 5, 6},
        {5, 6, 7}, {5, 6, 8}, {6, 8, 9},  {8, 9, 10},   {8, 10, 11}, {8, 10, 11}};
    for (std::int64_t v = 2; v <= 13; ++v) {
        CAPTURE(v);
        REQUIRE(gens_of(dataset_for_version(topk_regime(), h, v, pool)) == expected[static_cast<std::size_t>(v - 2)]);
    }
}

TEST_CASE("full-history memberships are the 1..v-1 prefix for versions 2..13") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    for (std::int64_t v = 2; v <= 13; ++v) {
        auto got = gens_of(dataset_for_version(full_regime(), h, v, pool));
        REQUIRE(got.size() == static_cast<std::size_t>(v - 1));
        REQUIRE(got.front() == 1);
        REQUIRE(got.back() == v - 1);
    }
}

TEST_CASE("top-k ties break toward the more recent generation") {
    History h;
    for (std::int64_t g = 1; g <= 4; ++g) {
        GenerationRecord rec;
        rec.dataset.generation = g;
        rec.dataset.trajectories.push_back(make_trajectory("t" + std::to_string(g), g, 50));  // all tied
        h.generations.push_back(std::move(rec));
    }
    Regime r = topk_regime();
    auto d = compose_dataset(r, h, 4, RehearsalPool::make());
    REQUIRE(gens_of(d) == std::vector<std::int64_t>{2, 3, 4});
}

TEST_CASE("rank_by success_rate uses the recorded compile rates") {
    auto h = crafted_history(4);
    h.generations[0].metrics.compile_rate = 0.9;
    h.generations[1].metrics.compile_rate = 0.1;
    h.generations[2].metrics.compile_rate = 0.8;
    h.generations[3].metrics.compile_rate = 0.2;
    Regime r = topk_regime();
    r.rank_by = RankBy::success_rate;
    auto d = compose_dataset(r, h, 4, RehearsalPool::make());
    REQUIRE(gens_of(d) == std::vector<std::int64_t>{1, 3, 4});
}

TEST_CASE("composed datasets never contain non-positive deltas") {
    auto h = crafted_history(3);
    // sneak a zero-delta trajectory into a recorded dataset
    h.generations[1].dataset.trajectories.push_back(make_trajectory("bad", 2, 0));
    auto d = compose_dataset(full_regime(), h, 3, RehearsalPool::make());
    for (const auto& t : d.trajectories) REQUIRE(t.delta_r_bytes > 0);
}

TEST_CASE("empty history composes to rehearsal only, flagged") {
    History h;
    auto d = compose_dataset(window_regime(), h, 0, RehearsalPool::make());
    REQUIRE(d.empty_history_warning);
    REQUIRE(d.trajectories.empty());
    REQUIRE(d.rehearsal.size() == 5);
}

TEST_CASE("rehearsal rows scale with included generations, deterministically") {
    auto h = crafted_history();
    auto pool = RehearsalPool::make();
    auto d1 = compose_dataset(window_regime(), h, 7, pool);
    auto d2 = compose_dataset(window_regime(), h, 7, pool);
    REQUIRE(d1.rehearsal.size() == 15);  // 3 generations x 5 rows
    REQUIRE(d1.manifest().dump() == d2.manifest().dump());
    for (const auto& r : d1.rehearsal) REQUIRE(r.id.rfind("rh-", 0) == 0);  // disjoint id space
}

TEST_CASE("manifest lists every trajectory id per generation") {
    auto h = crafted_history();
    auto d = compose_dataset(window_regime(), h, 5, RehearsalPool::make());
    auto m = d.manifest();
    std::size_t listed = 0;
    for (const auto& [g, ids] : m.at("generations").items()) {
        (void)g;
        listed += ids.size();
    }
    REQUIRE(listed == d.trajectories.size());
}

TEST_CASE("a two-step full-history lineage consumes both generations") {
    LineageConfig cfg;
    cfg.loop.world.seed = 5;
    cfg.loop.world.container_count = {3, 4};
    cfg.loop.world.files_per_container = {5, 9};
    cfg.loop.rows_target = 15;
    cfg.regime = full_regime();
    cfg.generations = 2;
    auto st = lineage_begin(cfg);
    lineage_step(st, cfg);
    lineage_step(st, cfg);
    REQUIRE(st.generation == 2);
    REQUIRE(st.manifests.size() == 2);
    const auto& second = st.manifests[1];
    REQUIRE(second.at("generations").contains("1"));
    REQUIRE(second.at("generations").contains("2"));
}

TEST_CASE("updates always start from the seed repertoire, not the previous update") {
    LineageConfig cfg;
    cfg.loop.world.seed = 6;
    cfg.loop.world.container_count = {3, 4};
    cfg.loop.world.files_per_container = {5, 9};
    cfg.loop.rows_target = 12;
    cfg.regime = window_regime();
    auto st = lineage_begin(cfg);
    lineage_step(st, cfg);
    lineage_step(st, cfg);
    // recompute the latest update independently from the seed
    auto composed = dataset_for_version(cfg.regime, st.history, st.generation + 1, st.pool);
    auto expect = surrogate_update(st.seed_rep, composed.trajectories,
                                   static_cast<std::uint64_t>(st.generation), &st.probe_world);
    REQUIRE(json(expect.strategies).dump() == json(st.current.strategies).dump());
}

TEST_CASE("rehearsal fraction tracks rows_target within rounding") {
    LineageConfig cfg;
    cfg.loop.world.seed = 7;
    cfg.loop.world.container_count = {3, 4};
    cfg.loop.world.files_per_container = {6, 10};
    cfg.loop.rows_target = 45;
    cfg.regime = window_regime();  // 5 rehearsal rows per generation: the 45:5 split
    auto st = lineage_begin(cfg);
    lineage_step(st, cfg);
    lineage_step(st, cfg);
    auto composed = dataset_for_version(cfg.regime, st.history, 3, st.pool);
    const double frac = static_cast<double>(composed.rehearsal.size()) /
                        static_cast<double>(composed.rehearsal.size() + composed.data_rows());
    REQUIRE(frac == Catch::Approx(5.0 / 50.0).margin(0.02));
}

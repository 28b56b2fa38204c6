// Quantitative measures over trajectory logs. Everything here is a pure
// function of the logs, reproducible bit-exactly from the JSONL alone.
// Improvement scores divide metric deltas by the SD across all checkpoints,
// so they are report-time quantities, not online ones.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nsl/embedding.hpp"
#include "nsl/trajectory.hpp"

namespace nsl {

constexpr double kBytesPerMb = 1e6;

enum class SdMode { population, sample };

struct ImprovementScores {
    std::vector<double> scores;  // scores[0] == 0 by definition
    bool zero_variance = false;
    double sigma = 0.0;
};

inline double series_sd(const std::vector<double>& series, SdMode mode) {
    const auto n = static_cast<double>(series.size());
    double mean = 0;
    for (double v : series) mean += v;
    mean /= n;
    double ss = 0;
    for (double v : series) ss += (v - mean) * (v - mean);
    const double denom = (mode == SdMode::population) ? n : (n - 1.0);
    return denom > 0 ? std::sqrt(ss / denom) : 0.0;
}

/// out[i] = (M_i - M_{i-1}) / sd(series); out[0] = 0. Zero-variance series
/// yield all zeros with the flag set.
inline ImprovementScores improvement_scores(const std::vector<double>& series, SdMode mode = SdMode::population) {
    if (series.size() < 2) throw std::invalid_argument("improvement_scores: need >= 2 checkpoints");
    ImprovementScores out;
    out.sigma = series_sd(series, mode);
    out.scores.assign(series.size(), 0.0);
    if (out.sigma <= 0.0) {
        out.zero_variance = true;
        return out;
    }
    for (std::size_t i = 1; i < series.size(); ++i) out.scores[i] = (series[i] - series[i - 1]) / out.sigma;
    return out;
}

inline std::vector<double> cumulative_sum(const std::vector<double>& xs) {
    std::vector<double> out;
    double acc = 0;
    for (double x : xs) out.push_back(acc += x);
    return out;
}

struct CompositeScores {
    std::vector<double> per_step;    // mean of per-metric improvement scores
    std::vector<double> cumulative;  // running sum
    bool any_zero_variance = false;
};

/// Unweighted mean of the improvement scores of each metric series.
inline CompositeScores composite_scores(const std::vector<std::vector<double>>& metric_series,
                                        SdMode mode = SdMode::population) {
    if (metric_series.empty()) throw std::invalid_argument("composite_scores: no metrics");
    const auto n = metric_series.front().size();
    CompositeScores out;
    out.per_step.assign(n, 0.0);
    for (const auto& series : metric_series) {
        if (series.size() != n) throw std::invalid_argument("composite_scores: ragged series");
        auto imp = improvement_scores(series, mode);
        out.any_zero_variance |= imp.zero_variance;
        for (std::size_t i = 0; i < n; ++i) out.per_step[i] += imp.scores[i] / static_cast<double>(metric_series.size());
    }
    out.cumulative = cumulative_sum(out.per_step);
    return out;
}

/// Mean squared distance to the centroid in embedding space.
inline double diversity_embedded(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) return 0.0;
    const auto d = vectors.front().size();
    std::vector<double> mu(d, 0.0);
    for (const auto& v : vectors)
        for (std::size_t i = 0; i < d; ++i) mu[i] += v[i];
    for (double& x : mu) x /= static_cast<double>(vectors.size());
    double acc = 0;
    for (const auto& v : vectors) acc += squared_distance(v, mu);
    return acc / static_cast<double>(vectors.size());
}

inline double diversity(const std::vector<std::string>& texts, const EmbeddingSpace& space) {
    if (texts.empty()) throw std::invalid_argument("diversity: no texts");
    std::vector<std::vector<double>> vs;
    vs.reserve(texts.size());
    for (const auto& t : texts) vs.push_back(space.embed(t));
    return diversity_embedded(vs);
}

// ---- per-generation metrics -----------------------------------------------------

struct GenerationMetrics {
    double pct_space_freed = 0.0;    // mean over iterations of (freed+claimed)/total
    double avg_space_taken_mb = 0.0; // mean over iterations of (freed+claimed), in MB
    double compile_rate = 0.0;       // scripts without error / scripts submitted, all attempts
    double pass_at_1 = 0.0;          // iterations with both stages clean on attempt 1
    double pass_at_1_block = 0.0;    // per-stage-block variant
    double diversity = 0.0;          // D_t over all proposed strategy texts
    std::int64_t iteration_count = 0;
    std::int64_t selected_count = 0;
    std::int64_t rows_selected = 0;
    std::int64_t aborted_count = 0;
};

inline void to_json(json& j, const GenerationMetrics& m) {
    j = json{{"pct_space_freed", m.pct_space_freed},
             {"avg_space_taken_mb", m.avg_space_taken_mb},
             {"compile_rate", m.compile_rate},
             {"pass_at_1", m.pass_at_1},
             {"pass_at_1_block", m.pass_at_1_block},
             {"diversity", m.diversity},
             {"iteration_count", m.iteration_count},
             {"selected_count", m.selected_count},
             {"rows_selected", m.rows_selected},
             {"aborted_count", m.aborted_count}};
}
inline void from_json(const json& j, GenerationMetrics& m) {
    j.at("pct_space_freed").get_to(m.pct_space_freed);
    j.at("avg_space_taken_mb").get_to(m.avg_space_taken_mb);
    j.at("compile_rate").get_to(m.compile_rate);
    j.at("pass_at_1").get_to(m.pass_at_1);
    j.at("pass_at_1_block").get_to(m.pass_at_1_block);
    j.at("diversity").get_to(m.diversity);
    j.at("iteration_count").get_to(m.iteration_count);
    j.at("selected_count").get_to(m.selected_count);
    j.at("rows_selected").get_to(m.rows_selected);
    j.at("aborted_count").get_to(m.aborted_count);
}

/// Recomputes a generation's metrics from its complete iteration log
/// (selected and unselected trajectories alike).
inline GenerationMetrics compute_generation_metrics(const std::vector<Trajectory>& iterations,
                                                    const EmbeddingSpace& space = {}) {
    GenerationMetrics m;
    m.iteration_count = static_cast<std::int64_t>(iterations.size());
    if (iterations.empty()) return m;

    double pct_acc = 0, taken_acc = 0;
    std::int64_t scripts = 0, scripts_ok = 0;
    std::int64_t blocks = 0, blocks_first_try = 0;
    std::int64_t pass1 = 0;
    std::vector<std::string> texts;
    for (const auto& t : iterations) {
        const double freed = static_cast<double>(std::max<SignedBytes>(t.delta_r_bytes, 0));
        const double taken = freed + static_cast<double>(t.claimed_bytes);
        if (t.world_total_bytes > 0) pct_acc += taken / static_cast<double>(t.world_total_bytes);
        taken_acc += taken;
        bool saw_explo = false, saw_exec = false;
        for (const auto& e : t.executed) {
            ++scripts;
            scripts_ok += e.outcome.ok() ? 1 : 0;
            if (e.stage == Stage::exploration && e.attempt == 1) {
                saw_explo = true;
                ++blocks;
                blocks_first_try += e.outcome.ok() ? 1 : 0;
            }
            if (e.stage == Stage::execution && e.attempt == 1) {
                saw_exec = true;
                ++blocks;
                blocks_first_try += e.outcome.ok() ? 1 : 0;
            }
        }
        (void)saw_explo;
        (void)saw_exec;
        pass1 += t.first_try_pass() ? 1 : 0;
        if (t.selected) {
            ++m.selected_count;
            m.rows_selected += t.rows();
        }
        if (t.abort_reason) ++m.aborted_count;
        for (const auto& s : t.strategy_texts) texts.push_back(s);
    }
    const auto n = static_cast<double>(iterations.size());
    m.pct_space_freed = pct_acc / n;
    m.avg_space_taken_mb = (taken_acc / n) / kBytesPerMb;
    m.compile_rate = scripts > 0 ? static_cast<double>(scripts_ok) / static_cast<double>(scripts) : 0.0;
    m.pass_at_1 = static_cast<double>(pass1) / n;
    m.pass_at_1_block = blocks > 0 ? static_cast<double>(blocks_first_try) / static_cast<double>(blocks) : 0.0;
    m.diversity = texts.empty() ? 0.0 : diversity(texts, space);
    return m;
}

}  // namespace nsl

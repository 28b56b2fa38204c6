// Independent oracles used by the unit and acceptance suites. These stay
// deliberately naive: dense eigendecomposition via Eigen, agglomerative
// clustering recomputing full mean pairwise distances at every step.
#pragma once

#include <Eigen/Dense>

#include "nsl/basins.hpp"

namespace nsl_oracle {

inline nsl::PcaResult eigen_pca(const nsl::Matrix& vectors, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(vectors.size());
    const auto d = static_cast<Eigen::Index>(vectors.front().size());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            x(r, c) = vectors[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    nsl::PcaResult out;
    for (std::size_t c = 0; c < k; ++c) {
        const auto col = d - 1 - static_cast<Eigen::Index>(c);  // eigen sorts ascending
        out.explained_variance.push_back(solver.eigenvalues()(col));
        std::vector<double> comp(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) comp[static_cast<std::size_t>(i)] = solver.eigenvectors()(i, col);
        out.components.push_back(std::move(comp));
    }
    out.projected.assign(static_cast<std::size_t>(n), std::vector<double>(k, 0.0));
    for (Eigen::Index r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0;
            for (Eigen::Index i = 0; i < d; ++i)
                dot += centered(r, i) * out.components[c][static_cast<std::size_t>(i)];
            out.projected[static_cast<std::size_t>(r)][c] = dot;
        }
    return out;
}

inline std::vector<std::vector<std::size_t>> agglomerate_bruteforce(const nsl::Matrix& pts, double tau_link) {
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < pts.size(); ++i) clusters.push_back({i});
    auto cluster_dist = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        double sum = 0;
        for (auto i : a)
            for (auto j : b) sum += nsl::cosine_distance(pts[i], pts[j]);
        return sum / static_cast<double>(a.size() * b.size());
    };
    while (clusters.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double dd = cluster_dist(clusters[i], clusters[j]);
                if (dd < best) {
                    best = dd;
                    bi = i;
                    bj = j;
                }
            }
        if (best > tau_link) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        std::sort(clusters[bi].begin(), clusters[bi].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    std::sort(clusters.begin(), clusters.end());
    return clusters;
}

inline nsl::Matrix random_matrix(nsl::Rng& rng, std::size_t n, std::size_t d, double scale = 1.0) {
    nsl::Matrix m(n, std::vector<double>(d));
    for (auto& row : m)
        for (auto& x : row) x = (rng.uniform_real() * 2 - 1) * scale;
    return m;
}

}  // namespace nsl_oracle

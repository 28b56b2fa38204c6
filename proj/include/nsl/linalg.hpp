// Small dense symmetric eigendecomposition (cyclic Jacobi). Dimensions here
// are tiny (embedding dimension at most), so O(d^3) sweeps are fine.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nsl {

using Matrix = std::vector<std::vector<double>>;

struct EigenDecomposition {
    std::vector<double> values;   // descending
    Matrix vectors;               // vectors[k] is the k-th eigenvector
};

inline EigenDecomposition jacobi_eigen_symmetric(Matrix a) {
    const std::size_t n = a.size();
    for (const auto& row : a)
        if (row.size() != n) throw std::invalid_argument("jacobi: matrix not square");
    Matrix v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    auto off_diagonal = [&] {
        double s = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p][q] * a[p][q];
        return s;
    };
    double frob = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) frob += a[i][j] * a[i][j];
    const double tol = 1e-28 * (frob > 0 ? frob : 1.0);

    for (int sweep = 0; sweep < 128 && off_diagonal() > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i][p], viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

    EigenDecomposition out;
    for (auto idx : order) {
        out.values.push_back(a[idx][idx]);
        std::vector<double> vec(n);
        for (std::size_t i = 0; i < n; ++i) vec[i] = v[i][idx];
        out.vectors.push_back(std::move(vec));
    }
    return out;
}

}  // namespace nsl

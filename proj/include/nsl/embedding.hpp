// Deterministic strategy-text embeddings: signed hashed token n-grams
// (unigrams + bigrams) into R^d, L2-normalized. Order-sensitive enough to
// separate the strategy vocabulary without any learned model.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace nsl {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct EmbeddingSpace {
    std::size_t dimension = 64;

    std::vector<double> embed(const std::string& text) const {
        std::vector<double> v(dimension, 0.0);
        std::vector<std::string> tokens;
        std::string cur;
        for (char ch : text) {
            if (std::isalnum(static_cast<unsigned char>(ch))) {
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            } else if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(cur);
        auto add = [&](const std::string& feature) {
            const auto h = fnv1a64(feature);
            const auto bucket = static_cast<std::size_t>(h % dimension);
            const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
            v[bucket] += sign;
        };
        for (const auto& t : tokens) add(t);
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) add(tokens[i] + "_" + tokens[i + 1]);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    }
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-24 && nb < 1e-24) return 0.0;
    if (na < 1e-24 || nb < 1e-24) return 1.0;
    return 1.0 - dot / std::sqrt(na * nb);
}

}  // namespace nsl

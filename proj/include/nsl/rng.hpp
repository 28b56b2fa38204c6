// Deterministic random source. std::* distributions are implementation-defined,
// so every draw used by the simulator goes through this header to keep worlds
// and trajectory logs bit-identical across platforms and reruns.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a seed with stream labels (generation index, epoch, ...) so that
/// sub-streams are independent and order-free.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> streams) {
    std::uint64_t s = base;
    std::uint64_t acc = splitmix64(s);
    for (std::uint64_t v : streams) {
        s ^= v + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2);
        acc = splitmix64(s);
    }
    return acc;
}

/// xoshiro256** seeded via splitmix64. State is serializable.
class Rng {
public:
    using State = std::array<std::uint64_t, 4>;

    Rng() : Rng(0xd1b54a32d192ed03ULL) {}
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }
    explicit Rng(const State& s) : state_(s) {
        bool all_zero = true;
        for (auto w : state_) all_zero &= (w == 0);
        if (all_zero) throw std::invalid_argument("rng state must be nonzero");
    }

    const State& state() const { return state_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Unbiased draw in [0, bound) (Lemire with rejection).
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("bounded(0)");
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        return lo + static_cast<std::int64_t>(bounded(span));
    }

    /// [0, 1) with 53 random bits.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform_real() < p;
    }

    /// Log-uniform integer in [lo, hi], lo >= 1.
    std::uint64_t log_uniform(std::uint64_t lo, std::uint64_t hi) {
        if (lo < 1 || lo > hi) throw std::invalid_argument("log_uniform: bad range");
        if (lo == hi) return lo;
        const double a = std::log(static_cast<double>(lo));
        const double b = std::log(static_cast<double>(hi) + 1.0);
        const double u = a + (b - a) * uniform_real();
        auto v = static_cast<std::uint64_t>(std::exp(u));
        if (v < lo) v = lo;
        if (v > hi) v = hi;
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& xs) {
        if (xs.empty()) throw std::invalid_argument("pick: empty");
        return xs[static_cast<std::size_t>(bounded(xs.size()))];
    }

    /// Index sampled proportional to the given non-negative weights.
    std::size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("weighted_index: zero mass");
        double u = uniform_real() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    State state_{};
};

}  // namespace nsl

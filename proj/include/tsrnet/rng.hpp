#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tsrnet {

// splitmix64-based generator. Self-contained so that sampling is
// bit-reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for our n.
    std::uint64_t bounded(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box-Muller; second value discarded to keep the stream simple.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // k distinct indices from [0, n), sorted ascending. Partial Fisher-Yates.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(bounded(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(k));
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::uint64_t state_;
};

// Deterministic seed derivation for per-step randomness. Arguments are
// hashed sequentially; a plain XOR combine collides for nearby pairs.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    auto finalize = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = finalize(a + 0x9e3779b97f4a7c15ULL);
    h = finalize(h ^ (b + 0x9e3779b97f4a7c15ULL));
    h = finalize(h ^ (c + 0x9e3779b97f4a7c15ULL));
    return h;
}

} // namespace tsrnet

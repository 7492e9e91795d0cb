#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace autolabel {

// Stream tags keep the substreams of different pipeline stages apart.
enum class Stream : std::uint64_t {
    init = 1,
    shuffle = 2,
    train_aug = 3,
    validation = 4,
    corruption = 5,
    attack_eval = 6,
    synthetic = 7,
    split = 8,
    preview = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Random stream used throughout the pipeline.
///
/// Every stochastic operation takes an Rng by reference. Parallel work derives
/// an independent substream per sample with Rng::derive so results never
/// depend on scheduling or thread count.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

    /// Deterministic substream keyed by (seed, tags...).
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
        std::uint64_t h = splitmix64(seed);
        for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
        return Rng(h);
    }
    static Rng derive(std::uint64_t seed, Stream s, std::initializer_list<std::uint64_t> tags = {}) {
        std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(s) << 56));
        for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
        return Rng(h);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform in (lo, hi].
    double uniform_left_open(double lo, double hi) { return hi - (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection keeps the draw exactly uniform.
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return lo + static_cast<int>(v % span);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    /// Beta(a, b) via two gamma draws.
    double beta(double a, double b) {
        const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
        const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
        if (x + y <= 0.0) return 0.5;
        return x / (x + y);
    }
    bool bernoulli(double p) { return uniform() < p; }
    int sign() { return (engine_() & 1U) ? 1 : -1; }

private:
    std::mt19937_64 engine_;
};

} // namespace autolabel

#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oracles {

/// Two-loop ECE: for each bin ((r-1)/R, r/R] scan all samples. Confidence 0
/// belongs to bin 1.
struct NaiveEce {
    double ece = 0.0;
    std::vector<std::size_t> counts;
};

inline NaiveEce naive_ece(std::span<const double> conf, std::span<const bool> correct, int bins) {
    NaiveEce out;
    const double m = static_cast<double>(conf.size());
    for (int r = 1; r <= bins; ++r) {
        const double lo = (r - 1) / static_cast<double>(bins);
        const double hi = r / static_cast<double>(bins);
        std::size_t n = 0;
        double hits = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < conf.size(); ++i) {
            const bool inside = (conf[i] > lo || (r == 1 && conf[i] == 0.0)) && conf[i] <= hi;
            if (!inside) continue;
            ++n;
            hits += correct[i] ? 1.0 : 0.0;
            sum += conf[i];
        }
        out.counts.push_back(n);
        if (n) out.ece += (n / m) * std::abs(hits / n - sum / n);
    }
    return out;
}

/// Bucket of the exact fraction num/den of the range, N buckets: the smallest
/// n in 1..N with num/den <= n/N, found by stepping one bucket at a time in
/// integer arithmetic.
inline int stepped_bucket(std::uint64_t num, std::uint64_t den, int n_buckets) {
    int n = 1;
    while (n < n_buckets && num * static_cast<std::uint64_t>(n_buckets) > static_cast<std::uint64_t>(n) * den) ++n;
    return n;
}

} // namespace oracles

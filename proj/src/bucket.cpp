#include "autolabel/bucket.hpp"

#include <algorithm>
#include <cmath>

#include "autolabel/error.hpp"

namespace autolabel {

namespace {

constexpr std::array<std::string_view, kNumOpTypes> kOpNames = {
    "color", "rotation", "autocontrast", "equalize", "posterize",
    "solarize", "shearX", "shearY", "translateX", "translateY",
};

constexpr std::array<std::string_view, 4> kFamilyNames = {"randaug", "augmix", "adversarial", "mixup"};

void check_buckets(int n_buckets) {
    if (n_buckets < 1) throw InvalidConfig("bucket count must be at least 1");
}

} // namespace

std::string_view to_string(OpType op) { return kOpNames.at(static_cast<std::size_t>(op)); }

std::optional<OpType> parse_op(std::string_view name) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == name) return static_cast<OpType>(i);
    return std::nullopt;
}

std::string_view to_string(Family f) { return kFamilyNames.at(static_cast<std::size_t>(f)); }

std::optional<Family> parse_family(std::string_view name) {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
        if (kFamilyNames[i] == name) return static_cast<Family>(i);
    return std::nullopt;
}

std::string to_string(const BucketKey& key) {
    std::string out(to_string(key.family));
    switch (key.family) {
    case Family::randaug:
        out += ":";
        out += to_string(key.op());
        out += ":" + std::to_string(key.coords[1]);
        break;
    case Family::augmix: out += ":" + std::to_string(key.coords[0]) + ":" + std::to_string(key.coords[1]); break;
    case Family::adversarial:
    case Family::mixup: out += ":" + std::to_string(key.coords[0]); break;
    }
    return out;
}

int ceil_bucket(double t, int n_buckets) {
    check_buckets(n_buckets);
    const double nearest = std::nearbyint(t);
    const double snapped = std::abs(t - nearest) <= 1e-9 * std::max(1.0, std::abs(t)) ? nearest : std::ceil(t);
    return std::clamp(static_cast<int>(snapped), 1, n_buckets);
}

BucketKey augmix_bucket(int depth, double lambda, int n_buckets) {
    if (depth < 1) throw InvalidConfig("augmix depth must be at least 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("augmix lambda outside [0, 1]");
    return BucketKey::augmix(depth, ceil_bucket(lambda * n_buckets, n_buckets));
}

BucketKey mixup_bucket(double gamma, int n_buckets) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidConfig("mixup gamma outside [0, 1]");
    const double g = std::min(gamma, 1.0 - gamma);
    return BucketKey::mixup(ceil_bucket(2.0 * n_buckets * g, n_buckets));
}

BucketKey adv_bucket(double eps, double eps_max, int n_buckets) {
    if (!(eps_max > 0.0)) throw InvalidConfig("eps_max must be positive");
    if (!(eps >= 0.0)) throw InvalidConfig("eps must be non-negative");
    if (eps > eps_max) throw InvalidConfig("eps " + std::to_string(eps) + " exceeds eps_max " + std::to_string(eps_max));
    return BucketKey::adversarial(ceil_bucket(eps * n_buckets / eps_max, n_buckets));
}

std::vector<BucketKey> randaug_buckets(std::span<const OpType> ops, int m_max) {
    if (m_max < 1) throw InvalidConfig("m_max must be at least 1");
    std::vector<BucketKey> out;
    for (auto op : ops) {
        if (!has_magnitude(op)) {
            out.push_back(BucketKey::randaug(op, 1));
            continue;
        }
        for (int m = 1; m <= m_max; ++m) out.push_back(BucketKey::randaug(op, m));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<BucketKey> augmix_buckets(int d_max, int n_buckets) {
    check_buckets(n_buckets);
    if (d_max < 1) throw InvalidConfig("d_max must be at least 1");
    std::vector<BucketKey> out;
    for (int d = 1; d <= d_max; ++d)
        for (int n = 1; n <= n_buckets; ++n) out.push_back(BucketKey::augmix(d, n));
    return out;
}

std::vector<BucketKey> adversarial_buckets(int n_buckets) {
    check_buckets(n_buckets);
    std::vector<BucketKey> out;
    for (int n = 1; n <= n_buckets; ++n) out.push_back(BucketKey::adversarial(n));
    return out;
}

std::vector<BucketKey> mixup_buckets(int n_buckets) {
    check_buckets(n_buckets);
    std::vector<BucketKey> out;
    for (int n = 1; n <= n_buckets; ++n) out.push_back(BucketKey::mixup(n));
    return out;
}

} // namespace autolabel

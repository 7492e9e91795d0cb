#pragma once

// Discretised transformation distance. A BucketKey names one label-table
// entry: every augmented sample whose distance falls in the same bucket shares
// a true-class confidence.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace autolabel {

enum class OpType : std::uint8_t {
    color = 0,
    rotation,
    autocontrast,
    equalize,
    posterize,
    solarize,
    shear_x,
    shear_y,
    translate_x,
    translate_y,
};

inline constexpr std::size_t kNumOpTypes = 10;

inline constexpr std::array<OpType, kNumOpTypes> kAllOps = {
    OpType::color,     OpType::rotation, OpType::autocontrast, OpType::equalize,    OpType::posterize,
    OpType::solarize,  OpType::shear_x,  OpType::shear_y,      OpType::translate_x, OpType::translate_y,
};

/// Rotation, posterize, solarize, shear X and shear Y: the five magnitude-monotone
/// transformations of the magnitude sweep.
inline constexpr std::array<OpType, 5> kMotivationOps = {OpType::rotation, OpType::posterize, OpType::solarize,
                                                         OpType::shear_x, OpType::shear_y};

std::string_view to_string(OpType op);
std::optional<OpType> parse_op(std::string_view name);

/// Autocontrast and equalize carry no magnitude.
constexpr bool has_magnitude(OpType op) { return op != OpType::autocontrast && op != OpType::equalize; }

enum class Family : std::uint8_t { randaug = 0, augmix, adversarial, mixup };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view name);

struct BucketKey {
    Family family = Family::randaug;
    // randaug: (op type, magnitude); augmix: (depth, n); adversarial and mixup: (n, 0).
    std::array<int, 2> coords{0, 0};

    static BucketKey randaug(OpType op, int magnitude) {
        return {Family::randaug, {static_cast<int>(op), magnitude}};
    }
    static BucketKey augmix(int depth, int n) { return {Family::augmix, {depth, n}}; }
    static BucketKey adversarial(int n) { return {Family::adversarial, {n, 0}}; }
    static BucketKey mixup(int n) { return {Family::mixup, {n, 0}}; }

    /// Distance index n for the single-coordinate families.
    int n() const { return family == Family::augmix ? coords[1] : coords[0]; }
    OpType op() const { return static_cast<OpType>(coords[0]); }

    auto operator<=>(const BucketKey&) const = default;
};

/// "randaug:rotation:3", "augmix:2:5", "adversarial:4", "mixup:1".
std::string to_string(const BucketKey& key);

/// ceil(t) for t = fraction * N, clamped to {1..N}. Products within 1e-9 of an
/// integer snap to it, so 0.07 * 100 lands in bucket 7, not 8. Zero merges into 1.
int ceil_bucket(double t, int n_buckets);

/// (augmix, d, ceil(lambda * N)), lambda = 0 merged into n = 1.
BucketKey augmix_bucket(int depth, double lambda, int n_buckets);

/// (mixup, ceil(2N * min(gamma, 1 - gamma))), gamma in {0, 1} merged into n = 1.
BucketKey mixup_bucket(double gamma, int n_buckets);

/// (adversarial, ceil(eps * N / eps_max)), eps = 0 merged into n = 1.
/// Throws InvalidConfig when eps > eps_max or eps < 0.
BucketKey adv_bucket(double eps, double eps_max, int n_buckets);

/// All buckets of a family in canonical order.
std::vector<BucketKey> randaug_buckets(std::span<const OpType> ops, int m_max);
std::vector<BucketKey> augmix_buckets(int d_max, int n_buckets);
std::vector<BucketKey> adversarial_buckets(int n_buckets);
std::vector<BucketKey> mixup_buckets(int n_buckets);

} // namespace autolabel

#pragma once

// RandAug transformations, single-chain AugMix and mixup. Every sampler returns
// the augmented image together with the BucketKey of its transformation
// distance. Outputs are clamped to [0, 1] and keep the input shape.

#include <span>
#include <vector>

#include "autolabel/bucket.hpp"
#include "autolabel/rng.hpp"
#include "autolabel/tensor.hpp"

namespace autolabel {

inline constexpr int kMaxMagnitude = 10;

struct RandAugParams {
    OpType op = OpType::rotation;
    int magnitude = 1; // 1..m_max; 0 is the op's identity-strength setting
    int sign = 1;      // direction for rotation, shear, translate and color

    friend bool operator==(const RandAugParams&, const RandAugParams&) = default;
};

// Magnitude -> op parameter, linear in m.
double rotation_degrees(int m);      // 3 m
double shear_factor(int m);          // 0.03 m
double translate_fraction(int m);    // 0.03 m of the image side
int posterize_bits(int m);           // 8 - floor(4 m / 10), at least 1
double solarize_threshold(int m);    // 1 - m / 10
double color_factor_delta(int m);    // 0.09 m

// Primitive image operations.
Image rotate(const Image& im, double degrees);
Image shear_x(const Image& im, double factor);
Image shear_y(const Image& im, double factor);
Image translate(const Image& im, double dx, double dy);
Image posterize(const Image& im, int bits);
Image solarize(const Image& im, double threshold);
Image color_blend(const Image& im, double factor);
Image autocontrast(const Image& im);
Image equalize(const Image& im);

/// Throws InvalidConfig for an unknown op or negative magnitude.
Image apply_randaug_op(const Image& im, const RandAugParams& params);

/// Draws op uniformly from `ops`, m uniformly from {1..m_max} and a sign.
/// Parameterless ops get magnitude 1.
RandAugParams draw_randaug_params(Rng& rng, int m_max, std::span<const OpType> ops = kAllOps);

BucketKey randaug_bucket(const RandAugParams& params);

struct RandAugSample {
    Image image;
    RandAugParams params;
    BucketKey bucket;
};

RandAugSample sample_randaug(const Image& im, Rng& rng, int m_max, std::span<const OpType> ops = kAllOps);

struct AugMixParams {
    int depth = 1;
    double lambda = 1.0;
    std::vector<RandAugParams> chain; // exactly one chain of `depth` ops
};

/// Applies `depth` random ops at `magnitude` in sequence.
Image augmix_chain(const Image& im, Rng& rng, int depth, int magnitude, std::vector<RandAugParams>* chain,
                   std::span<const OpType> ops = kAllOps);

/// lambda * x + (1 - lambda) * x_aug. The endpoints reproduce x and x_aug bitwise.
Image convex_mix(const Image& x, const Image& x_aug, double lambda);

struct AugMixSample {
    Image image;
    AugMixParams params;
    BucketKey bucket;
};

/// d ~ U{1..d_max}, lambda ~ U(0, 1), one chain at the fixed magnitude.
AugMixSample augmix(const Image& im, Rng& rng, int d_max, int fixed_magnitude, int n_buckets,
                    std::span<const OpType> ops = kAllOps);

/// Fixed depth and lambda; the chain ops are still drawn from `rng`.
AugMixSample augmix_with(const Image& im, Rng& rng, int depth, double lambda, int fixed_magnitude, int n_buckets,
                         std::span<const OpType> ops = kAllOps);

struct MixupPair {
    double gamma = 1.0;
    double beta = 1.0;
    std::size_t partner_index = 0;
};

struct MixupSample {
    Image image;
    MixupPair pair;
    BucketKey bucket;
    int y_i = 0;
    int y_j = 0;
};

/// gamma * x_i + (1 - gamma) * x_j. gamma is drawn upstream from Beta(beta, beta).
MixupSample mixup(const Image& x_i, const Image& x_j, int y_i, int y_j, double gamma, int n_buckets);

} // namespace autolabel

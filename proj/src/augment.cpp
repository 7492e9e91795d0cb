#include "autolabel/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "autolabel/error.hpp"

namespace autolabel {

namespace {

void check_image(const Image& im) {
    if (im.rank() != 3 || im.empty()) throw InvalidInput("expected a C x H x W image, got " + shape_string(im.shape()));
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Inverse-mapped affine warp about the image centre with bilinear sampling and
// zero fill. (ox, oy) is the output offset from the centre; the source offset
// is inv * (ox, oy) + shift.
Image warp(const Image& im, const std::array<double, 4>& inv, double shift_x, double shift_y) {
    check_image(im);
    const std::size_t c_n = channels(im);
    const std::size_t h = height(im);
    const std::size_t w = width(im);
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    Image out(im.shape());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double ox = static_cast<double>(x) - cx;
            const double oy = static_cast<double>(y) - cy;
            const double sx = inv[0] * ox + inv[1] * oy + cx + shift_x;
            const double sy = inv[2] * ox + inv[3] * oy + cy + shift_y;
            const double fx0 = std::floor(sx);
            const double fy0 = std::floor(sy);
            const double fx = sx - fx0;
            const double fy = sy - fy0;
            const auto x0 = static_cast<std::ptrdiff_t>(fx0);
            const auto y0 = static_cast<std::ptrdiff_t>(fy0);
            for (std::size_t c = 0; c < c_n; ++c) {
                const float* plane = im.data() + c * h * w;
                auto at = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
                    if (xx < 0 || yy < 0 || xx >= static_cast<std::ptrdiff_t>(w) ||
                        yy >= static_cast<std::ptrdiff_t>(h))
                        return 0.0;
                    return plane[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
                };
                const double v = (1.0 - fx) * (1.0 - fy) * at(y0, x0) + fx * (1.0 - fy) * at(y0, x0 + 1) +
                                 (1.0 - fx) * fy * at(y0 + 1, x0) + fx * fy * at(y0 + 1, x0 + 1);
                out[(c * h + y) * w + x] = clamp01(v);
            }
        }
    }
    return out;
}

template <typename F>
Image map_pixels(const Image& im, F&& f) {
    check_image(im);
    Image out(im.shape());
    for (std::size_t i = 0; i < im.size(); ++i) out[i] = clamp01(f(static_cast<double>(im[i])));
    return out;
}

} // namespace

double rotation_degrees(int m) { return 3.0 * m; }
double shear_factor(int m) { return 0.03 * m; }
double translate_fraction(int m) { return 0.03 * m; }
int posterize_bits(int m) { return std::max(1, 8 - (m * 4) / 10); }
double solarize_threshold(int m) { return 1.0 - m / 10.0; }
double color_factor_delta(int m) { return 0.09 * m; }

Image rotate(const Image& im, double degrees) {
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    // Inverse of a rotation by +rad.
    return warp(im, {c, s, -s, c}, 0.0, 0.0);
}

Image shear_x(const Image& im, double factor) { return warp(im, {1.0, factor, 0.0, 1.0}, 0.0, 0.0); }

Image shear_y(const Image& im, double factor) { return warp(im, {1.0, 0.0, factor, 1.0}, 0.0, 0.0); }

Image translate(const Image& im, double dx, double dy) { return warp(im, {1.0, 0.0, 0.0, 1.0}, -dx, -dy); }

Image posterize(const Image& im, int bits) {
    if (bits < 1 || bits > 8) throw InvalidConfig("posterize bits must be in [1, 8]");
    const double levels = std::ldexp(1.0, bits);
    return map_pixels(im, [levels](double v) { return std::min(std::floor(v * levels), levels - 1.0) / levels; });
}

Image solarize(const Image& im, double threshold) {
    return map_pixels(im, [threshold](double v) { return v > threshold ? 1.0 - v : v; });
}

Image color_blend(const Image& im, double factor) {
    check_image(im);
    const std::size_t c_n = channels(im);
    const std::size_t plane = height(im) * width(im);
    Image out(im.shape());
    for (std::size_t p = 0; p < plane; ++p) {
        double gray = 0.0;
        if (c_n == 3) {
            gray = 0.299 * im[p] + 0.587 * im[plane + p] + 0.114 * im[2 * plane + p];
        } else {
            for (std::size_t c = 0; c < c_n; ++c) gray += im[c * plane + p];
            gray /= static_cast<double>(c_n);
        }
        for (std::size_t c = 0; c < c_n; ++c) {
            const double v = im[c * plane + p];
            out[c * plane + p] = clamp01(gray + factor * (v - gray));
        }
    }
    return out;
}

Image autocontrast(const Image& im) {
    check_image(im);
    const std::size_t plane = height(im) * width(im);
    Image out = im;
    for (std::size_t c = 0; c < channels(im); ++c) {
        const float* b = im.data() + c * plane;
        const auto [lo, hi] = std::minmax_element(b, b + plane);
        if (!(*hi > *lo)) continue;
        const double l = *lo;
        const double range = static_cast<double>(*hi) - l;
        for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = clamp01((b[p] - l) / range);
    }
    return out;
}

Image equalize(const Image& im) {
    check_image(im);
    const std::size_t plane = height(im) * width(im);
    Image out = im;
    for (std::size_t c = 0; c < channels(im); ++c) {
        const float* b = im.data() + c * plane;
        std::array<std::size_t, 256> hist{};
        std::vector<int> level(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            level[p] = static_cast<int>(std::lround(std::clamp(static_cast<double>(b[p]), 0.0, 1.0) * 255.0));
            ++hist[static_cast<std::size_t>(level[p])];
        }
        std::size_t last = 0;
        for (std::size_t i = 0; i < 256; ++i)
            if (hist[i]) last = i;
        const std::size_t step = (plane - hist[last]) / 255;
        if (step == 0) continue;
        std::array<double, 256> lut{};
        std::size_t n = step / 2;
        for (std::size_t i = 0; i < 256; ++i) {
            lut[i] = static_cast<double>(std::min<std::size_t>(255, n / step)) / 255.0;
            n += hist[i];
        }
        for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = clamp01(lut[static_cast<std::size_t>(level[p])]);
    }
    return out;
}

Image apply_randaug_op(const Image& im, const RandAugParams& params) {
    check_image(im);
    const int m = params.magnitude;
    if (m < 0) throw InvalidConfig("negative RandAug magnitude");
    const double sgn = params.sign < 0 ? -1.0 : 1.0;
    switch (params.op) {
    case OpType::color: return color_blend(im, 1.0 + sgn * color_factor_delta(m));
    case OpType::rotation: return rotate(im, sgn * rotation_degrees(m));
    case OpType::autocontrast: return autocontrast(im);
    case OpType::equalize: return equalize(im);
    case OpType::posterize: return posterize(im, posterize_bits(m));
    case OpType::solarize: return solarize(im, solarize_threshold(m));
    case OpType::shear_x: return shear_x(im, sgn * shear_factor(m));
    case OpType::shear_y: return shear_y(im, sgn * shear_factor(m));
    case OpType::translate_x: return translate(im, sgn * translate_fraction(m) * static_cast<double>(width(im)), 0.0);
    case OpType::translate_y:
        return translate(im, 0.0, sgn * translate_fraction(m) * static_cast<double>(height(im)));
    }
    throw InvalidConfig("unknown RandAug op " + std::to_string(static_cast<int>(params.op)));
}

RandAugParams draw_randaug_params(Rng& rng, int m_max, std::span<const OpType> ops) {
    if (m_max < 1) throw InvalidConfig("m_max must be at least 1");
    if (ops.empty()) throw InvalidConfig("empty RandAug op list");
    RandAugParams p;
    p.op = ops[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ops.size()) - 1))];
    p.magnitude = rng.uniform_int(1, m_max);
    p.sign = rng.sign();
    if (!has_magnitude(p.op)) p.magnitude = 1;
    return p;
}

BucketKey randaug_bucket(const RandAugParams& params) {
    return BucketKey::randaug(params.op, has_magnitude(params.op) ? params.magnitude : 1);
}

RandAugSample sample_randaug(const Image& im, Rng& rng, int m_max, std::span<const OpType> ops) {
    RandAugSample s;
    s.params = draw_randaug_params(rng, m_max, ops);
    s.image = apply_randaug_op(im, s.params);
    s.bucket = randaug_bucket(s.params);
    return s;
}

Image augmix_chain(const Image& im, Rng& rng, int depth, int magnitude, std::vector<RandAugParams>* chain,
                   std::span<const OpType> ops) {
    if (depth < 1) throw InvalidConfig("augmix depth must be at least 1");
    if (ops.empty()) throw InvalidConfig("empty RandAug op list");
    Image cur = im;
    if (chain) chain->clear();
    for (int i = 0; i < depth; ++i) {
        RandAugParams p;
        p.op = ops[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ops.size()) - 1))];
        p.magnitude = has_magnitude(p.op) ? magnitude : 1;
        p.sign = rng.sign();
        cur = apply_randaug_op(cur, p);
        if (chain) chain->push_back(p);
    }
    return cur;
}

Image convex_mix(const Image& x, const Image& x_aug, double lambda) {
    if (x.shape() != x_aug.shape())
        throw InvalidInput("cannot mix images of shapes " + shape_string(x.shape()) + " and " +
                           shape_string(x_aug.shape()));
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("mixing weight outside [0, 1]");
    const float l = static_cast<float>(lambda);
    const float r = static_cast<float>(1.0 - lambda);
    Image out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(l * x[i] + r * x_aug[i], 0.0f, 1.0f);
    return out;
}

AugMixSample augmix_with(const Image& im, Rng& rng, int depth, double lambda, int fixed_magnitude, int n_buckets,
                         std::span<const OpType> ops) {
    AugMixSample s;
    s.params.depth = depth;
    s.params.lambda = lambda;
    const Image x_aug = augmix_chain(im, rng, depth, fixed_magnitude, &s.params.chain, ops);
    s.image = convex_mix(im, x_aug, lambda);
    s.bucket = augmix_bucket(depth, lambda, n_buckets);
    return s;
}

AugMixSample augmix(const Image& im, Rng& rng, int d_max, int fixed_magnitude, int n_buckets,
                    std::span<const OpType> ops) {
    if (d_max < 1) throw InvalidConfig("d_max must be at least 1");
    const int depth = rng.uniform_int(1, d_max);
    const double lambda = rng.uniform();
    return augmix_with(im, rng, depth, lambda, fixed_magnitude, n_buckets, ops);
}

MixupSample mixup(const Image& x_i, const Image& x_j, int y_i, int y_j, double gamma, int n_buckets) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidConfig("mixup gamma outside [0, 1]");
    MixupSample s;
    s.image = convex_mix(x_i, x_j, gamma);
    s.pair.gamma = gamma;
    s.bucket = mixup_bucket(gamma, n_buckets);
    s.y_i = y_i;
    s.y_j = y_j;
    return s;
}

} // namespace autolabel

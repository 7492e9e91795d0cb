#include "autolabel/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "autolabel/augment.hpp"
#include "autolabel/error.hpp"

namespace autolabel {

namespace {

constexpr std::array<std::string_view, 3> kFormatNames = {"idx", "cifar_binary", "synthetic"};
constexpr std::array<std::string_view, 6> kCorruptionNames = {"gaussian_noise", "impulse_noise", "gaussian_blur",
                                                              "brightness",     "contrast",      "pixelate"};
constexpr std::array<std::string_view, 10> kOpIdentifiers = {"color",    "rotation", "autocontrast", "equalize",
                                                             "posterize", "solarize", "shearX",       "shearY",
                                                             "translateX", "translateY"};

consteval bool corruptions_disjoint_from_ops() {
    for (auto c : kCorruptionNames)
        for (auto o : kOpIdentifiers)
            if (c == o) return false;
    return true;
}
static_assert(corruptions_disjoint_from_ops(), "corruption kinds must not overlap augmentation ops");

constexpr double kCorruptionTable[6][kSeverities] = {
    {0.04, 0.06, 0.08, 0.09, 0.10}, // gaussian noise sigma
    {0.01, 0.02, 0.03, 0.05, 0.07}, // impulse fraction
    {0.4, 0.6, 0.8, 1.0, 1.2},      // blur sigma, pixels
    {0.05, 0.10, 0.15, 0.20, 0.25}, // brightness offset
    {0.75, 0.6, 0.5, 0.4, 0.3},     // contrast factor
    {0.9, 0.8, 0.7, 0.6, 0.5},      // pixelate scale
};

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint8_t quantize(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Returns the dims of an IDX u8 tensor after checking magic and size.
std::vector<std::size_t> idx_header(std::span<const std::uint8_t> b, std::uint32_t rank, const char* what) {
    const std::size_t header = 4 + 4 * std::size_t{rank};
    if (b.size() < 4) throw FormatError(std::string(what) + ": truncated magic", b.size());
    const std::uint32_t magic = read_be32(b, 0);
    if (magic != (0x0800U | rank))
        throw FormatError(std::string(what) + ": bad magic " + std::to_string(magic), 0);
    if (b.size() < header) throw FormatError(std::string(what) + ": truncated header", b.size());
    std::vector<std::size_t> dims;
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        dims.push_back(read_be32(b, 4 + 4 * i));
        if (dims.back() == 0) throw FormatError(std::string(what) + ": zero dimension", 4 + 4 * i);
        total *= dims.back();
    }
    if (b.size() < header + total) throw FormatError(std::string(what) + ": truncated payload", b.size());
    if (b.size() > header + total) throw FormatError(std::string(what) + ": trailing bytes", header + total);
    return dims;
}

// Separable Gaussian blur with replicated borders.
Image blur(const Image& im, double sigma) {
    if (sigma <= 0.0) return im;
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;
    const std::size_t h = height(im), w = width(im);
    const auto hi = static_cast<std::ptrdiff_t>(h), wi = static_cast<std::ptrdiff_t>(w);
    Image out(im.shape());
    std::vector<double> tmp(h * w);
    for (std::size_t c = 0; c < channels(im); ++c) {
        const float* p = im.data() + c * h * w;
        for (std::ptrdiff_t y = 0; y < hi; ++y)
            for (std::ptrdiff_t x = 0; x < wi; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + i, 0, wi - 1);
                    acc += k[static_cast<std::size_t>(i + radius)] * p[y * wi + xx];
                }
                tmp[static_cast<std::size_t>(y * wi + x)] = acc;
            }
        for (std::ptrdiff_t y = 0; y < hi; ++y)
            for (std::ptrdiff_t x = 0; x < wi; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + i, 0, hi - 1);
                    acc += k[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy * wi + x)];
                }
                out[c * h * w + static_cast<std::size_t>(y * wi + x)] = clamp01(acc);
            }
    }
    return out;
}

// Box-average down to scale * side, nearest-neighbour back up.
Image pixelate(const Image& im, double scale) {
    const std::size_t h = height(im), w = width(im);
    const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scale * static_cast<double>(h))));
    const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scale * static_cast<double>(w))));
    if (sh >= h && sw >= w) return im;
    Image out(im.shape());
    std::vector<double> sum(sh * sw);
    std::vector<std::size_t> cnt(sh * sw);
    for (std::size_t c = 0; c < channels(im); ++c) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(cnt.begin(), cnt.end(), 0);
        const float* p = im.data() + c * h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t cell = (y * sh / h) * sw + x * sw / w;
                sum[cell] += p[y * w + x];
                ++cnt[cell];
            }
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t cell = (y * sh / h) * sw + x * sw / w;
                out[c * h * w + y * w + x] = clamp01(sum[cell] / static_cast<double>(cnt[cell]));
            }
    }
    return out;
}

} // namespace

void Dataset::validate() const {
    if (images.size() != labels.size()) throw InvalidInput("dataset has mismatched image and label counts");
    if (classes < 2) throw InvalidInput("dataset needs at least 2 classes");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw InvalidInput("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                               " outside [0, K)");
        if (images[i].shape() != images.front().shape()) throw InvalidInput("dataset images differ in shape");
        for (const float v : images[i].values())
            if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInput("intensity outside [0, 1] in sample " + std::to_string(i));
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.classes = classes;
    out.name = name;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (const auto i : indices) {
        out.images.push_back(images.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

std::string_view to_string(DataFormat f) { return kFormatNames.at(static_cast<std::size_t>(f)); }

std::optional<DataFormat> parse_data_format(std::string_view name) {
    for (std::size_t i = 0; i < kFormatNames.size(); ++i)
        if (kFormatNames[i] == name) return static_cast<DataFormat>(i);
    return std::nullopt;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw InvalidConfig("synthetic data needs at least 2 classes");
    if (spec.count == 0) throw InvalidConfig("synthetic sample count must be positive");
    if (spec.size < 2 || spec.channels == 0) throw InvalidConfig("synthetic image size must be at least 2x2");
    if (spec.orientations == 0) throw InvalidConfig("synthetic orientation count must be positive");
    if (!(spec.amplitude_min >= 0.0 && spec.amplitude_max >= spec.amplitude_min && spec.amplitude_max <= 0.5))
        throw InvalidConfig("synthetic amplitudes must satisfy 0 <= min <= max <= 0.5");
    if (!(spec.noise >= 0.0) || !(spec.base_frequency > 0.0) || !(spec.frequency_ratio > 0.0))
        throw InvalidConfig("invalid synthetic noise or frequency");

    Dataset d;
    d.classes = spec.classes;
    d.name = "synthetic";
    d.images.resize(spec.count);
    d.labels.resize(spec.count);
    const std::size_t s = spec.size;
    const double centre = (static_cast<double>(s) - 1.0) / 2.0;
    for (std::size_t i = 0; i < spec.count; ++i) {
        Rng rng = Rng::derive(spec.seed, Stream::synthetic, {i});
        const std::size_t cls = i % spec.classes;
        const double theta_deg = static_cast<double>(cls % spec.orientations) * 180.0 /
                                     static_cast<double>(spec.orientations) +
                                 rng.normal(0.0, spec.orientation_jitter);
        const double band = static_cast<double>(cls / spec.orientations);
        const double freq = spec.base_frequency * std::pow(spec.frequency_ratio, band) *
                            (1.0 + rng.uniform(-spec.frequency_jitter, spec.frequency_jitter));
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = rng.uniform(spec.amplitude_min, spec.amplitude_max);
        const double th = theta_deg * std::numbers::pi / 180.0;
        const double ct = std::cos(th), st = std::sin(th);
        Image im({spec.channels, s, s});
        std::vector<double> tint(spec.channels, 1.0);
        for (std::size_t c = 1; c < spec.channels; ++c) tint[c] = rng.uniform(0.7, 1.0);
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x) {
                const double u = (static_cast<double>(x) - centre) / static_cast<double>(s);
                const double v = (static_cast<double>(y) - centre) / static_cast<double>(s);
                const double wave = std::cos(2.0 * std::numbers::pi * freq * (u * ct + v * st) + phase);
                for (std::size_t c = 0; c < spec.channels; ++c)
                    im[(c * s + y) * s + x] = clamp01(0.5 + amp * tint[c] * wave + rng.normal(0.0, spec.noise));
            }
        d.images[i] = std::move(im);
        d.labels[i] = static_cast<int>(cls);
    }
    return d;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, std::size_t classes) {
    const auto idims = idx_header(images, 3, "idx images");
    const auto ldims = idx_header(labels, 1, "idx labels");
    if (idims[0] != ldims[0])
        throw FormatError("idx labels: count " + std::to_string(ldims[0]) + " differs from image count " +
                              std::to_string(idims[0]),
                          4);
    Dataset d;
    d.classes = classes;
    d.name = "idx";
    const std::size_t n = idims[0], h = idims[1], w = idims[2];
    const std::size_t header = 16;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t lab = labels[8 + i];
        if (lab >= classes) throw FormatError("idx labels: label " + std::to_string(lab) + " >= K", 8 + i);
        Image im({1, h, w});
        for (std::size_t p = 0; p < h * w; ++p) im[p] = static_cast<float>(images[header + i * h * w + p]) / 255.0f;
        d.images.push_back(std::move(im));
        d.labels.push_back(lab);
    }
    return d;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes) {
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    return parse_idx(ib, lb, classes);
}

Dataset parse_cifar(std::span<const std::uint8_t> bytes, std::size_t classes) {
    if (bytes.empty()) throw FormatError("cifar: empty file", 0);
    if (bytes.size() % kCifarRecord != 0)
        throw FormatError("cifar: truncated record", bytes.size() - bytes.size() % kCifarRecord);
    Dataset d;
    d.classes = classes;
    d.name = "cifar";
    const std::size_t n = bytes.size() / kCifarRecord;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = i * kCifarRecord;
        if (bytes[off] >= classes) throw FormatError("cifar: label " + std::to_string(bytes[off]) + " >= K", off);
        Image im({3, 32, 32});
        for (std::size_t p = 0; p < kCifarRecord - 1; ++p) im[p] = static_cast<float>(bytes[off + 1 + p]) / 255.0f;
        d.images.push_back(std::move(im));
        d.labels.push_back(bytes[off]);
    }
    return d;
}

Dataset load_cifar(const std::filesystem::path& path, std::size_t classes) {
    return parse_cifar(read_file(path), classes);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& d) {
    if (d.empty()) throw InvalidInput("cannot encode an empty dataset");
    const auto& first = d.images.front();
    if (first.rank() != 3 || channels(first) != 1) throw InvalidInput("idx encoding needs 1 x H x W images");
    std::vector<std::uint8_t> out;
    put_be32(out, 0x803);
    put_be32(out, static_cast<std::uint32_t>(d.size()));
    put_be32(out, static_cast<std::uint32_t>(height(first)));
    put_be32(out, static_cast<std::uint32_t>(width(first)));
    for (const auto& im : d.images)
        for (const float v : im.values()) out.push_back(quantize(v));
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& d) {
    std::vector<std::uint8_t> out;
    put_be32(out, 0x801);
    put_be32(out, static_cast<std::uint32_t>(d.size()));
    for (const int l : d.labels) out.push_back(static_cast<std::uint8_t>(l));
    return out;
}

std::vector<std::uint8_t> encode_cifar(const Dataset& d) {
    std::vector<std::uint8_t> out;
    out.reserve(d.size() * kCifarRecord);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.images[i].shape() != Shape{3, 32, 32}) throw InvalidInput("cifar encoding needs 3 x 32 x 32 images");
        out.push_back(static_cast<std::uint8_t>(d.labels[i]));
        for (const float v : d.images[i].values()) out.push_back(quantize(v));
    }
    return out;
}

Dataset load_dataset(const DatasetSpec& spec) {
    Dataset d;
    switch (spec.format) {
    case DataFormat::idx: d = load_idx(spec.path, spec.labels_path, spec.classes); break;
    case DataFormat::cifar_binary: d = load_cifar(spec.path, spec.classes); break;
    case DataFormat::synthetic: d = make_synthetic(spec.synthetic); break;
    }
    d.validate();
    return d;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& d, std::size_t val_size, std::uint64_t seed) {
    if (val_size == 0 || val_size >= d.size())
        throw InvalidConfig("val_size " + std::to_string(val_size) + " must lie in (0, " + std::to_string(d.size()) +
                            ")");
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng::derive(seed, Stream::split);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    const std::span<const std::size_t> all(perm);
    return {d.subset(all.subspan(val_size)), d.subset(all.first(val_size))};
}

std::string_view to_string(CorruptionKind k) { return kCorruptionNames.at(static_cast<std::size_t>(k)); }

double corruption_parameter(CorruptionKind kind, int severity) {
    if (severity < 1 || severity > kSeverities) throw InvalidConfig("corruption severity must be in 1..5");
    return kCorruptionTable[static_cast<std::size_t>(kind)][severity - 1];
}

Image apply_corruption(const Image& im, CorruptionKind kind, double parameter, Rng& rng) {
    if (im.rank() != 3 || im.empty()) throw InvalidInput("expected a C x H x W image");
    switch (kind) {
    case CorruptionKind::gaussian_noise: {
        Image out(im.shape());
        for (std::size_t i = 0; i < im.size(); ++i) out[i] = clamp01(im[i] + rng.normal(0.0, parameter));
        return out;
    }
    case CorruptionKind::impulse_noise: {
        Image out = im;
        for (std::size_t i = 0; i < im.size(); ++i)
            if (rng.bernoulli(parameter)) out[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
        return out;
    }
    case CorruptionKind::gaussian_blur: return blur(im, parameter);
    case CorruptionKind::brightness: {
        Image out(im.shape());
        for (std::size_t i = 0; i < im.size(); ++i) out[i] = clamp01(static_cast<double>(im[i]) + parameter);
        return out;
    }
    case CorruptionKind::contrast: {
        if (parameter == 1.0) return im;
        const std::size_t plane = height(im) * width(im);
        Image out(im.shape());
        for (std::size_t c = 0; c < channels(im); ++c) {
            const float* p = im.data() + c * plane;
            const double mean = std::accumulate(p, p + plane, 0.0) / static_cast<double>(plane);
            for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = clamp01(mean + parameter * (p[i] - mean));
        }
        return out;
    }
    case CorruptionKind::pixelate: return pixelate(im, parameter);
    }
    throw InvalidConfig("unknown corruption kind");
}

Image corrupt(const Image& im, const CorruptionSpec& spec, Rng& rng) {
    return apply_corruption(im, spec.kind, corruption_parameter(spec.kind, spec.severity), rng);
}

Dataset corrupt_dataset(const Dataset& d, const CorruptionSpec& spec, std::uint64_t seed) {
    corruption_parameter(spec.kind, spec.severity);
    Dataset out;
    out.classes = d.classes;
    out.labels = d.labels;
    out.name = d.name + ":" + std::string(to_string(spec.kind)) + ":" + std::to_string(spec.severity);
    out.images.resize(d.size());
    const auto n = static_cast<std::ptrdiff_t>(d.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, Stream::corruption,
                              {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(spec.severity),
                               static_cast<std::uint64_t>(i)});
        out.images[static_cast<std::size_t>(i)] = corrupt(d.images[static_cast<std::size_t>(i)], spec, rng);
    }
    return out;
}

double sample_bucket_distance(const BucketKey& bucket, Rng& rng, const ValidationConfig& config) {
    const double n_b = config.n_buckets;
    const double n = bucket.n();
    if (n < 1 || n > n_b) throw InvalidBucket("bucket index outside 1..N: " + to_string(bucket));
    switch (bucket.family) {
    case Family::augmix: return rng.uniform_left_open((n - 1.0) / n_b, n / n_b);
    case Family::adversarial: return rng.uniform_left_open((n - 1.0) * config.eps_max / n_b, n * config.eps_max / n_b);
    case Family::mixup: return rng.uniform_left_open((n - 1.0) / (2.0 * n_b), n / (2.0 * n_b));
    case Family::randaug: break;
    }
    throw InvalidConfig("randaug buckets have no continuous distance");
}

Dataset build_augmented_validation(const Dataset& val, const BucketKey& bucket, Rng& rng,
                                   const ValidationConfig& config, const Model* model) {
    if (val.empty()) throw InvalidInput("empty validation set");
    if (config.n_buckets < 1) throw InvalidConfig("bucket count must be at least 1");
    if (bucket.family == Family::adversarial && model == nullptr)
        throw InvalidConfig("adversarial validation sets need a model");
    if (bucket.family == Family::randaug && bucket.coords[1] < 0) throw InvalidBucket("negative RandAug magnitude");
    if (bucket.family != Family::randaug && (bucket.n() < 1 || bucket.n() > config.n_buckets))
        throw InvalidBucket("bucket index outside 1..N: " + to_string(bucket));
    if (bucket.family == Family::augmix && bucket.coords[0] < 1) throw InvalidBucket("augmix depth must be >= 1");
    if (config.ops.empty() || config.augmix_magnitude < 0) throw InvalidConfig("invalid augmentation op settings");

    // Subsample without replacement.
    std::vector<std::size_t> idx(val.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (config.subsample > 0 && config.subsample < val.size()) {
        for (std::size_t i = 0; i < config.subsample; ++i)
            std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i),
                                                                             static_cast<int>(idx.size()) - 1))]);
        idx.resize(config.subsample);
    }
    Dataset q = val.subset(idx);
    q.name = val.name + ":" + to_string(bucket);
    const std::uint64_t base = rng();
    const auto n = static_cast<std::ptrdiff_t>(q.size());

    if (bucket.family == Family::adversarial) {
        std::vector<double> eps(q.size());
        std::vector<Rng> rngs;
        rngs.reserve(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            rngs.push_back(Rng::derive(base, {i}));
            eps[i] = sample_bucket_distance(bucket, rngs.back(), config);
        }
        constexpr std::size_t kChunk = 256;
        for (std::size_t s = 0; s < q.size(); s += kChunk) {
            const std::size_t len = std::min(kChunk, q.size() - s);
            auto res = pgd_attack_batch(*model, std::span<const Image>(q.images).subspan(s, len),
                                        std::span<const int>(q.labels).subspan(s, len),
                                        std::span<const double>(eps).subspan(s, len), config.attack,
                                        std::span<Rng>(rngs).subspan(s, len));
            std::move(res.images.begin(), res.images.end(), q.images.begin() + static_cast<std::ptrdiff_t>(s));
        }
        return q;
    }

    // Partners for mixup come from the full validation set.
    std::vector<std::size_t> partner(q.size());
    if (bucket.family == Family::mixup)
        for (auto& p : partner) p = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(val.size()) - 1));

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        Rng r = Rng::derive(base, {u});
        const Image& x = q.images[u];
        switch (bucket.family) {
        case Family::randaug: {
            RandAugParams p{bucket.op(), bucket.coords[1], r.sign()};
            q.images[u] = apply_randaug_op(x, p);
            break;
        }
        case Family::augmix: {
            const double lambda = sample_bucket_distance(bucket, r, config);
            q.images[u] =
                augmix_with(x, r, bucket.coords[0], lambda, config.augmix_magnitude, config.n_buckets, config.ops)
                    .image;
            break;
        }
        case Family::mixup: {
            // gamma' <= 0.5 weights the partner, so the validation image dominates.
            const double gamma = sample_bucket_distance(bucket, r, config);
            q.images[u] = convex_mix(val.images[partner[u]], x, gamma);
            break;
        }
        case Family::adversarial: break;
        }
    }
    return q;
}

} // namespace autolabel

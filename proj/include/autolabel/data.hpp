#pragma once

// Datasets, loaders, the local corruption suite and the per-bucket augmented
// validation sets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autolabel/attacks.hpp"
#include "autolabel/bucket.hpp"
#include "autolabel/nn.hpp"
#include "autolabel/rng.hpp"

namespace autolabel {

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::size_t classes = 0;
    std::string name;

    std::size_t size() const noexcept { return images.size(); }
    bool empty() const noexcept { return images.empty(); }
    /// Throws InvalidInput unless lengths match, labels lie in [0, K),
    /// intensities lie in [0, 1] and all images share one shape.
    void validate() const;
    Dataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class DataFormat { idx, cifar_binary, synthetic };

std::string_view to_string(DataFormat f);
std::optional<DataFormat> parse_data_format(std::string_view name);

/// Oriented sinusoidal gratings plus pixel noise. Class c uses orientation
/// (c mod orientations) * 180 / orientations degrees and the
/// (c / orientations)-th spatial frequency.
struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t count = 1000;
    std::uint64_t seed = 7;
    std::size_t size = 16;        // square side in pixels
    std::size_t channels = 1;
    std::size_t orientations = 5;
    double base_frequency = 1.5;  // cycles per image of the first frequency band
    double frequency_ratio = 2.0; // ratio between consecutive bands
    double orientation_jitter = 6.0; // degrees, standard deviation
    double frequency_jitter = 0.1;   // relative, uniform half-width
    double amplitude_min = 0.2;
    double amplitude_max = 0.45;
    double noise = 0.08;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

Dataset make_synthetic(const SyntheticSpec& spec);

// IDX: big-endian u32 magic (0x803 images, 0x801 labels), u32 dims, u8 payload.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::size_t classes = 10);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes = 10);

// CIFAR binary: records of 1 label byte + 3072 bytes (R, G, B planes, 32x32 row-major).
inline constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;
Dataset parse_cifar(std::span<const std::uint8_t> bytes, std::size_t classes = 10);
Dataset load_cifar(const std::filesystem::path& path, std::size_t classes = 10);

std::vector<std::uint8_t> encode_idx_images(const Dataset& d);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& d);
std::vector<std::uint8_t> encode_cifar(const Dataset& d);

struct DatasetSpec {
    DataFormat format = DataFormat::synthetic;
    std::filesystem::path path;        // idx images or cifar binary
    std::filesystem::path labels_path; // idx labels
    std::size_t classes = 10;
    SyntheticSpec synthetic{.count = 12000};

    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

Dataset load_dataset(const DatasetSpec& spec);

/// Uniform random disjoint split. Throws InvalidConfig unless 0 < val_size < n.
std::pair<Dataset, Dataset> split_train_val(const Dataset& d, std::size_t val_size, std::uint64_t seed);

enum class CorruptionKind { gaussian_noise, impulse_noise, gaussian_blur, brightness, contrast, pixelate };

inline constexpr std::array<CorruptionKind, 6> kAllCorruptions = {
    CorruptionKind::gaussian_noise, CorruptionKind::impulse_noise, CorruptionKind::gaussian_blur,
    CorruptionKind::brightness,     CorruptionKind::contrast,      CorruptionKind::pixelate,
};
inline constexpr int kSeverities = 5;

std::string_view to_string(CorruptionKind k);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 1; // 1..5
};

/// Table parameter for a severity in 1..5.
double corruption_parameter(CorruptionKind kind, int severity);

/// Applies a corruption with an explicit parameter (noise sigma, impulse
/// fraction, blur sigma, brightness offset, contrast factor, pixelate scale).
/// Blur sigma 0, offset 0, contrast 1 and scale 1 are identities.
Image apply_corruption(const Image& im, CorruptionKind kind, double parameter, Rng& rng);

Image corrupt(const Image& im, const CorruptionSpec& spec, Rng& rng);

/// Corrupts every image with its own substream of (seed, kind, severity, index).
Dataset corrupt_dataset(const Dataset& d, const CorruptionSpec& spec, std::uint64_t seed);

struct ValidationConfig {
    int n_buckets = 10;
    int augmix_magnitude = 3;
    double eps_max = 0.01;
    AttackConfig attack = training_attack(0.01);
    std::size_t subsample = 512; // 0 keeps the full set
    std::span<const OpType> ops = kAllOps;
};

/// Distance sampled uniformly inside a bucket: lambda' for augmix, eps' for
/// adversarial, gamma' for mixup. Each range is left-open, e.g. lambda' in
/// ((n-1)/N, n/N].
double sample_bucket_distance(const BucketKey& bucket, Rng& rng, const ValidationConfig& config);

/// Q(S_n): each (subsampled) validation image augmented once at a distance
/// drawn inside `bucket`. A mixup sample is the dominant image of its pair and
/// keeps its own label. Labels are always preserved.
/// `model` is required for the adversarial family.
Dataset build_augmented_validation(const Dataset& val, const BucketKey& bucket, Rng& rng,
                                   const ValidationConfig& config, const Model* model = nullptr);

} // namespace autolabel

#pragma once

// Run configuration. The file format is flat UTF-8 "key = value" lines with
// dotted section prefixes; '#' starts a comment. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autolabel/attacks.hpp"
#include "autolabel/augment.hpp"
#include "autolabel/autolabel.hpp"
#include "autolabel/bucket.hpp"
#include "autolabel/data.hpp"
#include "autolabel/nn.hpp"

namespace autolabel {

enum class Method { vanilla, randaug, augmix, mixup, adv_training };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view name);

enum class Architecture { mlp, convnet };

struct TrainConfig {
    DatasetSpec data;
    std::size_t val_size = 1000;
    std::size_t test_size = 2000;

    Method method = Method::vanilla;
    LabelMode labels = LabelMode::one_hot;
    double alpha = 0.01;
    int n_buckets = 10;
    double rho = 0.1; // label smoothing mass, or the CCAT power

    int m_max = 10;
    std::vector<OpType> ops{kAllOps.begin(), kAllOps.end()};
    int d_max = 3;
    int augmix_magnitude = 3;
    double mixup_beta = 1.0;
    AttackConfig attack = training_attack(0.01);

    Architecture arch = Architecture::convnet;
    std::vector<std::size_t> hidden{256, 256}; // mlp widths
    std::size_t conv1 = 16;
    std::size_t conv2 = 32;
    std::size_t conv_dense = 160;

    int epochs = 15;
    std::size_t batch_size = 128;
    SgdParams sgd;
    bool lr_decay = true; // x0.1 at 50% and 75% of the epochs
    double include_clean_fraction = 0.0;

    int ece_bins = kDefaultEceBins;
    std::size_t val_subsample = 512;

    bool eval_corruptions = true;
    std::size_t corruption_subsample = 0; // 0 uses the full test set
    bool eval_adversarial = false;
    double eval_eps = 0.03;
    int eval_iterations = 50;
    int eval_restarts = 3;
    std::size_t adversarial_subsample = 500;
    double baseline_clean = -1.0; // percent; negative disables the accuracy difference
    double baseline_adv = -1.0;

    std::uint64_t seed = 1;
    std::filesystem::path output_dir;

    /// Throws InvalidConfig on out-of-range values or conflicting settings.
    void validate() const;

    /// Augmentation family, empty for vanilla training.
    std::optional<Family> family() const;
    std::vector<BucketKey> buckets() const;
    std::vector<LayerSpec> architecture() const;
    AttackConfig evaluation_attack_config() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Parses config text; `origin` names the source in error messages.
TrainConfig parse_config(std::string_view text, std::string_view origin = "config");

/// Canonical text: every key in fixed order, doubles in shortest round-trip form.
std::string serialize_config(const TrainConfig& config);

/// Applies a single "key = value" assignment.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

/// Reads a file, applies the AUTOLABEL_SEED override and validates.
TrainConfig load_config(const std::filesystem::path& path);

/// AUTOLABEL_SEED, when set, replaces config.seed. Throws InvalidConfig on a bad value.
void apply_env_overrides(TrainConfig& config);

} // namespace autolabel

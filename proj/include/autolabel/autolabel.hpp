#pragma once

// Per-bucket true-class confidence, its calibration-driven epoch update, and
// the soft labels derived from it. Static baselines (one-hot, label smoothing,
// CCAT power transition) share the SoftLabel interface.

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "autolabel/bucket.hpp"
#include "autolabel/calibration.hpp"
#include "autolabel/nn.hpp"

namespace autolabel {

/// -1, 0 or +1.
constexpr int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

/// One step of the label update for a single bucket:
///   y - alpha * ece * sign(conf - acc), clipped to [max(acc, 1/K), 1].
double updated_confidence(double y, double alpha, double ece, double conf, double acc, std::size_t classes);

class LabelTable {
public:
    LabelTable() = default;

    /// All entries start at 1.0 (one-hot). Throws InvalidConfig on K < 2, an
    /// empty or duplicated bucket list, or a negative alpha.
    LabelTable(std::size_t classes, std::span<const BucketKey> buckets, double alpha);

    std::size_t classes() const noexcept { return classes_; }
    double alpha() const noexcept { return alpha_; }
    int epoch() const noexcept { return epoch_; }
    void advance_epoch() noexcept { ++epoch_; }

    bool contains(const BucketKey& b) const { return entries_.contains(b); }
    /// Throws InvalidBucket for an unknown bucket.
    double at(const BucketKey& b) const;
    const std::map<BucketKey, double>& entries() const noexcept { return entries_; }

    /// Applies the update rule to one bucket and returns the new value.
    double update(const BucketKey& b, double ece, double conf, double acc);

    friend bool operator==(const LabelTable&, const LabelTable&) = default;

private:
    std::size_t classes_ = 0;
    double alpha_ = 0.0;
    int epoch_ = 0;
    std::map<BucketKey, double> entries_;
};

LabelTable init_label_table(std::size_t classes, std::span<const BucketKey> buckets, double alpha);

/// Update driven by the calibration report of the bucket's augmented validation set.
double update_bucket(LabelTable& table, const BucketKey& bucket, const CalibrationReport& val_report);

/// y on true_class, (1 - y) / (K - 1) elsewhere.
SoftLabel confidence_to_label(double y, int true_class, std::size_t classes);

SoftLabel soft_label(const LabelTable& table, const BucketKey& bucket, int true_class);

/// Two-class label for a mixed pair with y_j dominant (gamma' <= 0.5):
/// y_j gets the table entry y, y_i gets min(1 - y, gamma'/(1 - gamma') * y), and
/// the rest is spread over the other K - 2 classes. y_i == y_j falls back to
/// soft_label on y_j.
SoftLabel mixup_soft_label(const LabelTable& table, const BucketKey& bucket, int y_i, int y_j, double gamma_prime);

enum class LabelMode { one_hot, label_smoothing, ccat, autolabel };

std::string_view to_string(LabelMode m);
std::optional<LabelMode> parse_label_mode(std::string_view name);

struct BaselineConfig {
    LabelMode mode = LabelMode::one_hot;
    double rho = 10.0; // smoothing mass for label_smoothing, power for ccat
};

/// Static label for the non-adaptive modes. delta_inf and eps are used by ccat only.
/// Throws InvalidConfig for autolabel mode, rho < 0, or ccat with eps <= 0.
SoftLabel baseline_label(const BaselineConfig& config, int true_class, std::size_t classes, double delta_inf = 0.0,
                         double eps = 1.0);

/// Writes one trajectory row per entry: epoch,family,coord0,coord1,y_true_conf.
void write_labels_csv_header(std::ostream& out);
void append_labels_csv(std::ostream& out, const LabelTable& table);

} // namespace autolabel

#include "autolabel/autolabel.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "autolabel/error.hpp"

namespace autolabel {

namespace {

void check_class(int cls, std::size_t classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
        throw InvalidInput("class " + std::to_string(cls) + " outside [0, " + std::to_string(classes) + ")");
}

constexpr std::array<std::string_view, 4> kModeNames = {"one_hot", "label_smoothing", "ccat", "autolabel"};

} // namespace

double updated_confidence(double y, double alpha, double ece, double conf, double acc, std::size_t classes) {
    const double raw = y - alpha * ece * sign_of(conf - acc);
    const double floor = std::max(acc, 1.0 / static_cast<double>(classes));
    return std::clamp(raw, floor, 1.0);
}

LabelTable::LabelTable(std::size_t classes, std::span<const BucketKey> buckets, double alpha)
    : classes_(classes), alpha_(alpha) {
    if (classes < 2) throw InvalidConfig("label table needs at least 2 classes");
    if (buckets.empty()) throw InvalidConfig("label table needs at least one bucket");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidConfig("alpha must be finite and non-negative");
    for (const auto& b : buckets)
        if (!entries_.emplace(b, 1.0).second) throw InvalidConfig("duplicate bucket " + to_string(b));
}

double LabelTable::at(const BucketKey& b) const {
    const auto it = entries_.find(b);
    if (it == entries_.end()) throw InvalidBucket("unknown bucket " + to_string(b));
    return it->second;
}

double LabelTable::update(const BucketKey& b, double ece, double conf, double acc) {
    const auto it = entries_.find(b);
    if (it == entries_.end()) throw InvalidBucket("unknown bucket " + to_string(b));
    if (!std::isfinite(ece) || !std::isfinite(conf) || !std::isfinite(acc))
        throw NumericalError("non-finite calibration statistics for bucket " + to_string(b));
    it->second = updated_confidence(it->second, alpha_, ece, conf, acc, classes_);
    return it->second;
}

LabelTable init_label_table(std::size_t classes, std::span<const BucketKey> buckets, double alpha) {
    return LabelTable(classes, buckets, alpha);
}

double update_bucket(LabelTable& table, const BucketKey& bucket, const CalibrationReport& val_report) {
    return table.update(bucket, val_report.ece, val_report.mean_confidence, val_report.accuracy);
}

SoftLabel confidence_to_label(double y, int true_class, std::size_t classes) {
    if (classes < 2) throw InvalidConfig("soft labels need at least 2 classes");
    check_class(true_class, classes);
    if (!(y >= 0.0 && y <= 1.0)) throw InvalidLabel("true-class confidence outside [0, 1]");
    SoftLabel out(classes, (1.0 - y) / static_cast<double>(classes - 1));
    out[static_cast<std::size_t>(true_class)] = y;
    return out;
}

SoftLabel soft_label(const LabelTable& table, const BucketKey& bucket, int true_class) {
    return confidence_to_label(table.at(bucket), true_class, table.classes());
}

SoftLabel mixup_soft_label(const LabelTable& table, const BucketKey& bucket, int y_i, int y_j, double gamma_prime) {
    const std::size_t k = table.classes();
    check_class(y_i, k);
    check_class(y_j, k);
    if (!(gamma_prime >= 0.0 && gamma_prime <= 0.5)) throw InvalidConfig("mixup gamma' outside [0, 0.5]");
    if (y_i == y_j) return soft_label(table, bucket, y_j);
    const double y = table.at(bucket);
    // With two classes the pair must carry all the mass.
    const double y_other =
        k == 2 ? 1.0 - y : std::min(1.0 - y, gamma_prime / (1.0 - gamma_prime) * y);
    const double rest = 1.0 - y - y_other;
    if (rest < -1e-12) throw NumericalError("negative mixup remainder");
    SoftLabel out(k, k > 2 ? std::max(0.0, rest) / static_cast<double>(k - 2) : 0.0);
    out[static_cast<std::size_t>(y_j)] = y;
    out[static_cast<std::size_t>(y_i)] = y_other;
    return out;
}

std::string_view to_string(LabelMode m) { return kModeNames.at(static_cast<std::size_t>(m)); }

std::optional<LabelMode> parse_label_mode(std::string_view name) {
    if (name == "ls") return LabelMode::label_smoothing;
    for (std::size_t i = 0; i < kModeNames.size(); ++i)
        if (kModeNames[i] == name) return static_cast<LabelMode>(i);
    return std::nullopt;
}

SoftLabel baseline_label(const BaselineConfig& config, int true_class, std::size_t classes, double delta_inf,
                         double eps) {
    if (classes < 2) throw InvalidConfig("labels need at least 2 classes");
    check_class(true_class, classes);
    if (!(config.rho >= 0.0)) throw InvalidConfig("rho must be non-negative");
    const double k = static_cast<double>(classes);
    switch (config.mode) {
    case LabelMode::one_hot: return confidence_to_label(1.0, true_class, classes);
    case LabelMode::label_smoothing:
        if (config.rho > 1.0) throw InvalidConfig("label smoothing rho must be at most 1");
        return confidence_to_label(1.0 - config.rho, true_class, classes);
    case LabelMode::ccat: {
        if (!(eps > 0.0)) throw InvalidConfig("ccat needs eps > 0");
        const double g = std::pow(1.0 - std::min(1.0, std::abs(delta_inf) / eps), config.rho);
        SoftLabel out(classes, (1.0 - g) / k);
        out[static_cast<std::size_t>(true_class)] = g + (1.0 - g) / k;
        return out;
    }
    case LabelMode::autolabel: throw InvalidConfig("autolabel labels come from a LabelTable");
    }
    throw InvalidConfig("unknown label mode");
}

void write_labels_csv_header(std::ostream& out) { out << "epoch,family,coord0,coord1,y_true_conf\n"; }

void append_labels_csv(std::ostream& out, const LabelTable& table) {
    const auto old = out.precision(17);
    for (const auto& [b, y] : table.entries()) {
        out << table.epoch() << ',' << to_string(b.family) << ',';
        if (b.family == Family::randaug)
            out << to_string(b.op());
        else
            out << b.coords[0];
        out << ',' << b.coords[1] << ',' << y << '\n';
    }
    out.precision(old);
}

} // namespace autolabel

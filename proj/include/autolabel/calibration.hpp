#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "autolabel/nn.hpp"

namespace autolabel {

inline constexpr int kDefaultEceBins = 15;

struct BinStats {
    std::size_t count = 0;
    double accuracy = 0.0;   // 0 for an empty bin
    double confidence = 0.0; // 0 for an empty bin

    friend bool operator==(const BinStats&, const BinStats&) = default;
};

struct CalibrationReport {
    double ece = 0.0;
    double accuracy = 0.0;
    double mean_confidence = 0.0;
    std::vector<BinStats> bins;
    int num_bins = kDefaultEceBins;
    std::size_t count = 0;

    friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

/// Bin r (1-based) covers ((r-1)/R, r/R]; confidence 0 goes to bin 1.
int confidence_bin(double confidence, int num_bins);

/// Equal-width expected calibration error with per-bin statistics.
/// Throws InvalidInput on an empty list or mismatched lengths.
CalibrationReport calibration_report(std::span<const double> confidences, std::span<const bool> correct,
                                     int num_bins = kDefaultEceBins);

CalibrationReport calibration_report(std::span<const Prediction> predictions, std::span<const int> labels,
                                     int num_bins = kDefaultEceBins);

struct CorruptedMetrics {
    double accuracy = 0.0; // cAccuracy
    double ece = 0.0;      // cECE

    friend bool operator==(const CorruptedMetrics&, const CorruptedMetrics&) = default;
};

/// Unweighted mean over (kind, severity) reports.
CorruptedMetrics corrupted_aggregate(std::span<const CalibrationReport> reports);

/// (method_clean + method_adv) - (base_clean + base_adv), in percentage points.
double accuracy_difference(double method_clean, double method_adv, double base_clean, double base_adv);

/// CSV with header r,count,acc,conf; r is 1-based.
void write_bins_csv(const CalibrationReport& report, const std::filesystem::path& path);

} // namespace autolabel

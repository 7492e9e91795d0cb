#pragma once

// End-to-end training: per-batch augmentation with bucket-keyed labels,
// epoch-boundary label updates from augmented validation sets, and the final
// clean, corrupted and adversarial evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autolabel/autolabel.hpp"
#include "autolabel/calibration.hpp"
#include "autolabel/config.hpp"
#include "autolabel/data.hpp"
#include "autolabel/nn.hpp"

namespace autolabel {

struct BucketEval {
    BucketKey bucket;
    std::size_t count = 0;
    double ece = 0.0;
    double accuracy = 0.0;
    double confidence = 0.0;
    double label_before = 1.0;
    double label_after = 1.0;
};

struct EpochRecord {
    int epoch = 0; // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    std::vector<BucketEval> buckets;      // autolabel mode only
    std::map<BucketKey, double> labels;   // table after this epoch's update
};

struct CorruptionCell {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 1;
    double accuracy = 0.0;
    double ece = 0.0;
};

struct RunReport {
    std::string config_text;
    std::size_t parameter_count = 0;
    std::vector<EpochRecord> epochs;
    CalibrationReport clean;
    std::optional<CorruptedMetrics> corrupted;
    std::vector<CorruptionCell> corruption_cells;
    std::optional<double> adversarial_accuracy;
    std::optional<double> accuracy_difference; // percentage points vs the configured baseline
    std::size_t attack_skips = 0;
    bool aborted = false;
    std::string abort_reason;
};

using Predictor = std::function<std::vector<Prediction>(const Model&, const Dataset&)>;

struct TrainingHooks {
    /// Replaces the model's predictions on augmented validation sets.
    Predictor validation_predictor;
    std::function<void(const EpochRecord&)> on_epoch;
    /// Skips final evaluation; the report then carries training records only.
    bool skip_evaluation = false;
};

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Loads the configured dataset and splits off test, then validation, with
/// the data seed (synthetic.seed), so every run seed sees the same splits.
Splits prepare_data(const TrainConfig& config);

struct RunResult {
    RunReport report;
    Model model;
    LabelTable table; // empty for vanilla runs
};

RunResult run_training(const TrainConfig& config, const TrainingHooks& hooks = {});
RunResult run_training(const TrainConfig& config, const Splits& data, const TrainingHooks& hooks = {});

/// Learning rate of a 0-based epoch with x0.1 steps at 50% and 75% of training.
double scheduled_lr(const TrainConfig& config, int epoch);

std::vector<Prediction> predict(const Model& model, const Dataset& dataset);

CalibrationReport evaluate(const Model& model, const Dataset& dataset, int num_bins = kDefaultEceBins);

/// Fraction of samples still classified correctly under the best-of-restarts
/// attack at attack.eps_max. eps_max = 0 returns clean accuracy.
double evaluate_adversarial(const Model& model, const Dataset& dataset, const AttackConfig& attack,
                            std::uint64_t seed, std::size_t* skipped = nullptr);

/// Every corruption kind at every severity; seeded so paired runs see the same suite.
std::vector<CorruptionCell> evaluate_corrupted(const Model& model, const Dataset& dataset, int num_bins,
                                               std::uint64_t seed);

std::string run_report_json(const RunReport& report);

/// run.json, metrics.csv, labels.csv, bins.csv and model.alnn.
void write_artifacts(const RunResult& result, const std::filesystem::path& dir);

struct SweepRow {
    int magnitude = 0;
    LabelMode mode = LabelMode::one_hot;
    std::uint64_t seed = 0;
    double clean_accuracy = 0.0;
    double clean_ece = 0.0;
    double corrupted_accuracy = 0.0;
    double corrupted_ece = 0.0;
};

/// Trains one RandAug run per (max magnitude, label mode, seed) on the
/// five-op subset and reports clean and corrupted metrics.
std::vector<SweepRow> run_motivation_sweep(const TrainConfig& base, std::span<const int> magnitudes,
                                           std::span<const std::uint64_t> seeds,
                                           std::span<const LabelMode> modes,
                                           const std::function<void(const SweepRow&)>& progress = {});

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

} // namespace autolabel

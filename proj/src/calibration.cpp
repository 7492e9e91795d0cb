#include "autolabel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "autolabel/error.hpp"

namespace autolabel {

int confidence_bin(double confidence, int num_bins) {
    if (num_bins < 1) throw InvalidConfig("bin count must be at least 1");
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw InvalidInput("confidence outside [0, 1]");
    const double r_d = static_cast<double>(num_bins);
    int r = static_cast<int>(std::ceil(confidence * r_d));
    // The product can round across an edge; settle it with the exact comparisons.
    while (r > 1 && confidence <= (r - 1) / r_d) --r;
    while (r < num_bins && confidence > r / r_d) ++r;
    return std::clamp(r, 1, num_bins);
}

CalibrationReport calibration_report(std::span<const double> confidences, std::span<const bool> correct,
                                     int num_bins) {
    if (num_bins < 1) throw InvalidConfig("bin count must be at least 1");
    if (confidences.empty()) throw InvalidInput("calibration report of an empty prediction set");
    if (confidences.size() != correct.size()) throw InvalidInput("confidence and label counts differ");

    const auto r_n = static_cast<std::size_t>(num_bins);
    std::vector<std::size_t> count(r_n, 0);
    std::vector<double> hits(r_n, 0.0);
    std::vector<double> conf(r_n, 0.0);
    double total_hits = 0.0;
    double total_conf = 0.0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const auto r = static_cast<std::size_t>(confidence_bin(confidences[i], num_bins) - 1);
        ++count[r];
        hits[r] += correct[i] ? 1.0 : 0.0;
        conf[r] += confidences[i];
        total_hits += correct[i] ? 1.0 : 0.0;
        total_conf += confidences[i];
    }

    CalibrationReport rep;
    rep.num_bins = num_bins;
    rep.count = confidences.size();
    const double m = static_cast<double>(rep.count);
    rep.accuracy = total_hits / m;
    rep.mean_confidence = total_conf / m;
    rep.bins.resize(r_n);
    for (std::size_t r = 0; r < r_n; ++r) {
        auto& b = rep.bins[r];
        b.count = count[r];
        if (count[r] == 0) continue;
        const double c = static_cast<double>(count[r]);
        b.accuracy = hits[r] / c;
        b.confidence = conf[r] / c;
        rep.ece += c / m * std::abs(b.accuracy - b.confidence);
    }
    return rep;
}

CalibrationReport calibration_report(std::span<const Prediction> predictions, std::span<const int> labels,
                                     int num_bins) {
    if (predictions.size() != labels.size()) throw InvalidInput("prediction and label counts differ");
    std::vector<double> conf(predictions.size());
    std::vector<char> hit(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        conf[i] = predictions[i].confidence;
        hit[i] = labels[i] >= 0 && predictions[i].predicted_class == static_cast<std::size_t>(labels[i]);
    }
    // std::vector<bool> has no contiguous storage, so convert via a bool array.
    std::unique_ptr<bool[]> correct(new bool[hit.size()]);
    for (std::size_t i = 0; i < hit.size(); ++i) correct[i] = hit[i] != 0;
    return calibration_report(conf, std::span<const bool>(correct.get(), hit.size()), num_bins);
}

CorruptedMetrics corrupted_aggregate(std::span<const CalibrationReport> reports) {
    if (reports.empty()) throw InvalidInput("corrupted aggregate of no reports");
    CorruptedMetrics out;
    for (const auto& r : reports) {
        out.accuracy += r.accuracy;
        out.ece += r.ece;
    }
    out.accuracy /= static_cast<double>(reports.size());
    out.ece /= static_cast<double>(reports.size());
    return out;
}

double accuracy_difference(double method_clean, double method_adv, double base_clean, double base_adv) {
    return (method_clean + method_adv) - (base_clean + base_adv);
}

void write_bins_csv(const CalibrationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out.precision(17);
    out << "r,count,acc,conf\n";
    for (std::size_t r = 0; r < report.bins.size(); ++r) {
        const auto& b = report.bins[r];
        out << r + 1 << ',' << b.count << ',' << b.accuracy << ',' << b.confidence << '\n';
    }
}

} // namespace autolabel

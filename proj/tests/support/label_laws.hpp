#pragma once

// Randomised checks of the label-update rule and the derived soft labels.
// Each call draws one tuple and returns an empty string or a failure message.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "autolabel/autolabel.hpp"

namespace label_laws {

using namespace autolabel;

struct Tuple {
    double y, alpha, ece, conf, acc;
    std::size_t classes;
};

inline Tuple draw(Rng& rng) {
    Tuple t{};
    t.classes = static_cast<std::size_t>(rng.uniform_int(2, 100));
    const double floor = 1.0 / static_cast<double>(t.classes);
    t.acc = rng.uniform();
    t.y = rng.uniform(std::max(floor, t.acc), 1.0);
    t.alpha = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 1.0);
    t.ece = rng.bernoulli(0.1) ? 0.0 : rng.uniform();
    const int shape = rng.uniform_int(0, 4);
    t.conf = shape == 0 ? t.acc : rng.uniform();
    return t;
}

inline std::string describe(const Tuple& t) {
    std::ostringstream os;
    os.precision(17);
    os << "y=" << t.y << " alpha=" << t.alpha << " ece=" << t.ece << " conf=" << t.conf << " acc=" << t.acc
       << " K=" << t.classes;
    return os.str();
}

inline std::string check(const Tuple& t) {
    const double out = updated_confidence(t.y, t.alpha, t.ece, t.conf, t.acc, t.classes);
    const double lo = std::max(t.acc, 1.0 / static_cast<double>(t.classes));
    const double raw = t.y - t.alpha * t.ece * sign_of(t.conf - t.acc);
    const std::string at = " at " + describe(t);

    if (!(out >= t.acc && out <= 1.0)) return "output outside [acc, 1]" + at;
    if (t.ece == 0.0 && out != t.y) return "ECE = 0 is not a fixed point" + at;
    if (raw >= lo && raw <= 1.0) {
        if (std::abs(std::abs(out - t.y) - t.alpha * t.ece * std::abs(sign_of(t.conf - t.acc))) > 1e-12)
            return "unclipped step is not alpha * ECE" + at;
        const int moved = sign_of(out - t.y);
        if (moved != 0 && moved != -sign_of(t.conf - t.acc)) return "step direction disagrees with -sign(conf - acc)" + at;
    } else if (out != std::clamp(raw, lo, 1.0)) {
        return "clipped value is not the nearest bound" + at;
    }

    const int cls = static_cast<int>(t.classes - 1);
    const auto label = confidence_to_label(out, cls, t.classes);
    const double sum = std::accumulate(label.begin(), label.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) return "soft label does not sum to 1" + at;
    if (label[static_cast<std::size_t>(cls)] != out) return "soft label misplaces the true-class mass" + at;
    for (double v : label)
        if (v < 0.0) return "negative soft-label entry" + at;
    return {};
}

} // namespace label_laws

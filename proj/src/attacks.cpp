#include "autolabel/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace autolabel {

namespace {

// Projects v onto [max(0, x0 - eps), min(1, x0 + eps)] and rounds to float
// without leaving the interval.
float project(double v, double x0, double eps) {
    const double lo = std::max(0.0, x0 - eps);
    const double hi = std::min(1.0, x0 + eps);
    float f = static_cast<float>(std::clamp(v, lo, hi));
    if (f > hi) f = std::nextafter(f, 0.0f);
    if (f < lo) f = std::nextafter(f, 1.0f);
    return f;
}

} // namespace

void AttackConfig::validate() const {
    if (!(eps_max > 0.0 && eps_max <= 1.0)) throw InvalidConfig("attack eps_max must be in (0, 1]");
    if (iterations < 1) throw InvalidConfig("attack iterations must be at least 1");
    if (restarts < 1) throw InvalidConfig("attack restarts must be at least 1");
    if (!(step_divisor > 0.0)) throw InvalidConfig("attack step divisor must be positive");
    if (n_buckets < 1) throw InvalidConfig("attack bucket count must be at least 1");
}

AttackConfig training_attack(double eps_max, int n_buckets) {
    return AttackConfig{eps_max, 10, 4.0, 1, n_buckets, false};
}

AttackConfig evaluation_attack(double eps) { return AttackConfig{eps, 50, 4.0, 3, 10, true}; }

double sample_eps(Rng& rng, double eps_max) {
    if (!(eps_max > 0.0)) throw InvalidConfig("eps_max must be positive");
    return rng.uniform_left_open(0.0, eps_max);
}

SoftLabel one_hot(int cls, std::size_t classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
        throw InvalidInput("class " + std::to_string(cls) + " outside [0, " + std::to_string(classes) + ")");
    SoftLabel t(classes, 0.0);
    t[static_cast<std::size_t>(cls)] = 1.0;
    return t;
}

double linf_distance(const Image& a, const Image& b) {
    if (a.shape() != b.shape()) throw InvalidInput("linf distance of differently shaped images");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(static_cast<double>(a[i]) - b[i]));
    return d;
}

AttackBatchResult pgd_attack_batch(const Model& model, std::span<const Image> images, std::span<const int> labels,
                                   std::span<const double> eps, const AttackConfig& config, std::span<Rng> rngs) {
    const std::size_t nb = images.size();
    if (labels.size() != nb || eps.size() != nb || rngs.size() != nb)
        throw InvalidInput("attack inputs have mismatched lengths");
    if (config.iterations < 1 || config.restarts < 1 || !(config.step_divisor > 0.0))
        throw InvalidConfig("invalid attack configuration");
    AttackBatchResult res;
    if (nb == 0) return res;
    for (const double e : eps)
        if (!(e > 0.0)) throw InvalidConfig("attack eps must be positive");

    std::vector<SoftLabel> targets;
    targets.reserve(nb);
    for (const int y : labels) targets.push_back(one_hot(y, model.num_classes()));

    const Tensor clean = stack<float>(images);
    const std::size_t per = clean.size() / nb;

    res.images.assign(images.begin(), images.end());
    res.losses.assign(nb, -std::numeric_limits<double>::infinity());
    res.skipped.assign(nb, false);
    res.clean_losses = sample_losses(model, clean, targets);

    auto consider = [&](const Tensor& xa, const std::vector<double>& losses) {
        for (std::size_t i = 0; i < nb; ++i) {
            if (res.skipped[i] || !(losses[i] > res.losses[i])) continue;
            res.losses[i] = losses[i];
            std::copy(xa.data() + i * per, xa.data() + (i + 1) * per, res.images[i].data());
        }
    };

    const int starts = config.restarts + (config.zero_start ? 1 : 0);
    for (int s = 0; s < starts; ++s) {
        Tensor xa = clean;
        if (!(config.zero_start && s == 0)) {
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t j = 0; j < per; ++j) {
                    const double x0 = clean[i * per + j];
                    const double v = x0 + rngs[i].uniform(-eps[i], eps[i]);
                    xa[i * per + j] = project(v, x0, eps[i]);
                }
        }
        for (int it = 0;; ++it) {
            if (it == config.iterations) {
                consider(xa, sample_losses(model, xa, targets));
                break;
            }
            std::vector<double> losses;
            const Tensor grad = input_gradients(model, xa, targets, losses);
            consider(xa, losses);
            for (std::size_t i = 0; i < nb; ++i) {
                if (res.skipped[i]) continue;
                const float* g = grad.data() + i * per;
                if (!std::all_of(g, g + per, [](float v) { return std::isfinite(v); }) || !std::isfinite(losses[i])) {
                    res.skipped[i] = true;
                    continue;
                }
                const double step = eps[i] / config.step_divisor;
                for (std::size_t j = 0; j < per; ++j) {
                    const double x0 = clean[i * per + j];
                    const double dir = g[j] > 0.0f ? 1.0 : (g[j] < 0.0f ? -1.0 : 0.0);
                    const double v = static_cast<double>(xa[i * per + j]) + step * dir;
                    xa[i * per + j] = project(v, x0, eps[i]);
                }
            }
        }
    }
    for (std::size_t i = 0; i < nb; ++i) {
        if (!res.skipped[i]) continue;
        res.images[i] = images[i];
        res.losses[i] = res.clean_losses[i];
        ++res.skipped_count;
    }
    return res;
}

Image pgd_attack(const Model& model, const Image& x, int y, double eps, int iterations, double step, int restarts,
                 Rng& rng, bool zero_start) {
    if (!(eps > 0.0)) throw InvalidConfig("attack eps must be positive");
    if (!(step > 0.0)) throw InvalidConfig("attack step must be positive");
    AttackConfig cfg{std::min(1.0, eps), iterations, eps / step, restarts, 1, zero_start};
    const Image xs[1] = {x};
    const int ys[1] = {y};
    const double es[1] = {eps};
    Rng rs[1] = {rng};
    auto res = pgd_attack_batch(model, xs, ys, es, cfg, rs);
    rng = rs[0];
    return std::move(res.images.front());
}

} // namespace autolabel

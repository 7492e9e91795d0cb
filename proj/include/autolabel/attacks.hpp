#pragma once

#include <span>
#include <vector>

#include "autolabel/bucket.hpp"
#include "autolabel/error.hpp"
#include "autolabel/nn.hpp"
#include "autolabel/rng.hpp"

namespace autolabel {

struct AttackConfig {
    double eps_max = 0.01;    // l-inf bound on the [0, 1] image scale
    int iterations = 10;
    double step_divisor = 4.0; // step = eps / step_divisor
    int restarts = 1;          // random-start restarts
    int n_buckets = 10;
    bool zero_start = false;   // add a restart seeded at delta = 0

    void validate() const;

    friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

/// Training attack: 10 iterations, step eps/4, one random restart.
AttackConfig training_attack(double eps_max, int n_buckets = 10);
/// Evaluation attack: eps 0.03, 50 iterations, 3 random restarts plus the delta = 0 start.
AttackConfig evaluation_attack(double eps = 0.03);

/// eps ~ U(0, eps_max].
double sample_eps(Rng& rng, double eps_max);

struct AttackBatchResult {
    std::vector<Image> images;
    std::vector<double> losses;      // loss of the returned image
    std::vector<double> clean_losses;
    std::vector<bool> skipped;       // non-finite gradient, image passed through
    std::size_t skipped_count = 0;
};

/// Batched l-inf PGD on one-hot cross-entropy. Sample i uses bound eps[i],
/// step eps[i] / step_divisor and its own stream rngs[i]. Each restart starts
/// at x + U(-eps, eps) (or at x for the zero start), takes sign-gradient ascent
/// steps projected onto the eps-ball and [0, 1], and the highest-loss iterate
/// over all restarts is returned.
AttackBatchResult pgd_attack_batch(const Model& model, std::span<const Image> images, std::span<const int> labels,
                                   std::span<const double> eps, const AttackConfig& config, std::span<Rng> rngs);

/// Single-sample PGD. Returns x unchanged when the gradient is non-finite.
Image pgd_attack(const Model& model, const Image& x, int y, double eps, int iterations, double step, int restarts,
                 Rng& rng, bool zero_start = true);

SoftLabel one_hot(int cls, std::size_t classes);

/// max |a - b| over all components.
double linf_distance(const Image& a, const Image& b);

} // namespace autolabel

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "autolabel/attacks.hpp"

using namespace autolabel;

namespace {

Model small_model(std::uint64_t seed, std::size_t classes = 4) {
    Rng rng(seed);
    return Model(Shape{1, 8, 8}, convnet_architecture(4, 4, 8, classes), rng);
}

std::vector<Image> random_images(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) {
        Image im(Shape{1, 8, 8});
        for (auto& v : im.values()) v = static_cast<float>(rng.uniform());
        out.push_back(std::move(im));
    }
    return out;
}

} // namespace

TEST_CASE("sampled eps lies in (0, eps_max]") {
    Rng rng(1);
    const int draws = 100000;
    double sum = 0;
    for (int i = 0; i < draws; ++i) {
        const double e = sample_eps(rng, 0.01);
        REQUIRE(e > 0.0);
        REQUIRE(e <= 0.01);
        sum += e;
    }
    // Uniform mean eps_max / 2 with sigma eps_max / sqrt(12 n).
    const double sigma = 0.01 / std::sqrt(12.0 * draws);
    CHECK(std::abs(sum / draws - 0.005) <= 4 * sigma);
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) CHECK(sample_eps(a, 0.1) == sample_eps(b, 0.1));
    CHECK_THROWS_AS(sample_eps(a, 0.0), InvalidConfig);
}

TEST_CASE("attack presets") {
    const auto t = training_attack(0.01);
    CHECK(t.iterations == 10);
    CHECK(t.step_divisor == 4.0);
    CHECK(t.restarts == 1);
    CHECK_FALSE(t.zero_start);
    const auto e = evaluation_attack();
    CHECK(e.eps_max == 0.03);
    CHECK(e.iterations == 50);
    CHECK(e.restarts == 3);
    CHECK(e.zero_start);
    AttackConfig bad = t;
    bad.iterations = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("PGD respects the ball and the unit range and never lowers the loss") {
    const Model model = small_model(2);
    const auto images = random_images(32, 3);
    std::vector<int> labels;
    std::vector<double> eps;
    std::vector<Rng> rngs;
    Rng draw(4);
    for (std::size_t i = 0; i < images.size(); ++i) {
        labels.push_back(static_cast<int>(i % 4));
        eps.push_back(draw.uniform_left_open(0.0, 0.2));
        rngs.emplace_back(100 + i);
    }
    auto cfg = evaluation_attack(0.2);
    cfg.iterations = 8;
    const auto res = pgd_attack_batch(model, images, labels, eps, cfg, rngs);
    REQUIRE(res.images.size() == images.size());
    CHECK(res.skipped_count == 0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        CHECK(linf_distance(res.images[i], images[i]) <= eps[i] + 1e-7);
        for (float v : res.images[i].values()) CHECK((v >= 0.0f && v <= 1.0f));
        CHECK(res.losses[i] >= res.clean_losses[i]);
    }
    // The reported losses belong to the returned images.
    std::vector<SoftLabel> targets;
    for (int y : labels) targets.push_back(one_hot(y, 4));
    const auto check = sample_losses(model, stack(std::span<const Image>(res.images)), targets);
    for (std::size_t i = 0; i < check.size(); ++i) CHECK(check[i] == doctest::Approx(res.losses[i]).epsilon(1e-12));
}

TEST_CASE("PGD raises the loss on a random model") {
    const Model model = small_model(5);
    const auto images = random_images(16, 6);
    std::vector<int> labels(16, 1);
    std::vector<double> eps(16, 0.1);
    std::vector<Rng> rngs(16, Rng(7));
    const auto res = pgd_attack_batch(model, images, labels, eps, evaluation_attack(0.1), rngs);
    double gain = 0;
    for (std::size_t i = 0; i < 16; ++i) gain += res.losses[i] - res.clean_losses[i];
    CHECK(gain > 0.0);
}

TEST_CASE("vanishing eps leaves the input in place") {
    const Model model = small_model(8);
    const auto images = random_images(4, 9);
    Rng rng(10);
    for (const auto& x : images) {
        const Image adv = pgd_attack(model, x, 0, 1e-9, 10, 1e-9 / 4, 2, rng);
        CHECK(linf_distance(adv, x) <= 1e-9);
    }
}

TEST_CASE("fixed streams reproduce the attack") {
    const Model model = small_model(11);
    const auto images = random_images(6, 12);
    std::vector<int> labels{0, 1, 2, 3, 0, 1};
    std::vector<double> eps(6, 0.05);
    std::vector<Rng> r1, r2;
    for (int i = 0; i < 6; ++i) {
        r1.emplace_back(i);
        r2.emplace_back(i);
    }
    const auto a = pgd_attack_batch(model, images, labels, eps, training_attack(0.05), r1);
    const auto b = pgd_attack_batch(model, images, labels, eps, training_attack(0.05), r2);
    CHECK(a.images == b.images);
    CHECK(a.losses == b.losses);
}

TEST_CASE("non-finite gradients pass the sample through") {
    Model model = small_model(13);
    model.parameters().back()[0] = std::numeric_limits<float>::infinity();
    const auto images = random_images(2, 14);
    std::vector<int> labels{0, 1};
    std::vector<double> eps(2, 0.05);
    std::vector<Rng> rngs(2, Rng(1));
    const auto res = pgd_attack_batch(model, images, labels, eps, training_attack(0.05), rngs);
    CHECK(res.skipped_count == 2);
    CHECK(res.images == images);
}

TEST_CASE("attack input validation") {
    const Model model = small_model(15);
    const auto images = random_images(2, 16);
    std::vector<int> labels{0};
    std::vector<double> eps(2, 0.05);
    std::vector<Rng> rngs(2);
    CHECK_THROWS_AS(pgd_attack_batch(model, images, labels, eps, training_attack(0.05), rngs), InvalidInput);
    labels.push_back(1);
    eps[1] = 0.0;
    CHECK_THROWS_AS(pgd_attack_batch(model, images, labels, eps, training_attack(0.05), rngs), InvalidConfig);
    CHECK_THROWS_AS(one_hot(4, 4), InvalidInput);
}

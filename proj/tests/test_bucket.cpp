#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "autolabel/bucket.hpp"
#include "autolabel/error.hpp"
#include "support/oracles.hpp"

using namespace autolabel;

TEST_CASE("augmix bucket examples") {
    CHECK(augmix_bucket(2, 0.5, 5) == BucketKey::augmix(2, 3));
    CHECK(augmix_bucket(1, 0.0, 5) == BucketKey::augmix(1, 1));
    CHECK(augmix_bucket(3, 0.0, 10) == BucketKey::augmix(3, 1));
    CHECK(augmix_bucket(1, 1.0, 5) == BucketKey::augmix(1, 5));
    CHECK(augmix_bucket(1, 0.2, 5) == BucketKey::augmix(1, 1)); // right edge is inclusive
    CHECK(augmix_bucket(1, 0.07, 100) == BucketKey::augmix(1, 7));
}

TEST_CASE("mixup bucket examples") {
    CHECK(mixup_bucket(0.5, 5) == BucketKey::mixup(5));
    CHECK(mixup_bucket(0.9, 5) == BucketKey::mixup(1));
    CHECK(mixup_bucket(0.0, 5) == BucketKey::mixup(1));
    CHECK(mixup_bucket(1.0, 5) == BucketKey::mixup(1));
    CHECK(mixup_bucket(0.3, 5) == mixup_bucket(0.7, 5));
}

TEST_CASE("adversarial bucket examples") {
    CHECK(adv_bucket(0.03, 0.1, 10) == BucketKey::adversarial(3));
    CHECK(adv_bucket(0.1, 0.1, 10) == BucketKey::adversarial(10));
    CHECK(adv_bucket(0.0, 0.1, 10) == BucketKey::adversarial(1));
    CHECK(adv_bucket(0.01, 0.01, 10) == BucketKey::adversarial(10));
    CHECK_THROWS_AS(adv_bucket(0.011, 0.01, 10), InvalidConfig);
    CHECK_THROWS_AS(adv_bucket(-0.001, 0.01, 10), InvalidConfig);
}

TEST_CASE("out-of-range distances are rejected") {
    CHECK_THROWS_AS(augmix_bucket(0, 0.5, 5), InvalidConfig);
    CHECK_THROWS_AS(augmix_bucket(1, 1.5, 5), InvalidConfig);
    CHECK_THROWS_AS(mixup_bucket(-0.1, 5), InvalidConfig);
    CHECK_THROWS_AS(ceil_bucket(0.5, 0), InvalidConfig);
}

TEST_CASE("bucket maps agree with the stepped oracle on a grid") {
    for (int n : {1, 2, 3, 5, 7, 10, 16}) {
        const std::uint64_t grid = 2000;
        for (std::uint64_t i = 0; i <= grid; ++i) {
            const double f = static_cast<double>(i) / grid;
            CAPTURE(n);
            CAPTURE(i);
            CHECK(augmix_bucket(1, f, n).n() == oracles::stepped_bucket(i, grid, n));
            CHECK(adv_bucket(f * 0.03, 0.03, n).n() == oracles::stepped_bucket(i, grid, n));
            const std::uint64_t lo = std::min(i, grid - i);
            CHECK(mixup_bucket(f, n).n() == oracles::stepped_bucket(2 * lo, grid, n));
        }
    }
}

TEST_CASE("bucket lists") {
    const auto ra = randaug_buckets(kAllOps, 10);
    CHECK(ra.size() == 8 * 10 + 2);
    CHECK(std::is_sorted(ra.begin(), ra.end()));
    CHECK(std::set<BucketKey>(ra.begin(), ra.end()).size() == ra.size());
    CHECK(randaug_buckets(kMotivationOps, 2).size() == 10);
    CHECK(augmix_buckets(3, 10).size() == 30);
    CHECK(adversarial_buckets(10).size() == 10);
    CHECK(mixup_buckets(5).back() == BucketKey::mixup(5));
}

TEST_CASE("bucket names round-trip through parsers") {
    CHECK(to_string(BucketKey::randaug(OpType::rotation, 3)) == "randaug:rotation:3");
    CHECK(to_string(BucketKey::augmix(2, 5)) == "augmix:2:5");
    CHECK(to_string(BucketKey::adversarial(4)) == "adversarial:4");
    CHECK(to_string(BucketKey::mixup(1)) == "mixup:1");
    for (OpType op : kAllOps) CHECK(parse_op(to_string(op)) == op);
    CHECK_FALSE(parse_op("zoom").has_value());
    for (Family f : {Family::randaug, Family::augmix, Family::adversarial, Family::mixup})
        CHECK(parse_family(to_string(f)) == f);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "autolabel/harness.hpp"

using namespace autolabel;

namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.data.synthetic.count = 1500;
    c.data.synthetic.size = 8;
    c.data.synthetic.noise = 0.02;
    c.data.synthetic.amplitude_min = 0.4;
    c.data.synthetic.amplitude_max = 0.5;
    c.val_size = 200;
    c.test_size = 300;
    c.conv1 = 4;
    c.conv2 = 8;
    c.conv_dense = 16;
    c.epochs = 2;
    c.batch_size = 64;
    c.sgd.lr = 0.1;
    c.val_subsample = 64;
    c.eval_corruptions = false;
    c.seed = 3;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("learning-rate schedule steps at half and three quarters") {
    TrainConfig c;
    c.epochs = 8;
    c.sgd.lr = 0.1;
    CHECK(scheduled_lr(c, 0) == 0.1);
    CHECK(scheduled_lr(c, 3) == 0.1);
    CHECK(scheduled_lr(c, 4) == doctest::Approx(0.01));
    CHECK(scheduled_lr(c, 5) == doctest::Approx(0.01));
    CHECK(scheduled_lr(c, 6) == doctest::Approx(0.001));
    c.lr_decay = false;
    CHECK(scheduled_lr(c, 7) == 0.1);
}

TEST_CASE("data preparation is seeded by the data seed only") {
    auto c = small_config();
    const auto a = prepare_data(c);
    c.seed = 99;
    const auto b = prepare_data(c);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == 1000);
    CHECK(a.val.size() == 200);
    CHECK(a.test.size() == 300);
}

TEST_CASE("evaluation closed forms") {
    const auto c = small_config();
    const auto data = prepare_data(c);
    Rng rng(1);
    Model zero(data.test.images.front().shape(), c.architecture(), rng);
    for (auto& p : zero.parameters()) p.fill(0.0f);
    const auto rep = evaluate(zero, data.test);
    CHECK(rep.mean_confidence == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rep.ece == doctest::Approx(std::abs(rep.accuracy - 0.1)).epsilon(1e-12));
    CHECK(evaluate(zero, data.test) == rep);

    Model random(data.test.images.front().shape(), c.architecture(), rng);
    const auto one = data.test.subset(std::vector<std::size_t>{0});
    const auto pred = predict(random, one);
    const auto r1 = evaluate(random, one);
    const double expect = pred[0].predicted_class == static_cast<std::size_t>(one.labels[0])
                              ? 1.0 - pred[0].confidence
                              : pred[0].confidence;
    CHECK(r1.ece == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("one-hot training keeps the table at one and is deterministic") {
    auto c = small_config();
    c.method = Method::randaug;
    c.m_max = 5;
    c.epochs = 4;
    const auto data = prepare_data(c);
    const auto a = run_training(c, data);
    const auto b = run_training(c, data);
    CHECK_FALSE(a.report.aborted);
    CHECK(a.report.epochs.size() == 4);
    for (const auto& [k, y] : a.table.entries()) CHECK(y == 1.0);
    CHECK(run_report_json(a.report) == run_report_json(b.report));
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(a.report.clean.accuracy > 0.3);
}

TEST_CASE("alpha = 0 autolabel matches one-hot training") {
    auto c = small_config();
    c.method = Method::randaug;
    const auto data = prepare_data(c);
    const auto base = run_training(c, data);
    c.labels = LabelMode::autolabel;
    c.alpha = 0.0;
    const auto zero = run_training(c, data);
    REQUIRE(zero.report.epochs.size() == base.report.epochs.size());
    for (std::size_t e = 0; e < base.report.epochs.size(); ++e)
        CHECK(std::abs(zero.report.epochs[e].train_loss - base.report.epochs[e].train_loss) <= 1e-6);
    CHECK(zero.report.clean.accuracy == base.report.clean.accuracy);
    CHECK(zero.report.clean.ece == doctest::Approx(base.report.clean.ece).epsilon(1e-9));
    for (const auto& [k, y] : zero.table.entries()) CHECK(y == 1.0);
    // The autolabel run still measured every bucket.
    CHECK(zero.report.epochs.back().buckets.size() == zero.table.entries().size());
}

TEST_CASE("a perfectly calibrated validation predictor is a fixed point") {
    auto c = small_config();
    c.method = Method::augmix;
    c.labels = LabelMode::autolabel;
    c.alpha = 0.5;
    c.n_buckets = 4;
    TrainingHooks hooks;
    hooks.skip_evaluation = true;
    hooks.validation_predictor = [](const Model& m, const Dataset& d) {
        std::vector<Prediction> out;
        for (int y : d.labels) {
            Prediction p;
            p.probabilities.assign(m.num_classes(), 0.0);
            p.probabilities[static_cast<std::size_t>(y)] = 1.0;
            p.predicted_class = static_cast<std::size_t>(y);
            p.confidence = 1.0;
            out.push_back(std::move(p));
        }
        return out;
    };
    int calls = 0;
    hooks.on_epoch = [&](const EpochRecord& r) {
        ++calls;
        for (const auto& b : r.buckets) {
            CHECK(b.ece == 0.0);
            CHECK(b.label_after == b.label_before);
        }
    };
    const auto res = run_training(c, hooks);
    CHECK(calls == c.epochs);
    for (const auto& [k, y] : res.table.entries()) CHECK(y == 1.0);
    CHECK(res.table.epoch() == c.epochs);
}

TEST_CASE("autolabel trajectories stay within [1/K, 1]") {
    auto c = small_config();
    c.method = Method::mixup;
    c.labels = LabelMode::autolabel;
    c.alpha = 1.0;
    c.epochs = 3;
    c.n_buckets = 3;
    const auto res = run_training(c);
    bool moved = false;
    for (const auto& e : res.report.epochs)
        for (const auto& [k, y] : e.labels) {
            CHECK(y >= 0.1);
            CHECK(y <= 1.0);
            moved = moved || y < 1.0;
        }
    CHECK(moved);
    CHECK(res.report.epochs.back().labels == res.table.entries());
}

TEST_CASE("adversarial evaluation") {
    auto c = small_config();
    c.epochs = 1;
    const auto data = prepare_data(c);
    const auto res = run_training(c, data);
    const auto sub = data.test.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    auto attack = evaluation_attack(0.0);
    CHECK(evaluate_adversarial(res.model, sub, attack, 1) == evaluate(res.model, sub).accuracy);
    attack = evaluation_attack(0.3);
    attack.iterations = 10;
    CHECK(evaluate_adversarial(res.model, sub, attack, 1) <= evaluate(res.model, sub).accuracy);
    CHECK(evaluate_adversarial(res.model, sub, attack, 1) == evaluate_adversarial(res.model, sub, attack, 1));
}

TEST_CASE("corruption severity lowers accuracy of a trained model") {
    auto c = small_config();
    c.epochs = 4;
    c.data.synthetic.count = 2500;
    c.test_size = 1000;
    const auto data = prepare_data(c);
    const auto res = run_training(c, data);
    REQUIRE(res.report.clean.accuracy > 0.5);
    const auto cells = evaluate_corrupted(res.model, data.test, 15, 17);
    REQUIRE(cells.size() == kAllCorruptions.size() * kSeverities);
    for (std::size_t k = 0; k < kAllCorruptions.size(); ++k) {
        int inversions = 0;
        for (int s = 1; s < kSeverities; ++s) {
            const double prev = cells[k * kSeverities + static_cast<std::size_t>(s - 1)].accuracy;
            const double cur = cells[k * kSeverities + static_cast<std::size_t>(s)].accuracy;
            if (cur > prev) {
                ++inversions;
                CHECK(cur - prev <= 0.005);
            }
        }
        CAPTURE(to_string(kAllCorruptions[k]));
        CHECK(inversions <= 1);
        const double first = cells[k * kSeverities].accuracy;
        const double last = cells[k * kSeverities + kSeverities - 1].accuracy;
        CHECK(last <= first);
    }
}

TEST_CASE("artifacts") {
    auto c = small_config();
    c.method = Method::adv_training;
    c.labels = LabelMode::autolabel;
    c.attack.eps_max = 0.05;
    c.epochs = 1;
    c.eval_adversarial = true;
    c.adversarial_subsample = 20;
    c.eval_iterations = 5;
    c.eval_restarts = 1;
    c.baseline_clean = 90.0;
    c.baseline_adv = 0.0;
    const auto res = run_training(c);
    REQUIRE(res.report.adversarial_accuracy.has_value());
    REQUIRE(res.report.accuracy_difference.has_value());
    CHECK(*res.report.accuracy_difference ==
          doctest::Approx(100.0 * res.report.clean.accuracy + 100.0 * *res.report.adversarial_accuracy - 90.0));

    const auto dir = std::filesystem::temp_directory_path() / "autolabel_test_artifacts";
    std::filesystem::remove_all(dir);
    write_artifacts(res, dir);
    for (const char* f : {"run.json", "metrics.csv", "labels.csv", "bins.csv", "model.alnn"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(slurp(dir / "run.json") == run_report_json(res.report));
    const auto labels = slurp(dir / "labels.csv");
    CHECK(labels.starts_with("epoch,family,coord0,coord1,y_true_conf\n0,adversarial,1,0,1\n"));
    const Model back = load_checkpoint(dir / "model.alnn");
    CHECK(back.parameters() == res.model.parameters());
    std::filesystem::remove_all(dir);
}

TEST_CASE("divergent training aborts with a partial report") {
    auto c = small_config();
    c.sgd.lr = 1e30;
    c.epochs = 3;
    const auto res = run_training(c);
    CHECK(res.report.aborted);
    CHECK_FALSE(res.report.abort_reason.empty());
    CHECK(res.report.epochs.size() < 3);
}

TEST_CASE("motivation sweep rows") {
    auto c = small_config();
    c.epochs = 1;
    c.eval_corruptions = true;
    c.corruption_subsample = 50;
    const std::vector<int> mags{1};
    const std::vector<std::uint64_t> seeds{1};
    const std::vector<LabelMode> modes{LabelMode::one_hot, LabelMode::autolabel};
    std::size_t seen = 0;
    const auto rows = run_motivation_sweep(c, mags, seeds, modes, [&](const SweepRow&) { ++seen; });
    CHECK(rows.size() == 2);
    CHECK(seen == 2);
    CHECK(rows[0].mode == LabelMode::one_hot);
    CHECK(rows[1].mode == LabelMode::autolabel);
    for (const auto& r : rows) {
        CHECK(r.magnitude == 1);
        CHECK(r.corrupted_ece >= 0.0);
    }
    const auto path = std::filesystem::temp_directory_path() / "autolabel_test_sweep.csv";
    write_sweep_csv(rows, path);
    CHECK(slurp(path).starts_with("max_magnitude,labels,seed,clean_accuracy,clean_ece,corrupted_accuracy,corrupted_ece\n"));
    std::filesystem::remove(path);
}

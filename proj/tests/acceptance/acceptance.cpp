// Acceptance gate. Each invocation checks one criterion and prints a single
// "PASS criterion N: ..." or "FAIL criterion N: ..." line; the exit status is
// 0 on PASS and 1 on FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "autolabel/harness.hpp"
#include "support/gradcheck.hpp"
#include "support/label_laws.hpp"
#include "support/oracles.hpp"

using namespace autolabel;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

// 16x16 oriented gratings: ten orientations at one frequency, so neighbouring
// classes differ by 18 degrees and large rotations blur the class boundary.
constexpr const char* kToyData = R"(
data.format = synthetic
data.classes = 10
data.val_size = 1000
data.test_size = 2000
synthetic.count = 10000
synthetic.seed = 7
synthetic.size = 16
synthetic.orientations = 10
synthetic.orientation_jitter = 3
synthetic.noise = 0.18
synthetic.amplitude_min = 0.12
synthetic.amplitude_max = 0.35
)";

constexpr const char* kMotivationRun = R"(
method.augmentation = randaug
randaug.ops = motivation
autolabel.alpha = 0.05
validation.subsample = 256
model.arch = convnet
train.epochs = 20
train.lr = 0.05
train.batch_size = 128
eval.corruptions = true
)";

constexpr const char* kAdversarialRun = R"(
method.augmentation = adv_training
autolabel.alpha = 0.5
validation.subsample = 256
model.arch = mlp
model.hidden = 256, 256
train.epochs = 10
train.lr = 0.05
eval.corruptions = false
eval.adversarial = true
eval.eps = 0.03
eval.iterations = 50
eval.restarts = 3
eval.adversarial_subsample = 500
)";

TrainConfig toy_config(const char* run) { return parse_config(std::string(kToyData) + run, "acceptance"); }

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto p = gradcheck::random_problem(1000 + seed);
        const auto out = gradcheck::check(p);
        worst = std::max(worst, out.max_rel_error);
        checked += out.checked;
        skipped += out.skipped;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs <= 60.0 && checked > 0,
            format("100 models, %zu coordinates (%zu at kinks skipped), max relative error %.3g <= 1e-4, %.1fs <= 60s",
                   checked, skipped, worst, secs)};
}

Verdict ece_oracle() {
    Rng rng(2);
    double worst = 0.0;
    bool one_bin_exact = true;
    for (int t = 0; t < 1000; ++t) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 300));
        std::vector<double> conf(n);
        std::unique_ptr<bool[]> hit(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) {
            conf[i] = rng.bernoulli(0.1) ? rng.uniform_int(0, 15) / 15.0 : rng.uniform();
            hit[i] = rng.bernoulli(conf[i]);
        }
        const std::span<const bool> h(hit.get(), n);
        const auto rep = calibration_report(conf, h, 15);
        worst = std::max(worst, std::abs(rep.ece - oracles::naive_ece(conf, h, 15).ece));
        const auto one = calibration_report(conf, h, 1);
        one_bin_exact = one_bin_exact && one.ece == std::abs(one.accuracy - one.mean_confidence);
    }
    return {worst <= 1e-12 && one_bin_exact,
            format("1000 sets, max |bucketed - two-loop| = %.3g <= 1e-12, R=1 ece == |acc - conf| exactly: %s", worst,
                   one_bin_exact ? "yes" : "no")};
}

Verdict label_update_laws() {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto err = label_laws::check(label_laws::draw(rng));
        if (!err.empty()) return {false, "tuple " + std::to_string(i) + ": " + err};
    }
    return {true, "10000 tuples: unclipped step alpha*ECE, direction -sign(conf-acc), output in [acc, 1], ECE=0 "
                  "fixed point, soft labels sum to 1 within 1e-9"};
}

Verdict bucket_maps() {
    std::size_t points = 0;
    for (int n = 1; n <= 20; ++n) {
        const std::uint64_t grid = 10000;
        for (std::uint64_t i = 0; i <= grid; ++i, ++points) {
            const double f = static_cast<double>(i) / grid;
            const int expect = oracles::stepped_bucket(i, grid, n);
            const int a = augmix_bucket(1 + static_cast<int>(i % 3), f, n).n();
            const int e = adv_bucket(f * 0.01, 0.01, n).n();
            const int m = mixup_bucket(f, n).n();
            const int em = oracles::stepped_bucket(2 * std::min(i, grid - i), grid, n);
            for (int v : {a, e, m})
                if (v < 1 || v > n) return {false, format("bucket %d outside 1..%d at fraction %g", v, n, f)};
            if (a != expect || e != expect || m != em)
                return {false, format("N=%d fraction %g: augmix %d adv %d mixup %d, oracle %d / %d", n, f, a, e, m,
                                      expect, em)};
        }
        if (augmix_bucket(2, 0.0, n).n() != 1 || adv_bucket(0.0, 0.01, n).n() != 1 || mixup_bucket(0.0, n).n() != 1 ||
            mixup_bucket(1.0, n).n() != 1)
            return {false, format("merge rule violated at N=%d", n)};
    }
    return {true, format("%zu grid points x 3 maps match the stepped oracle; lambda=0, eps=0, gamma in {0,1} map to 1",
                         points)};
}

Verdict pgd_contract() {
    const auto t0 = Clock::now();
    std::size_t attacks = 0;
    double worst_excess = -1.0;
    for (std::uint64_t m = 0; m < 10; ++m) {
        Rng init(50 + m);
        const bool conv = m % 2 == 0;
        const Model model(Shape{1, 12, 12},
                          conv ? convnet_architecture(6, 8, 16, 10)
                               : mlp_architecture(std::vector<std::size_t>{32}, 10),
                          init);
        std::vector<Image> xs;
        std::vector<int> ys;
        std::vector<double> eps;
        std::vector<Rng> rngs;
        Rng draw(70 + m);
        for (int i = 0; i < 100; ++i) {
            Image x(Shape{1, 12, 12});
            for (auto& v : x.values()) v = static_cast<float>(draw.bernoulli(0.1) ? draw.bernoulli(0.5) : draw.uniform());
            xs.push_back(std::move(x));
            ys.push_back(draw.uniform_int(0, 9));
            eps.push_back(draw.uniform_left_open(0.0, 0.3));
            rngs.emplace_back(draw());
        }
        auto cfg = evaluation_attack(0.3);
        cfg.iterations = 10;
        cfg.restarts = 2;
        const auto res = pgd_attack_batch(model, xs, ys, eps, cfg, rngs);
        for (std::size_t i = 0; i < xs.size(); ++i, ++attacks) {
            const double d = linf_distance(res.images[i], xs[i]);
            worst_excess = std::max(worst_excess, d - eps[i]);
            if (d > eps[i] + 1e-7) return {false, format("attack %zu: |delta|inf %.9g > eps %.9g", attacks, d, eps[i])};
            for (float v : res.images[i].values())
                if (!(v >= 0.0f && v <= 1.0f)) return {false, format("attack %zu leaves [0, 1]", attacks)};
            if (res.losses[i] < res.clean_losses[i])
                return {false, format("attack %zu: loss %.9g below clean %.9g", attacks, res.losses[i],
                                      res.clean_losses[i])};
        }
    }
    const double delta = accuracy_difference(86.9, 47.6, 95.6, 0.0);
    const double secs = seconds_since(t0);
    const bool delta_ok = std::abs(delta - 38.9) < 1e-9;
    return {delta_ok && secs <= 120.0,
            format("%zu attacks within eps + 1e-7 (max excess %.3g), in [0,1], loss >= clean; "
                   "delta(86.9, 47.6 vs 95.6, 0) = %+.1f; %.1fs <= 120s",
                   attacks, worst_excess, delta, secs)};
}

Verdict motivation_trend() {
    const auto t0 = Clock::now();
    const auto base = toy_config(kMotivationRun);
    const std::vector<int> mags{2, 5, 8, 10};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const std::vector<LabelMode> modes{LabelMode::one_hot, LabelMode::autolabel};
    const auto rows = run_motivation_sweep(base, mags, seeds, modes, [](const SweepRow& r) {
        std::fprintf(stderr, "  m=%2d %-9s seed %llu clean %.4f/%.4f corrupted %.4f/%.4f\n", r.magnitude,
                     std::string(to_string(r.mode)).c_str(), static_cast<unsigned long long>(r.seed), r.clean_accuracy,
                     r.clean_ece, r.corrupted_accuracy, r.corrupted_ece);
    });
    const double secs = seconds_since(t0);

    std::map<std::pair<int, LabelMode>, std::vector<const SweepRow*>> by;
    for (const auto& r : rows) by[{r.magnitude, r.mode}].push_back(&r);
    auto mean_acc = [&](int m, LabelMode mode) {
        double s = 0;
        for (const auto* r : by[{m, mode}]) s += r->clean_accuracy;
        return s / static_cast<double>(by[{m, mode}].size());
    };
    const double oh2 = mean_acc(2, LabelMode::one_hot), oh10 = mean_acc(10, LabelMode::one_hot);
    const double al10 = mean_acc(10, LabelMode::autolabel);
    const bool a = (oh2 - oh10) * 100.0 >= 1.0;
    const bool b = al10 >= oh10;
    bool c = true;
    std::string wins;
    for (int m : {5, 8, 10}) {
        int w = 0;
        for (std::size_t s = 0; s < seeds.size(); ++s)
            if (by[{m, LabelMode::autolabel}][s]->corrupted_ece <= by[{m, LabelMode::one_hot}][s]->corrupted_ece) ++w;
        c = c && w >= 2;
        wins += format(" m%d:%d/3", m, w);
    }
    const bool fast = secs <= 2700.0;
    return {a && b && c && fast,
            format("(a) one_hot clean m2 %.2f%% - m10 %.2f%% = %.2f pts >= 1: %s; (b) autolabel m10 %.2f%% >= one_hot "
                   "%.2f%%: %s; (c) autolabel cECE <= one_hot in >= 2/3 seeds,%s: %s; %.0fs <= 2700s",
                   100 * oh2, 100 * oh10, 100 * (oh2 - oh10), a ? "yes" : "no", 100 * al10, 100 * oh10,
                   b ? "yes" : "no", wins.c_str(), c ? "yes" : "no", secs)};
}

Verdict adversarial_tradeoff() {
    const auto t0 = Clock::now();
    auto vanilla_cfg = toy_config(kAdversarialRun);
    vanilla_cfg.method = Method::vanilla;
    const auto data = prepare_data(vanilla_cfg);

    struct Point {
        double clean = 0.0;
        double adv = 0.0;
    };
    auto run = [&](const TrainConfig& cfg) {
        const auto res = run_training(cfg, data);
        if (res.report.aborted) throw NumericalError("run aborted: " + res.report.abort_reason);
        return Point{100.0 * res.report.clean.accuracy, 100.0 * res.report.adversarial_accuracy.value_or(0.0)};
    };

    const std::vector<std::uint64_t> seeds{1, 2, 3};
    Point vanilla;
    for (auto s : seeds) {
        vanilla_cfg.seed = s;
        const auto p = run(vanilla_cfg);
        vanilla.clean += p.clean / 3.0;
        vanilla.adv += p.adv / 3.0;
        std::fprintf(stderr, "  vanilla seed %llu clean %.2f adv %.2f\n", static_cast<unsigned long long>(s), p.clean,
                     p.adv);
    }

    std::map<std::pair<double, LabelMode>, Point> mean;
    for (double eps : {0.03, 0.1}) {
        for (LabelMode mode : {LabelMode::one_hot, LabelMode::autolabel}) {
            for (auto s : seeds) {
                auto cfg = toy_config(kAdversarialRun);
                cfg.attack = training_attack(eps, cfg.n_buckets);
                cfg.labels = mode;
                cfg.seed = s;
                const auto p = run(cfg);
                auto& m = mean[{eps, mode}];
                m.clean += p.clean / 3.0;
                m.adv += p.adv / 3.0;
                std::fprintf(stderr, "  eps %.2f %-9s seed %llu clean %.2f adv %.2f\n", eps,
                             std::string(to_string(mode)).c_str(), static_cast<unsigned long long>(s), p.clean, p.adv);
            }
        }
    }
    const double secs = seconds_since(t0);
    auto delta = [&](const Point& p) { return accuracy_difference(p.clean, p.adv, vanilla.clean, vanilla.adv); };
    const Point oh = mean[{0.1, LabelMode::one_hot}], al = mean[{0.1, LabelMode::autolabel}];
    const Point oh3 = mean[{0.03, LabelMode::one_hot}], al3 = mean[{0.03, LabelMode::autolabel}];
    const bool clean_ok = al.clean > oh.clean;
    const bool delta_ok = delta(al) >= delta(oh);
    const bool fast = secs <= 3600.0;
    return {clean_ok && delta_ok && fast,
            format("vanilla %.2f/%.2f; eps 0.03 one_hot %.2f/%.2f (delta %+.2f) autolabel %.2f/%.2f (delta %+.2f); "
                   "eps 0.1 one_hot %.2f/%.2f (delta %+.2f) autolabel %.2f/%.2f (delta %+.2f); clean autolabel > "
                   "one_hot at 0.1: %s; delta autolabel >= one_hot at 0.1: %s; %.0fs <= 3600s",
                   vanilla.clean, vanilla.adv, oh3.clean, oh3.adv, delta(oh3), al3.clean, al3.adv, delta(al3), oh.clean,
                   oh.adv, delta(oh), al.clean, al.adv, delta(al), clean_ok ? "yes" : "no", delta_ok ? "yes" : "no",
                   secs)};
}

Verdict cli_determinism(const std::string& cli) {
    if (cli.empty()) return {false, "no --cli path given"};
    const auto t0 = Clock::now();
    const auto dir = std::filesystem::temp_directory_path() / "autolabel_acceptance_8";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << kToyData
            << "synthetic.count = 4000\n"
               "method.augmentation = randaug\n"
               "method.labels = autolabel\n"
               "autolabel.alpha = 0.05\n"
               "validation.subsample = 128\n"
               "train.epochs = 2\n"
               "eval.corruption_subsample = 200\n"
               "seed = 11\n";
    }
    for (const char* run : {"a", "b"}) {
        const std::string cmd = "\"" + cli + "\" train --config \"" + (dir / "run.cfg").string() + "\" --out \"" +
                                (dir / run).string() + "\" > /dev/null";
        if (const int rc = std::system(cmd.c_str()); rc != 0)
            return {false, format("train invocation %s exited with status %d", run, rc)};
    }
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto a = slurp(dir / "a" / "run.json");
    const auto b = slurp(dir / "b" / "run.json");
    const double secs = seconds_since(t0);
    std::filesystem::remove_all(dir);
    return {!a.empty() && a == b && secs <= 300.0,
            format("two seeded train runs, run.json %zu vs %zu bytes, identical: %s; %.0fs <= 300s", a.size(), b.size(),
                   a == b ? "yes" : "no", secs)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int criterion = 0;
    std::string cli;
    app.add_option("--criterion", criterion, "Criterion number (1-8)")->required()->check(CLI::Range(1, 8));
    app.add_option("--cli", cli, "Path to the autolabel executable");
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::function<Verdict()>> checks{
        {1, gradient_oracle},      {2, ece_oracle},
        {3, label_update_laws},    {4, bucket_maps},
        {5, pgd_contract},         {6, motivation_trend},
        {7, adversarial_tradeoff}, {8, [&] { return cli_determinism(cli); }},
    };
    Verdict v;
    try {
        v = checks.at(criterion)();
    } catch (const std::exception& e) {
        v = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", criterion, v.detail.c_str());
    return v.pass ? 0 : 1;
}

// Command-line front end. Exit codes: 0 success, 1 bad input file, 2 config
// error, 3 numerical abort.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "autolabel/augment.hpp"
#include "autolabel/error.hpp"
#include "autolabel/harness.hpp"

namespace {

using namespace autolabel;

constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<std::string> g_overrides;

TrainConfig config_from(const std::string& path) {
    TrainConfig c = path.empty() ? TrainConfig{} : load_config(path);
    for (const auto& kv : g_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidConfig("override '" + kv + "' is not key=value");
        set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (path.empty()) apply_env_overrides(c);
    c.validate();
    return c;
}

void write_ppm(const Image& im, const std::filesystem::path& path) {
    const std::size_t h = height(im), w = width(im), c = channels(im);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << "P6\n" << w << ' ' << h << "\n255\n";
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const float v = im[((c == 3 ? ch : 0) * h + y) * w + x];
                out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
            }
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const TrainConfig cfg = config_from(config_path);
    const auto dir = out_dir.empty() ? (cfg.output_dir.empty() ? std::filesystem::path("run") : cfg.output_dir)
                                     : std::filesystem::path(out_dir);
    TrainingHooks hooks;
    hooks.on_epoch = [](const EpochRecord& e) {
        std::fprintf(stderr, "epoch %d lr %.4g loss %.6f\n", e.epoch, e.lr, e.train_loss);
    };
    const auto result = run_training(cfg, hooks);
    write_artifacts(result, dir);
    const auto& r = result.report;
    if (r.aborted) {
        std::fprintf(stderr, "aborted: %s\n", r.abort_reason.c_str());
        return kExitNumerical;
    }
    std::printf("accuracy %.4f ece %.4f", r.clean.accuracy, r.clean.ece);
    if (r.corrupted) std::printf(" c_accuracy %.4f c_ece %.4f", r.corrupted->accuracy, r.corrupted->ece);
    if (r.adversarial_accuracy) std::printf(" adv_accuracy %.4f", *r.adversarial_accuracy);
    std::printf("\nartifacts in %s\n", dir.string().c_str());
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& model_path, bool corrupted) {
    const TrainConfig cfg = config_from(config_path);
    const Model model = load_checkpoint(model_path);
    const Splits data = prepare_data(cfg);
    const auto rep = evaluate(model, data.test, cfg.ece_bins);
    nlohmann::json j{{"accuracy", rep.accuracy}, {"ece", rep.ece}, {"mean_confidence", rep.mean_confidence},
                     {"m", rep.count}};
    if (corrupted) {
        const auto cells = evaluate_corrupted(model, data.test, cfg.ece_bins, splitmix64(cfg.data.synthetic.seed));
        std::vector<CalibrationReport> reps;
        for (const auto& c : cells) {
            CalibrationReport r;
            r.accuracy = c.accuracy;
            r.ece = c.ece;
            reps.push_back(r);
        }
        const auto agg = corrupted_aggregate(reps);
        j["corrupted_accuracy"] = agg.accuracy;
        j["corrupted_ece"] = agg.ece;
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_attack_eval(const std::string& config_path, const std::string& model_path, double eps, int iterations,
                    int restarts, std::size_t samples) {
    const TrainConfig cfg = config_from(config_path);
    const Model model = load_checkpoint(model_path);
    Splits data = prepare_data(cfg);
    if (samples > 0 && samples < data.test.size()) {
        data.test.images.resize(samples);
        data.test.labels.resize(samples);
    }
    AttackConfig a = evaluation_attack(eps > 0.0 ? eps : 1.0);
    a.iterations = iterations;
    a.restarts = restarts;
    if (eps == 0.0) a.eps_max = 0.0;
    std::size_t skipped = 0;
    const double acc = evaluate_adversarial(model, data.test, a, splitmix64(cfg.data.synthetic.seed), &skipped);
    const double clean = evaluate(model, data.test, cfg.ece_bins).accuracy;
    std::cout << nlohmann::json{{"eps", eps},
                                {"clean_accuracy", clean},
                                {"adversarial_accuracy", acc},
                                {"skipped", skipped},
                                {"m", data.test.size()}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<int>& magnitudes,
              const std::vector<std::uint64_t>& seeds, const std::string& out) {
    const TrainConfig cfg = config_from(config_path);
    const std::vector<LabelMode> modes = {LabelMode::one_hot, LabelMode::autolabel};
    const auto rows = run_motivation_sweep(cfg, magnitudes, seeds, modes, [](const SweepRow& r) {
        std::fprintf(stderr, "m_max %d %s seed %llu: acc %.4f ece %.4f c_acc %.4f c_ece %.4f\n", r.magnitude,
                     std::string(to_string(r.mode)).c_str(), static_cast<unsigned long long>(r.seed),
                     r.clean_accuracy, r.clean_ece, r.corrupted_accuracy, r.corrupted_ece);
    });
    write_sweep_csv(rows, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_preview(const std::string& config_path, std::size_t count, const std::string& out_dir) {
    const TrainConfig cfg = config_from(config_path);
    const Splits data = prepare_data(cfg);
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < std::min(count, data.train.size()); ++i) {
        Rng rng = Rng::derive(cfg.seed, Stream::preview, {i});
        const Image& x = data.train.images[i];
        Image img = x;
        std::string tag = "clean";
        switch (cfg.method) {
        case Method::randaug: {
            auto s = sample_randaug(x, rng, cfg.m_max, cfg.ops);
            img = std::move(s.image);
            tag = to_string(s.bucket);
            break;
        }
        case Method::augmix: {
            auto s = augmix(x, rng, cfg.d_max, cfg.augmix_magnitude, cfg.n_buckets, cfg.ops);
            img = std::move(s.image);
            tag = to_string(s.bucket);
            break;
        }
        case Method::mixup: {
            const std::size_t p = (i + 1) % data.train.size();
            auto s = mixup(x, data.train.images[p], data.train.labels[i], data.train.labels[p],
                           rng.beta(cfg.mixup_beta, cfg.mixup_beta), cfg.n_buckets);
            img = std::move(s.image);
            tag = to_string(s.bucket);
            break;
        }
        case Method::vanilla:
        case Method::adv_training: break;
        }
        for (auto& ch : tag)
            if (ch == ':') ch = '_';
        const auto name = std::filesystem::path(out_dir) /
                          ("sample_" + std::to_string(i) + "_y" + std::to_string(data.train.labels[i]) + "_" + tag +
                           ".ppm");
        write_ppm(img, name);
        write_ppm(x, std::filesystem::path(out_dir) / ("sample_" + std::to_string(i) + "_orig.ppm"));
    }
    std::printf("wrote %zu previews to %s\n", std::min(count, data.train.size()), out_dir.c_str());
    return 0;
}

int cmd_export_labels(const std::string& run_json, const std::string& out) {
    std::ifstream in(run_json);
    if (!in) throw InvalidInput("cannot read " + run_json);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("run.json: ") + e.what(), e.byte);
    }
    std::ofstream csv(out);
    if (!csv) throw InvalidInput("cannot write " + out);
    csv.precision(17);
    write_labels_csv_header(csv);
    for (const auto& e : j.at("epochs")) {
        for (const auto& [key, value] : e.at("labels").items()) {
            // key is family:coord0[:coord1]
            std::vector<std::string> parts;
            std::stringstream ss(key);
            for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
            csv << e.at("epoch").get<int>() << ',' << parts.at(0) << ',' << parts.at(1) << ','
                << (parts.size() > 2 ? parts[2] : "0") << ',' << value.get<double>() << '\n';
        }
    }
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration-aware augmentation training laboratory"};
    app.require_subcommand(1);
    app.add_option("--set", g_overrides, "Override a config key, e.g. --set train.epochs=2");

    std::string config_path, model_path, out;
    auto* train = app.add_subcommand("train", "Train one configuration and export run artifacts");
    train->add_option("--config", config_path, "Config file")->required();
    train->add_option("--out", out, "Artifact directory (default: output.dir or ./run)");

    bool corrupted = false;
    auto* eval = app.add_subcommand("eval", "Clean (and corrupted) calibration of a checkpoint on the test split");
    eval->add_option("--config", config_path, "Config file describing the data")->required();
    eval->add_option("--model", model_path, "Checkpoint (.alnn)")->required();
    eval->add_flag("--corrupted", corrupted, "Also evaluate the corruption suite");

    double eps = 0.03;
    int iterations = 50, restarts = 3;
    std::size_t samples = 500;
    auto* attack = app.add_subcommand("attack-eval", "PGD accuracy of a checkpoint on the test split");
    attack->add_option("--config", config_path, "Config file describing the data")->required();
    attack->add_option("--model", model_path, "Checkpoint (.alnn)")->required();
    attack->add_option("--eps", eps, "l-inf radius")->check(CLI::Range(0.0, 1.0));
    attack->add_option("--iterations", iterations, "PGD iterations")->check(CLI::PositiveNumber);
    attack->add_option("--restarts", restarts, "Random restarts")->check(CLI::PositiveNumber);
    attack->add_option("--samples", samples, "Test samples to attack (0 = all)");

    std::vector<int> magnitudes{2, 5, 8, 10};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    auto* sweep = app.add_subcommand("sweep-motivation", "Accuracy and calibration against max RandAug magnitude");
    sweep->add_option("--config", config_path, "Base config")->required();
    sweep->add_option("--magnitudes", magnitudes, "Max magnitudes")->delimiter(',');
    sweep->add_option("--seeds", seeds, "Run seeds")->delimiter(',');
    sweep->add_option("--out", out, "CSV output")->required();

    std::size_t count = 8;
    auto* preview = app.add_subcommand("preview-aug", "Write augmented training samples as PPM");
    preview->add_option("--config", config_path, "Config file")->required();
    preview->add_option("--count", count, "Number of samples");
    preview->add_option("--out", out, "Output directory")->required();

    std::string run_json;
    auto* labels = app.add_subcommand("export-labels", "Label-table trajectory of a run as CSV");
    labels->add_option("--run", run_json, "run.json of a finished run")->required();
    labels->add_option("--out", out, "CSV output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train) return cmd_train(config_path, out);
        if (*eval) return cmd_eval(config_path, model_path, corrupted);
        if (*attack) return cmd_attack_eval(config_path, model_path, eps, iterations, restarts, samples);
        if (*sweep) return cmd_sweep(config_path, magnitudes, seeds, out);
        if (*preview) return cmd_preview(config_path, count, out);
        if (*labels) return cmd_export_labels(run_json, out);
    } catch (const InvalidConfig& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return 0;
}

#include "autolabel/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "autolabel/attacks.hpp"
#include "autolabel/augment.hpp"
#include "autolabel/error.hpp"

namespace autolabel {

namespace {

constexpr std::size_t kEvalChunk = 256;

// Target for a sample seen without augmentation.
SoftLabel plain_label(const TrainConfig& c, int y) {
    if (c.labels == LabelMode::label_smoothing)
        return baseline_label({LabelMode::label_smoothing, c.rho}, y, c.data.classes);
    return one_hot(y, c.data.classes);
}

SoftLabel bucket_label(const TrainConfig& c, const LabelTable& table, const BucketKey& b, int y) {
    if (c.labels == LabelMode::autolabel) return soft_label(table, b, y);
    return plain_label(c, y);
}

SoftLabel blend(const SoftLabel& a, const SoftLabel& b, double w) {
    SoftLabel out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = w * a[k] + (1.0 - w) * b[k];
    return out;
}

struct Batch {
    std::vector<Image> images;
    std::vector<SoftLabel> targets;
};

// Builds one training batch. Each sample draws from its own (epoch, position)
// substream, so the batch does not depend on thread scheduling.
Batch make_batch(const TrainConfig& c, const Dataset& train, std::span<const std::size_t> rows, int epoch,
                 std::size_t first_position, const Model& model, const LabelTable& table, std::size_t& skips) {
    const std::size_t b = rows.size();
    Batch out;
    out.images.resize(b);
    out.targets.resize(b);
    std::vector<Rng> rngs;
    std::vector<char> clean(b, 0);
    rngs.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        rngs.push_back(Rng::derive(c.seed, Stream::train_aug,
                                   {static_cast<std::uint64_t>(epoch), first_position + i}));
        if (c.include_clean_fraction > 0.0) clean[i] = rngs[i].bernoulli(c.include_clean_fraction);
    }

    if (c.method == Method::adv_training) {
        std::vector<std::size_t> idx;
        std::vector<Image> src;
        std::vector<int> ys;
        std::vector<double> eps;
        std::vector<Rng> arngs;
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t r = rows[i];
            if (clean[i]) {
                out.images[i] = train.images[r];
                out.targets[i] = plain_label(c, train.labels[r]);
                continue;
            }
            idx.push_back(i);
            src.push_back(train.images[r]);
            ys.push_back(train.labels[r]);
            eps.push_back(sample_eps(rngs[i], c.attack.eps_max));
            arngs.push_back(rngs[i]);
        }
        if (idx.empty()) return out;
        auto res = pgd_attack_batch(model, src, ys, eps, c.attack, arngs);
        skips += res.skipped_count;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const std::size_t i = idx[j];
            const BucketKey bucket = adv_bucket(eps[j], c.attack.eps_max, c.n_buckets);
            if (c.labels == LabelMode::ccat) {
                const double delta = linf_distance(res.images[j], src[j]);
                out.targets[i] =
                    baseline_label({LabelMode::ccat, c.rho}, ys[j], c.data.classes, delta, c.attack.eps_max);
            } else {
                out.targets[i] = bucket_label(c, table, bucket, ys[j]);
            }
            out.images[i] = std::move(res.images[j]);
        }
        return out;
    }

    const auto n = static_cast<std::ptrdiff_t>(b);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < n; ++si) {
        const auto i = static_cast<std::size_t>(si);
        const std::size_t r = rows[i];
        const Image& x = train.images[r];
        const int y = train.labels[r];
        Rng& rng = rngs[i];
        if (clean[i] || c.method == Method::vanilla) {
            out.images[i] = x;
            out.targets[i] = plain_label(c, y);
            continue;
        }
        switch (c.method) {
        case Method::randaug: {
            auto s = sample_randaug(x, rng, c.m_max, c.ops);
            out.images[i] = std::move(s.image);
            out.targets[i] = bucket_label(c, table, s.bucket, y);
            break;
        }
        case Method::augmix: {
            auto s = augmix(x, rng, c.d_max, c.augmix_magnitude, c.n_buckets, c.ops);
            out.images[i] = std::move(s.image);
            out.targets[i] = bucket_label(c, table, s.bucket, y);
            break;
        }
        case Method::mixup: {
            const auto p = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(train.size()) - 1));
            const double gamma = rng.beta(c.mixup_beta, c.mixup_beta);
            const int yp = train.labels[p];
            auto s = mixup(x, train.images[p], y, yp, gamma, c.n_buckets);
            out.images[i] = std::move(s.image);
            if (c.labels == LabelMode::autolabel) {
                // The weight on the minor image is at most 0.5; its partner dominates.
                const bool self_dominant = gamma > 0.5;
                const double g = self_dominant ? 1.0 - gamma : gamma;
                out.targets[i] = self_dominant ? mixup_soft_label(table, s.bucket, yp, y, g)
                                               : mixup_soft_label(table, s.bucket, y, yp, g);
            } else {
                out.targets[i] = blend(plain_label(c, y), plain_label(c, yp), gamma);
            }
            break;
        }
        case Method::vanilla:
        case Method::adv_training: break;
        }
    }
    return out;
}

nlohmann::json report_json(const CalibrationReport& r) {
    nlohmann::json bins = nlohmann::json::array();
    for (std::size_t i = 0; i < r.bins.size(); ++i)
        bins.push_back({{"r", i + 1},
                        {"count", r.bins[i].count},
                        {"acc", r.bins[i].accuracy},
                        {"conf", r.bins[i].confidence}});
    return {{"ece", r.ece},         {"accuracy", r.accuracy}, {"mean_confidence", r.mean_confidence},
            {"bins", std::move(bins)}, {"R", r.num_bins},      {"m", r.count}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << text;
}

} // namespace

Splits prepare_data(const TrainConfig& config) {
    config.validate();
    Dataset all = load_dataset(config.data);
    if (config.val_size + config.test_size >= all.size())
        throw InvalidConfig("dataset of " + std::to_string(all.size()) + " samples is too small for the splits");
    const std::uint64_t data_seed = config.data.synthetic.seed;
    auto [rest, test] = split_train_val(all, config.test_size, data_seed);
    auto [train, val] = split_train_val(rest, config.val_size, data_seed + 1);
    train.name = all.name + ":train";
    val.name = all.name + ":val";
    test.name = all.name + ":test";
    return {std::move(train), std::move(val), std::move(test)};
}

double scheduled_lr(const TrainConfig& config, int epoch) {
    double lr = config.sgd.lr;
    if (!config.lr_decay) return lr;
    if (2 * epoch >= config.epochs) lr *= 0.1;
    if (4 * epoch >= 3 * config.epochs) lr *= 0.1;
    return lr;
}

std::vector<Prediction> predict(const Model& model, const Dataset& dataset) {
    std::vector<Prediction> out;
    out.reserve(dataset.size());
    const std::span<const Image> all(dataset.images);
    for (std::size_t s = 0; s < all.size(); s += kEvalChunk) {
        auto part = forward(model, all.subspan(s, std::min(kEvalChunk, all.size() - s)));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

CalibrationReport evaluate(const Model& model, const Dataset& dataset, int num_bins) {
    const auto preds = predict(model, dataset);
    return calibration_report(preds, dataset.labels, num_bins);
}

double evaluate_adversarial(const Model& model, const Dataset& dataset, const AttackConfig& attack,
                            std::uint64_t seed, std::size_t* skipped) {
    if (dataset.empty()) throw InvalidInput("adversarial evaluation of an empty dataset");
    if (skipped) *skipped = 0;
    if (attack.eps_max == 0.0) return evaluate(model, dataset).accuracy;
    attack.validate();
    std::size_t correct = 0;
    for (std::size_t s = 0; s < dataset.size(); s += kEvalChunk) {
        const std::size_t len = std::min(kEvalChunk, dataset.size() - s);
        std::vector<double> eps(len, attack.eps_max);
        std::vector<Rng> rngs;
        for (std::size_t i = 0; i < len; ++i) rngs.push_back(Rng::derive(seed, Stream::attack_eval, {s + i}));
        const auto res = pgd_attack_batch(model, std::span<const Image>(dataset.images).subspan(s, len),
                                          std::span<const int>(dataset.labels).subspan(s, len), eps, attack, rngs);
        if (skipped) *skipped += res.skipped_count;
        const auto preds = forward(model, std::span<const Image>(res.images));
        for (std::size_t i = 0; i < len; ++i)
            correct += preds[i].predicted_class == static_cast<std::size_t>(dataset.labels[s + i]);
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::vector<CorruptionCell> evaluate_corrupted(const Model& model, const Dataset& dataset, int num_bins,
                                               std::uint64_t seed) {
    std::vector<CorruptionCell> cells;
    for (const auto kind : kAllCorruptions)
        for (int sev = 1; sev <= kSeverities; ++sev) {
            const Dataset d = corrupt_dataset(dataset, {kind, sev}, seed);
            const auto rep = evaluate(model, d, num_bins);
            cells.push_back({kind, sev, rep.accuracy, rep.ece});
        }
    return cells;
}

RunResult run_training(const TrainConfig& config, const TrainingHooks& hooks) {
    const Splits data = prepare_data(config);
    return run_training(config, data, hooks);
}

RunResult run_training(const TrainConfig& config, const Splits& data, const TrainingHooks& hooks) {
    config.validate();
    if (data.train.empty() || data.val.empty() || data.test.empty()) throw InvalidInput("empty data split");
    if (data.train.classes != config.data.classes) throw InvalidConfig("dataset class count differs from config");

    RunResult result;
    RunReport& report = result.report;
    report.config_text = serialize_config(config);

    Rng init = Rng::derive(config.seed, Stream::init);
    result.model = Model(data.train.images.front().shape(), config.architecture(), init);
    Model& model = result.model;
    report.parameter_count = model.parameter_count();

    const auto buckets = config.buckets();
    if (!buckets.empty()) result.table = init_label_table(config.data.classes, buckets, config.alpha);
    LabelTable& table = result.table;

    ValidationConfig vcfg;
    vcfg.n_buckets = config.n_buckets;
    vcfg.augmix_magnitude = config.augmix_magnitude;
    vcfg.eps_max = config.attack.eps_max;
    vcfg.attack = config.attack;
    vcfg.subsample = config.val_subsample;
    vcfg.ops = config.ops;
    const Predictor predictor = hooks.validation_predictor ? hooks.validation_predictor : Predictor(predict);

    Sgd sgd(config.sgd);
    const std::size_t n = data.train.size();
    std::vector<std::size_t> order(n);

    for (int epoch = 0; epoch < config.epochs && !report.aborted; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = scheduled_lr(config, epoch);
        sgd.params().lr = rec.lr;

        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = Rng::derive(config.seed, Stream::shuffle, {static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i)))]);

        double loss_sum = 0.0;
        for (std::size_t s = 0; s < n; s += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, n - s);
            const auto rows = std::span<const std::size_t>(order).subspan(s, len);
            Batch batch = make_batch(config, data.train, rows, epoch, s, model, table, report.attack_skips);
            const Tensor x = stack<float>(batch.images);
            const auto g = gradients(model, x, batch.targets);
            if (!std::isfinite(g.mean_loss)) {
                report.aborted = true;
                report.abort_reason = "non-finite training loss in epoch " + std::to_string(epoch + 1);
                break;
            }
            try {
                sgd.step(model, g.grads);
            } catch (const NumericalError& e) {
                report.aborted = true;
                report.abort_reason = e.what();
                break;
            }
            loss_sum += g.mean_loss * static_cast<double>(len);
        }
        if (report.aborted) break;
        rec.train_loss = loss_sum / static_cast<double>(n);

        if (config.labels == LabelMode::autolabel) {
            std::uint64_t bi = 0;
            for (const auto& [bucket, value] : table.entries()) {
                Rng rng = Rng::derive(config.seed, Stream::validation, {static_cast<std::uint64_t>(epoch), bi++});
                const Dataset q = build_augmented_validation(data.val, bucket, rng, vcfg, &model);
                const auto preds = predictor(model, q);
                const auto rep = calibration_report(preds, q.labels, config.ece_bins);
                BucketEval be{bucket, rep.count, rep.ece, rep.accuracy, rep.mean_confidence, value, value};
                rec.buckets.push_back(be);
            }
            // Buckets are independent; apply after all measurements.
            for (auto& be : rec.buckets) be.label_after = table.update(be.bucket, be.ece, be.confidence, be.accuracy);
        }
        if (!table.entries().empty()) {
            table.advance_epoch();
            rec.labels = table.entries();
        }
        report.epochs.push_back(std::move(rec));
        if (hooks.on_epoch) hooks.on_epoch(report.epochs.back());
    }

    if (hooks.skip_evaluation || report.aborted) return result;

    report.clean = evaluate(model, data.test, config.ece_bins);
    const std::uint64_t suite_seed = splitmix64(config.data.synthetic.seed);
    if (config.eval_corruptions) {
        Dataset sub = data.test;
        if (config.corruption_subsample > 0 && config.corruption_subsample < sub.size()) {
            sub.images.resize(config.corruption_subsample);
            sub.labels.resize(config.corruption_subsample);
        }
        report.corruption_cells = evaluate_corrupted(model, sub, config.ece_bins, suite_seed);
        std::vector<CalibrationReport> reps;
        for (const auto& c : report.corruption_cells) {
            CalibrationReport r;
            r.accuracy = c.accuracy;
            r.ece = c.ece;
            reps.push_back(r);
        }
        report.corrupted = corrupted_aggregate(reps);
    }
    if (config.eval_adversarial) {
        Dataset sub = data.test;
        if (config.adversarial_subsample > 0 && config.adversarial_subsample < sub.size()) {
            sub.images.resize(config.adversarial_subsample);
            sub.labels.resize(config.adversarial_subsample);
        }
        AttackConfig a = config.evaluation_attack_config();
        if (config.eval_eps == 0.0) a.eps_max = 0.0;
        report.adversarial_accuracy = evaluate_adversarial(model, sub, a, suite_seed);
        if (config.baseline_clean >= 0.0)
            report.accuracy_difference =
                accuracy_difference(100.0 * report.clean.accuracy, 100.0 * *report.adversarial_accuracy,
                                    config.baseline_clean, config.baseline_adv);
    }
    return result;
}

std::string run_report_json(const RunReport& r) {
    nlohmann::json j;
    j["config"] = r.config_text;
    j["parameter_count"] = r.parameter_count;
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        nlohmann::json be = nlohmann::json::array();
        for (const auto& b : e.buckets)
            be.push_back({{"bucket", to_string(b.bucket)},
                          {"count", b.count},
                          {"ece", b.ece},
                          {"accuracy", b.accuracy},
                          {"confidence", b.confidence},
                          {"label_before", b.label_before},
                          {"label_after", b.label_after}});
        nlohmann::json labels = nlohmann::json::object();
        for (const auto& [k, v] : e.labels) labels[to_string(k)] = v;
        epochs.push_back({{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"train_loss", e.train_loss},
                          {"buckets", std::move(be)},
                          {"labels", std::move(labels)}});
    }
    j["epochs"] = std::move(epochs);
    j["clean"] = report_json(r.clean);
    if (r.corrupted) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : r.corruption_cells)
            cells.push_back({{"kind", to_string(c.kind)},
                             {"severity", c.severity},
                             {"accuracy", c.accuracy},
                             {"ece", c.ece}});
        j["corrupted"] = {{"accuracy", r.corrupted->accuracy}, {"ece", r.corrupted->ece}, {"cells", cells}};
    } else {
        j["corrupted"] = nullptr;
    }
    j["adversarial_accuracy"] = r.adversarial_accuracy ? nlohmann::json(*r.adversarial_accuracy) : nullptr;
    j["accuracy_difference"] = r.accuracy_difference ? nlohmann::json(*r.accuracy_difference) : nullptr;
    j["attack_skips"] = r.attack_skips;
    j["aborted"] = r.aborted;
    j["abort_reason"] = r.abort_reason;
    return j.dump(2) + "\n";
}

void write_artifacts(const RunResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const RunReport& r = result.report;
    write_file(dir / "run.json", run_report_json(r));

    std::ofstream metrics(dir / "metrics.csv");
    metrics.precision(17);
    metrics << "epoch,lr,train_loss,mean_bucket_ece,mean_label\n";
    for (const auto& e : r.epochs) {
        double ece = 0.0;
        for (const auto& b : e.buckets) ece += b.ece;
        if (!e.buckets.empty()) ece /= static_cast<double>(e.buckets.size());
        double label = 0.0;
        for (const auto& [k, v] : e.labels) label += v;
        if (!e.labels.empty()) label /= static_cast<double>(e.labels.size());
        metrics << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << ece << ',' << label << '\n';
    }

    std::ofstream labels(dir / "labels.csv");
    write_labels_csv_header(labels);
    if (!result.table.entries().empty()) {
        LabelTable initial = init_label_table(result.table.classes(), [&] {
            std::vector<BucketKey> keys;
            for (const auto& [k, v] : result.table.entries()) keys.push_back(k);
            return keys;
        }(), result.table.alpha());
        append_labels_csv(labels, initial);
        labels.precision(17);
        for (const auto& e : r.epochs)
            for (const auto& [k, v] : e.labels) {
                labels << e.epoch << ',' << to_string(k.family) << ',';
                if (k.family == Family::randaug)
                    labels << to_string(k.op());
                else
                    labels << k.coords[0];
                labels << ',' << k.coords[1] << ',' << v << '\n';
            }
    }

    write_bins_csv(r.clean, dir / "bins.csv");
    save_checkpoint(result.model, dir / "model.alnn");
}

std::vector<SweepRow> run_motivation_sweep(const TrainConfig& base, std::span<const int> magnitudes,
                                           std::span<const std::uint64_t> seeds, std::span<const LabelMode> modes,
                                           const std::function<void(const SweepRow&)>& progress) {
    TrainConfig cfg = base;
    cfg.method = Method::randaug;
    cfg.ops.assign(kMotivationOps.begin(), kMotivationOps.end());
    cfg.eval_corruptions = true;
    cfg.validate();
    const Splits data = prepare_data(cfg);
    std::vector<SweepRow> rows;
    for (const int m : magnitudes)
        for (const auto mode : modes)
            for (const auto seed : seeds) {
                cfg.m_max = m;
                cfg.labels = mode;
                cfg.seed = seed;
                const auto res = run_training(cfg, data);
                if (res.report.aborted) throw NumericalError("sweep run aborted: " + res.report.abort_reason);
                SweepRow row{m,
                             mode,
                             seed,
                             res.report.clean.accuracy,
                             res.report.clean.ece,
                             res.report.corrupted->accuracy,
                             res.report.corrupted->ece};
                rows.push_back(row);
                if (progress) progress(row);
            }
    return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out.precision(17);
    out << "max_magnitude,labels,seed,clean_accuracy,clean_ece,corrupted_accuracy,corrupted_ece\n";
    for (const auto& r : rows)
        out << r.magnitude << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.clean_accuracy << ','
            << r.clean_ece << ',' << r.corrupted_accuracy << ',' << r.corrupted_ece << '\n';
}

} // namespace autolabel

#include "autolabel/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "autolabel/error.hpp"

namespace autolabel {

namespace {

constexpr std::array<std::string_view, 5> kMethodNames = {"vanilla", "randaug", "augmix", "mixup", "adv_training"};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw InvalidConfig("invalid value '" + std::string(value) + "' for " + std::string(key) + ": expected " +
                        std::string(expected));
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a real number");
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

int to_int(std::string_view key, std::string_view v) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true or false");
}

std::string fmt(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (!v.empty()) {
        const auto c = v.find(',');
        out.push_back(trim(v.substr(0, c)));
        if (c == std::string_view::npos) break;
        v.remove_prefix(c + 1);
    }
    return out;
}

struct Field {
    std::string_view key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, std::string_view, std::string_view)> set;
};

#define AL_REAL(name, member)                                                                                  \
    Field {                                                                                                    \
        name, [](const TrainConfig& c) { return fmt(static_cast<double>(c.member)); },                         \
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = to_double(k, v); }         \
    }
#define AL_SIZE(name, member)                                                                                  \
    Field {                                                                                                    \
        name, [](const TrainConfig& c) { return fmt(static_cast<std::uint64_t>(c.member)); },                  \
            [](TrainConfig& c, std::string_view k, std::string_view v) {                                      \
                c.member = static_cast<decltype(c.member)>(to_u64(k, v));                                      \
            }                                                                                                  \
    }
#define AL_INT(name, member)                                                                                   \
    Field {                                                                                                    \
        name, [](const TrainConfig& c) { return fmt(c.member); },                                              \
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = to_int(k, v); }            \
    }
#define AL_BOOL(name, member)                                                                                  \
    Field {                                                                                                    \
        name, [](const TrainConfig& c) { return fmt(c.member); },                                              \
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = to_bool(k, v); }           \
    }
#define AL_PATH(name, member)                                                                                  \
    Field {                                                                                                    \
        name, [](const TrainConfig& c) { return c.member.string(); },                                          \
            [](TrainConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); }            \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"data.format", [](const TrainConfig& c) { return std::string(to_string(c.data.format)); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  const auto f = parse_data_format(v);
                  if (!f) bad_value(k, v, "idx, cifar_binary or synthetic");
                  c.data.format = *f;
              }},
        AL_PATH("data.path", data.path),
        AL_PATH("data.labels_path", data.labels_path),
        Field{"data.classes", [](const TrainConfig& c) { return fmt(static_cast<std::uint64_t>(c.data.classes)); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  c.data.classes = static_cast<std::size_t>(to_u64(k, v));
                  c.data.synthetic.classes = c.data.classes;
              }},
        AL_SIZE("data.val_size", val_size),
        AL_SIZE("data.test_size", test_size),
        AL_SIZE("synthetic.count", data.synthetic.count),
        AL_SIZE("synthetic.seed", data.synthetic.seed),
        AL_SIZE("synthetic.size", data.synthetic.size),
        AL_SIZE("synthetic.channels", data.synthetic.channels),
        AL_SIZE("synthetic.orientations", data.synthetic.orientations),
        AL_REAL("synthetic.base_frequency", data.synthetic.base_frequency),
        AL_REAL("synthetic.frequency_ratio", data.synthetic.frequency_ratio),
        AL_REAL("synthetic.orientation_jitter", data.synthetic.orientation_jitter),
        AL_REAL("synthetic.frequency_jitter", data.synthetic.frequency_jitter),
        AL_REAL("synthetic.amplitude_min", data.synthetic.amplitude_min),
        AL_REAL("synthetic.amplitude_max", data.synthetic.amplitude_max),
        AL_REAL("synthetic.noise", data.synthetic.noise),
        Field{"method.augmentation", [](const TrainConfig& c) { return std::string(to_string(c.method)); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  const auto m = parse_method(v);
                  if (!m) bad_value(k, v, "vanilla, randaug, augmix, mixup or adv_training");
                  c.method = *m;
              }},
        Field{"method.labels", [](const TrainConfig& c) { return std::string(to_string(c.labels)); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  const auto m = parse_label_mode(v);
                  if (!m) bad_value(k, v, "one_hot, label_smoothing, ccat or autolabel");
                  c.labels = *m;
              }},
        AL_REAL("autolabel.alpha", alpha),
        Field{"autolabel.buckets", [](const TrainConfig& c) { return fmt(c.n_buckets); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  c.n_buckets = to_int(k, v);
                  c.attack.n_buckets = c.n_buckets;
              }},
        AL_REAL("labels.rho", rho),
        AL_INT("randaug.m_max", m_max),
        Field{"randaug.ops",
              [](const TrainConfig& c) {
                  std::string s;
                  for (const auto op : c.ops) {
                      if (!s.empty()) s += ',';
                      s += to_string(op);
                  }
                  return s;
              },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  if (v == "all") {
                      c.ops.assign(kAllOps.begin(), kAllOps.end());
                      return;
                  }
                  if (v == "motivation") {
                      c.ops.assign(kMotivationOps.begin(), kMotivationOps.end());
                      return;
                  }
                  c.ops.clear();
                  for (const auto name : split_list(v)) {
                      const auto op = parse_op(name);
                      if (!op) bad_value(k, name, "a RandAug op name");
                      c.ops.push_back(*op);
                  }
              }},
        AL_INT("augmix.d_max", d_max),
        AL_INT("augmix.magnitude", augmix_magnitude),
        AL_REAL("mixup.beta", mixup_beta),
        AL_REAL("attack.eps_max", attack.eps_max),
        AL_INT("attack.iterations", attack.iterations),
        AL_REAL("attack.step_divisor", attack.step_divisor),
        AL_INT("attack.restarts", attack.restarts),
        Field{"model.arch",
              [](const TrainConfig& c) { return std::string(c.arch == Architecture::mlp ? "mlp" : "convnet"); },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  if (v == "mlp")
                      c.arch = Architecture::mlp;
                  else if (v == "convnet")
                      c.arch = Architecture::convnet;
                  else
                      bad_value(k, v, "mlp or convnet");
              }},
        Field{"model.hidden",
              [](const TrainConfig& c) {
                  std::string s;
                  for (const auto h : c.hidden) {
                      if (!s.empty()) s += ',';
                      s += std::to_string(h);
                  }
                  return s;
              },
              [](TrainConfig& c, std::string_view k, std::string_view v) {
                  c.hidden.clear();
                  for (const auto item : split_list(v)) c.hidden.push_back(static_cast<std::size_t>(to_u64(k, item)));
              }},
        AL_SIZE("model.conv1", conv1),
        AL_SIZE("model.conv2", conv2),
        AL_SIZE("model.dense", conv_dense),
        AL_INT("train.epochs", epochs),
        AL_SIZE("train.batch_size", batch_size),
        AL_REAL("train.lr", sgd.lr),
        AL_REAL("train.momentum", sgd.momentum),
        AL_REAL("train.weight_decay", sgd.weight_decay),
        AL_BOOL("train.lr_decay", lr_decay),
        AL_REAL("train.include_clean_fraction", include_clean_fraction),
        AL_INT("validation.ece_bins", ece_bins),
        AL_SIZE("validation.subsample", val_subsample),
        AL_BOOL("eval.corruptions", eval_corruptions),
        AL_SIZE("eval.corruption_subsample", corruption_subsample),
        AL_BOOL("eval.adversarial", eval_adversarial),
        AL_REAL("eval.eps", eval_eps),
        AL_INT("eval.iterations", eval_iterations),
        AL_INT("eval.restarts", eval_restarts),
        AL_SIZE("eval.adversarial_subsample", adversarial_subsample),
        AL_REAL("eval.baseline_clean", baseline_clean),
        AL_REAL("eval.baseline_adv", baseline_adv),
        AL_SIZE("seed", seed),
        AL_PATH("output.dir", output_dir),
    };
    return table;
}

#undef AL_REAL
#undef AL_SIZE
#undef AL_INT
#undef AL_BOOL
#undef AL_PATH

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidConfig(what);
}

} // namespace

std::string_view to_string(Method m) { return kMethodNames.at(static_cast<std::size_t>(m)); }

std::optional<Method> parse_method(std::string_view name) {
    if (name == "adversarial") return Method::adv_training;
    for (std::size_t i = 0; i < kMethodNames.size(); ++i)
        if (kMethodNames[i] == name) return static_cast<Method>(i);
    return std::nullopt;
}

void TrainConfig::validate() const {
    require(data.classes >= 2, "data.classes must be at least 2");
    require(data.format != DataFormat::synthetic || data.synthetic.classes == data.classes,
            "synthetic class count must equal data.classes");
    require(data.format == DataFormat::synthetic || !data.path.empty(), "data.path is required for file formats");
    require(data.format != DataFormat::idx || !data.labels_path.empty(), "data.labels_path is required for idx");
    require(val_size > 0 && test_size > 0, "data.val_size and data.test_size must be positive");
    require(data.format != DataFormat::synthetic || data.synthetic.count > val_size + test_size,
            "synthetic.count must exceed data.val_size + data.test_size");

    require(!(method == Method::vanilla && labels == LabelMode::autolabel),
            "autolabel needs an augmentation family; method.augmentation is vanilla");
    require(labels != LabelMode::ccat || method == Method::adv_training, "ccat labels need adv_training");
    require(std::isfinite(alpha) && alpha >= 0.0, "autolabel.alpha must be finite and non-negative");
    require(n_buckets >= 1, "autolabel.buckets must be at least 1");
    require(rho >= 0.0 && std::isfinite(rho), "labels.rho must be non-negative");
    require(labels != LabelMode::label_smoothing || rho <= 1.0, "label smoothing rho must be at most 1");

    require(m_max >= 1 && m_max <= kMaxMagnitude, "randaug.m_max must lie in 1..10");
    require(!ops.empty(), "randaug.ops must not be empty");
    require(d_max >= 1, "augmix.d_max must be at least 1");
    require(augmix_magnitude >= 0 && augmix_magnitude <= kMaxMagnitude, "augmix.magnitude must lie in 0..10");
    require(mixup_beta > 0.0, "mixup.beta must be positive");
    if (method == Method::adv_training) attack.validate();

    require(arch != Architecture::mlp || !hidden.empty(), "model.hidden must list at least one width");
    for (const auto h : hidden) require(h > 0, "model.hidden widths must be positive");
    require(conv1 > 0 && conv2 > 0 && conv_dense > 0, "conv widths must be positive");

    require(epochs >= 1, "train.epochs must be at least 1");
    require(batch_size >= 1, "train.batch_size must be at least 1");
    require(sgd.lr >= 0.0 && std::isfinite(sgd.lr), "train.lr must be non-negative");
    require(sgd.momentum >= 0.0 && sgd.momentum < 1.0, "train.momentum must lie in [0, 1)");
    require(sgd.weight_decay >= 0.0, "train.weight_decay must be non-negative");
    require(include_clean_fraction >= 0.0 && include_clean_fraction <= 1.0,
            "train.include_clean_fraction must lie in [0, 1]");

    require(ece_bins >= 1, "validation.ece_bins must be at least 1");
    require(eval_eps >= 0.0 && eval_eps <= 1.0, "eval.eps must lie in [0, 1]");
    require(eval_iterations >= 1 && eval_restarts >= 1, "eval.iterations and eval.restarts must be at least 1");
    require((baseline_clean < 0.0) == (baseline_adv < 0.0),
            "eval.baseline_clean and eval.baseline_adv must be set together");
}

std::optional<Family> TrainConfig::family() const {
    switch (method) {
    case Method::vanilla: return std::nullopt;
    case Method::randaug: return Family::randaug;
    case Method::augmix: return Family::augmix;
    case Method::mixup: return Family::mixup;
    case Method::adv_training: return Family::adversarial;
    }
    return std::nullopt;
}

std::vector<BucketKey> TrainConfig::buckets() const {
    switch (method) {
    case Method::vanilla: return {};
    case Method::randaug: return randaug_buckets(ops, m_max);
    case Method::augmix: return augmix_buckets(d_max, n_buckets);
    case Method::mixup: return mixup_buckets(n_buckets);
    case Method::adv_training: return adversarial_buckets(n_buckets);
    }
    return {};
}

std::vector<LayerSpec> TrainConfig::architecture() const {
    if (arch == Architecture::mlp) return mlp_architecture(hidden, data.classes);
    return convnet_architecture(conv1, conv2, conv_dense, data.classes);
}

AttackConfig TrainConfig::evaluation_attack_config() const {
    AttackConfig a = evaluation_attack(eval_eps > 0.0 ? eval_eps : 1.0);
    a.iterations = eval_iterations;
    a.restarts = eval_restarts;
    a.n_buckets = n_buckets;
    return a;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(config, key, value);
            return;
        }
    throw InvalidConfig("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, std::string_view origin) {
    TrainConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) throw InvalidConfig(where + "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            set_config_value(c, key, value);
        } catch (const InvalidConfig& e) {
            throw InvalidConfig(where + e.what());
        }
    }
    return c;
}

std::string serialize_config(const TrainConfig& config) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

void apply_env_overrides(TrainConfig& config) {
    if (const char* s = std::getenv("AUTOLABEL_SEED"); s != nullptr && *s != '\0')
        config.seed = to_u64("AUTOLABEL_SEED", trim(s));
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    TrainConfig c = parse_config(ss.str(), path.string());
    apply_env_overrides(c);
    c.validate();
    return c;
}

} // namespace autolabel

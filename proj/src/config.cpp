#include "xmal/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "xmal/error.hpp"
#include "xmal/numfmt.hpp"

namespace xmal {

std::string_view to_string(AcquisitionMode m) {
    switch (m) {
        case AcquisitionMode::Entropy: return "entropy";
        case AcquisitionMode::Random: return "random";
        case AcquisitionMode::None: return "none";
    }
    return "entropy";
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(value) +
                      "' (expected " + std::string(expected) + ")");
}

double to_real(std::string_view key, std::string_view v) {
    try {
        return parse_double(v, key);
    } catch (const DataError&) {
        bad_value(key, v, "a number");
    }
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    long long x = 0;
    try {
        x = parse_int(v, key);
    } catch (const DataError&) {
        bad_value(key, v, "a non-negative integer");
    }
    if (x < 0) bad_value(key, v, "a non-negative integer");
    return static_cast<std::uint64_t>(x);
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "true/false");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool hashed = true;
};

#define XMAL_REAL(KEY, MEMBER)                                                                \
    Field {                                                                                   \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_real(KEY, v); },     \
            [](const ExperimentConfig& c) { return format_double(c.MEMBER); }                 \
    }
#define XMAL_SIZE(KEY, MEMBER)                                                                \
    Field {                                                                                   \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_size(KEY, v); },     \
            [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                \
    }
#define XMAL_U64(KEY, MEMBER)                                                                 \
    Field {                                                                                   \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_u64(KEY, v); },      \
            [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                \
    }
#define XMAL_BOOL(KEY, MEMBER)                                                                \
    Field {                                                                                   \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_bool(KEY, v); },     \
            [](const ExperimentConfig& c) { return from_bool(c.MEMBER); }                     \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"data.source",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "synthetic") c.source = DataSource::Synthetic;
             else if (v == "file") c.source = DataSource::File;
             else bad_value("data.source", v, "synthetic|file");
         },
         [](const ExperimentConfig& c) { return std::string(c.source == DataSource::File ? "file" : "synthetic"); }},
        {"data.path", [](ExperimentConfig& c, std::string_view v) { c.data_path = std::string(v); },
         [](const ExperimentConfig& c) { return c.data_path; }},
        XMAL_SIZE("data.num_classes", schema.num_classes),
        {"data.valence_threshold",
         [](ExperimentConfig& c, std::string_view v) {
             if (v.empty() || v == "none") c.schema.valence_threshold.reset();
             else c.schema.valence_threshold = to_real("data.valence_threshold", v);
         },
         [](const ExperimentConfig& c) {
             return c.schema.valence_threshold ? format_double(*c.schema.valence_threshold) : std::string("none");
         }},
        XMAL_BOOL("data.use_file_split", use_file_split),
        XMAL_SIZE("synth.n_samples", synth.n_samples),
        XMAL_SIZE("synth.eeg_dim", synth.eeg_dim),
        XMAL_SIZE("synth.face_dim", synth.face_dim),
        XMAL_SIZE("synth.num_classes", synth.num_classes),
        XMAL_REAL("synth.margin", synth.margin),
        XMAL_REAL("synth.eeg_noise", synth.eeg_noise),
        XMAL_REAL("synth.face_noise", synth.face_noise),
        XMAL_REAL("synth.inconsistency_rate", synth.inconsistency_rate),
        XMAL_REAL("synth.label_noise", synth.label_noise),
        XMAL_U64("synth.seed", synth.seed),
        XMAL_REAL("split.labeled", fractions.labeled),
        XMAL_REAL("split.unlabeled", fractions.unlabeled),
        XMAL_REAL("split.test", fractions.test),
        XMAL_U64("split.seed", split_seed),
        {"model.hidden",
         [](ExperimentConfig& c, std::string_view v) {
             c.hidden.clear();
             std::string s(v);
             if (s == "none" || s.empty()) return;
             std::istringstream ss(s);
             std::string tok;
             while (std::getline(ss, tok, ',')) c.hidden.push_back(to_size("model.hidden", trim(tok)));
         },
         [](const ExperimentConfig& c) {
             if (c.hidden.empty()) return std::string("none");
             std::string out;
             for (std::size_t i = 0; i < c.hidden.size(); ++i) out += (i ? "," : "") + std::to_string(c.hidden[i]);
             return out;
         }},
        XMAL_SIZE("model.embedding_dim", embedding_dim),
        XMAL_U64("model.seed", model_seed),
        XMAL_REAL("loss.sim_weight", objective.weights.similarity),
        XMAL_REAL("loss.rel_weight", objective.weights.reliability),
        XMAL_REAL("loss.task_weight", objective.weights.task),
        XMAL_REAL("loss.temperature", objective.temperature),
        XMAL_REAL("loss.rel_epsilon", objective.reliability_epsilon),
        XMAL_REAL("optim.lr", optimizer.lr),
        XMAL_REAL("optim.beta1", optimizer.beta1),
        XMAL_REAL("optim.beta2", optimizer.beta2),
        XMAL_REAL("optim.epsilon", optimizer.epsilon),
        XMAL_SIZE("train.batch_size", batch_size),
        XMAL_SIZE("train.epochs", epochs),
        XMAL_BOOL("train.warm_start", warm_start),
        XMAL_U64("train.seed", train_seed),
        {"acquisition.mode",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "entropy") c.mode = AcquisitionMode::Entropy;
             else if (v == "random") c.mode = AcquisitionMode::Random;
             else if (v == "none") c.mode = AcquisitionMode::None;
             else bad_value("acquisition.mode", v, "entropy|random|none");
         },
         [](const ExperimentConfig& c) { return std::string(to_string(c.mode)); }},
        XMAL_REAL("acquisition.ratio_percent", ratio_percent),
        {"acquisition.count_mode",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "fixed") c.count_mode = CountMode::Fixed;
             else if (v == "ratio") c.count_mode = CountMode::Ratio;
             else bad_value("acquisition.count_mode", v, "fixed|ratio");
         },
         [](const ExperimentConfig& c) { return std::string(c.count_mode == CountMode::Fixed ? "fixed" : "ratio"); }},
        XMAL_BOOL("acquisition.reliability_weighted", reliability_weighted),
        XMAL_REAL("acquisition.budget_percent", budget_percent),
        {"oracle.kind",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "simulated") c.oracle.kind = OracleKind::Simulated;
             else if (v == "remote") c.oracle.kind = OracleKind::Remote;
             else bad_value("oracle.kind", v, "simulated|remote");
         },
         [](const ExperimentConfig& c) {
             return std::string(c.oracle.kind == OracleKind::Simulated ? "simulated" : "remote");
         }},
        XMAL_REAL("oracle.noise_rate", oracle.noise_rate),
        XMAL_U64("oracle.seed", oracle.seed),
        XMAL_REAL("oracle.timeout_seconds", oracle.timeout_seconds),
        {"run.label", [](ExperimentConfig& c, std::string_view v) { c.label = std::string(v); },
         [](const ExperimentConfig& c) { return c.label; }},
        {"output.dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
         [](const ExperimentConfig& c) { return c.output_dir; }, false},
        {"service.bind", [](ExperimentConfig& c, std::string_view v) { c.service.bind = std::string(v); },
         [](const ExperimentConfig& c) { return c.service.bind; }, false},
        {"service.port",
         [](ExperimentConfig& c, std::string_view v) { c.service.port = static_cast<int>(to_u64("service.port", v)); },
         [](const ExperimentConfig& c) { return std::to_string(c.service.port); }, false},
        {"service.cors_origin",
         [](ExperimentConfig& c, std::string_view v) { c.service.cors_origin = std::string(v); },
         [](const ExperimentConfig& c) { return c.service.cors_origin; }, false},
    };
    return table;
}

#undef XMAL_REAL
#undef XMAL_SIZE
#undef XMAL_U64
#undef XMAL_BOOL

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        k.push_back("seed");
        return k;
    }();
    return keys;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    if (key == "seed") {
        const auto s = to_u64("seed", v);
        synth.seed = split_seed = model_seed = train_seed = oracle.seed = s;
        return;
    }
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(*this, v);
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

std::string ExperimentConfig::hash() const {
    std::string text;
    for (const auto& f : fields())
        if (f.hashed) text += f.key + "=" + f.get(*this) + "\n";
    return hex64(fnv1a(text));
}

std::size_t ExperimentConfig::num_classes() const {
    return source == DataSource::Synthetic ? synth.num_classes : schema.num_classes;
}

std::string ExperimentConfig::method_label() const {
    return label.empty() ? std::string(to_string(mode)) : label;
}

void ExperimentConfig::validate() const {
    if (source == DataSource::Synthetic) synth.validate();
    if (source == DataSource::File && data_path.empty()) throw ConfigError("data.path is required for data.source = file");
    if (schema.num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
    if (!use_file_split || source == DataSource::Synthetic) {
        const double total = fractions.labeled + fractions.unlabeled + fractions.test;
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
        if (budget_percent + 1e-9 < fractions.labeled * 100.0) {
            throw ConfigError("acquisition.budget_percent must be >= the initial labeled fraction");
        }
    }
    if (embedding_dim == 0) throw ConfigError("model.embedding_dim must be >= 1");
    for (auto w : hidden)
        if (w == 0) throw ConfigError("model.hidden widths must be >= 1");
    objective.weights.validate();
    if (!(objective.temperature > 0.0)) throw ConfigError("loss.temperature must be > 0");
    if (!(objective.reliability_epsilon > 0.0)) throw ConfigError("loss.rel_epsilon must be > 0");
    if (!(optimizer.lr > 0.0)) throw ConfigError("optim.lr must be > 0");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
        throw ConfigError("optim.beta1/beta2 must lie in [0, 1)");
    }
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2 (alignment losses need pairs)");
    if (!(ratio_percent > 0.0 && ratio_percent <= 100.0)) {
        throw ConfigError("acquisition.ratio_percent must lie in (0, 100]");
    }
    if (!(budget_percent > 0.0 && budget_percent <= 100.0)) {
        throw ConfigError("acquisition.budget_percent must lie in (0, 100]");
    }
    if (!(oracle.noise_rate >= 0.0 && oracle.noise_rate < 1.0)) throw ConfigError("oracle.noise_rate must lie in [0, 1)");
    if (!(oracle.timeout_seconds > 0.0)) throw ConfigError("oracle.timeout_seconds must be > 0");
    if (service.port < 0 || service.port > 65535) throw ConfigError("service.port out of range");
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            cfg.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in);
}

}  // namespace xmal

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "xmal/adam.hpp"
#include "xmal/consistency.hpp"
#include "xmal/data.hpp"

namespace xmal {

enum class DataSource { Synthetic, File };
enum class AcquisitionMode { Entropy, Random, None };
/// Fixed: k = ratio x universe per iteration. Ratio: k = ratio x current |D_U|.
enum class CountMode { Fixed, Ratio };
enum class OracleKind { Simulated, Remote };

std::string_view to_string(AcquisitionMode m);

struct OracleSettings {
    OracleKind kind = OracleKind::Simulated;
    double noise_rate = 0.0;
    std::uint64_t seed = 1;
    double timeout_seconds = 600.0;
    friend bool operator==(const OracleSettings&, const OracleSettings&) = default;
};

struct ServiceSettings {
    std::string bind = "127.0.0.1";
    int port = 8080;
    std::string cors_origin = "*";
    friend bool operator==(const ServiceSettings&, const ServiceSettings&) = default;
};

/// Everything that determines an experiment. Text form is one `key = value`
/// per line (`#` starts a comment); see `config_keys()` for the key list.
struct ExperimentConfig {
    DataSource source = DataSource::Synthetic;
    SynthConfig synth;
    std::string data_path;
    IngestSchema schema;
    bool use_file_split = false;

    SplitFractions fractions;
    std::uint64_t split_seed = 1;

    std::vector<std::size_t> hidden{32};
    std::size_t embedding_dim = 16;
    std::uint64_t model_seed = 1;

    ObjectiveOptions objective;
    AdamHyper optimizer;

    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    bool warm_start = true;
    std::uint64_t train_seed = 1;

    AcquisitionMode mode = AcquisitionMode::Entropy;
    double ratio_percent = 5.0;
    CountMode count_mode = CountMode::Fixed;
    /// Extension: rank by entropy x (1 - r_eeg) instead of entropy alone.
    bool reliability_weighted = false;
    double budget_percent = 100.0;

    OracleSettings oracle;

    std::string output_dir;
    /// Method name used to group runs in reports; defaults to the mode name.
    std::string label;

    ServiceSettings service;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
    std::string method_label() const;
    std::size_t num_classes() const;

    /// Applies one `key = value` assignment; throws ConfigError on unknown keys
    /// or malformed values. `seed` sets every seed at once.
    void set(std::string_view key, std::string_view value);

    /// Canonical text: every key in fixed order.
    std::string to_text() const;
    /// FNV-1a of the canonical text, excluding output and service settings.
    std::string hash() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

const std::vector<std::string>& config_keys();

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t v);

}  // namespace xmal

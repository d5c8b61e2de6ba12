#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "xmal/adam.hpp"
#include "xmal/config.hpp"
#include "xmal/consistency.hpp"
#include "xmal/data.hpp"
#include "xmal/metrics.hpp"
#include "xmal/model.hpp"
#include "xmal/oracle.hpp"
#include "xmal/pool.hpp"

namespace xmal {

class AnnotationHub;

struct TrainSettings {
    ObjectiveOptions objective;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
};

struct LossSummary {
    std::vector<double> epoch_total;  ///< mean total loss per epoch
    double mean_similarity = 0.0;     ///< means over all steps
    double mean_reliability = 0.0;
    double mean_task = 0.0;
    double mean_total = 0.0;
    std::size_t steps = 0;
};

/// `epochs` passes over shuffled mini-batches of `labeled`, one Adam step per
/// batch on the total objective. A trailing batch of one sample is dropped.
/// Throws ConfigError if fewer labeled samples than `batch_size` exist.
LossSummary train_iteration(ModelParams& params, AdamState& adam, const Dataset& data,
                            const LabelMap& labeled, const TrainSettings& settings, std::mt19937_64& rng);

/// Arg-max class per row (lowest index wins ties), from EEG features only.
std::vector<int> predict_classes(const ModelParams& params, const Tensor& x_eeg);

/// Top-1 accuracy over `ids`, using EEG features only.
double evaluate_accuracy(const ModelParams& params, const Dataset& data, const std::set<SampleId>& ids);

/// Entropy of the predicted class distribution for every id.
std::map<SampleId, double> entropy_scores(const ModelParams& params, const Dataset& data,
                                          const std::set<SampleId>& ids);

/// Loads or generates the dataset a configuration refers to.
Dataset load_dataset(const ExperimentConfig& cfg);

enum class RunStatus { Running, Finished, Paused };

/// One active-learning experiment: owns the pool, the parameters, the optimizer
/// state and the metrics log. Single-threaded; with an AnnotationHub attached
/// it publishes snapshots at iteration boundaries and queries a human.
class Experiment {
public:
    Experiment(ExperimentConfig cfg, Dataset data);

    /// Restores a run from a run-state document. Throws ConfigError when the
    /// stored config hash is inconsistent or differs from `expected`'s, and
    /// DataError when `data` is not the dataset the run started with.
    static Experiment resume(const std::string& state_json, Dataset data,
                             const ExperimentConfig* expected = nullptr);
    static Experiment resume_file(const std::filesystem::path& state, const ExperimentConfig* expected = nullptr);

    /// Routes queries through `hub` (remote oracle) and publishes snapshots to it.
    void attach_hub(AnnotationHub* hub);

    /// Train, evaluate, score and (unless the budget is met) acquire once.
    RunStatus step();
    /// Steps until finished, paused, or `max_iterations` further iterations ran.
    RunStatus run(std::optional<std::size_t> max_iterations = std::nullopt);

    bool finished() const noexcept { return finished_; }
    const ExperimentConfig& config() const noexcept { return cfg_; }
    const Dataset& data() const noexcept { return data_; }
    const SamplePool& pool() const noexcept { return pool_; }
    const ModelParams& params() const noexcept { return params_; }
    const AdamState& optimizer() const noexcept { return adam_; }
    const MetricsLog& log() const noexcept { return log_; }
    std::size_t next_iteration() const noexcept { return iteration_; }
    /// Number of labels the run stops at.
    std::size_t target_labeled() const;

    std::string state_json() const;
    /// Writes metrics.json, model.ckpt, state.json (and audit.csv with a hub)
    /// into the configured output directory; no-op without one.
    void write_outputs() const;

private:
    Experiment() = default;
    void init_model();
    std::size_t acquisition_size() const;
    std::vector<SampleId> choose(const std::map<SampleId, double>& scores, std::size_t k);
    Annotation ask_oracle(const std::vector<SampleId>& ids, const std::map<SampleId, double>& scores);
    std::chrono::milliseconds remote_timeout() const;
    void publish() const;
    void dump_crash_state() const;

    ExperimentConfig cfg_;
    Dataset data_;
    std::string data_hash_;
    SamplePool pool_;
    ModelParams params_;
    AdamState adam_;
    std::mt19937_64 rng_;
    MetricsLog log_;
    std::size_t iteration_ = 0;
    bool finished_ = false;
    bool paused_ = false;
    bool topped_up_ = false;
    std::unique_ptr<SimulatedOracle> simulated_;
    AnnotationHub* hub_ = nullptr;
};

/// Runs a full experiment with a simulated oracle and returns its log.
MetricsLog run_experiment(const ExperimentConfig& cfg);

/// FNV-1a of the dataset's feature-file text.
std::string dataset_hash(const Dataset& data);

}  // namespace xmal

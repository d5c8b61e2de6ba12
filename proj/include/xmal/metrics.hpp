#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xmal {

/// Fixed-width histogram of entropies over [0, ln C].
struct UncertaintyHistogram {
    static constexpr std::size_t kBins = 20;
    std::vector<std::size_t> counts = std::vector<std::size_t>(kBins, 0);

    static UncertaintyHistogram of(std::span<const double> entropies, std::size_t num_classes);
    std::size_t total() const;
    /// Share of samples in the lowest `bins` bins (bins 0..4 cover [0, ln C / 4)).
    double fraction_below(std::size_t bins) const;

    friend bool operator==(const UncertaintyHistogram&, const UncertaintyHistogram&) = default;
};

/// Mean of the top ceil(fraction * n) values; nullopt for an empty input.
std::optional<double> top_fraction_mean(std::span<const double> values, double fraction = 0.05);

struct IterationMetrics {
    std::size_t iteration = 0;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    double labeled_fraction = 0.0;  ///< |D_L| / dataset size
    double test_accuracy = 0.0;
    double loss_similarity = 0.0;  ///< means over every optimizer step of the iteration
    double loss_reliability = 0.0;
    double loss_task = 0.0;
    double loss_total = 0.0;
    double first_epoch_loss = 0.0;  ///< mean total loss of the first / last epoch
    double last_epoch_loss = 0.0;
    UncertaintyHistogram histogram_pre;   ///< D_U before this iteration's training
    UncertaintyHistogram histogram_post;  ///< D_U after training (used for querying)
    std::optional<double> top5_mean_pre;
    std::optional<double> top5_mean_post;
    std::size_t acquired = 0;  ///< samples moved into D_L at the end of the iteration
    bool warm_start = true;
    double wall_clock_seconds = 0.0;

    /// Equality on everything except wall-clock time.
    bool same_outcome(const IterationMetrics& other) const;
};

struct MetricsLog {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t num_classes = 2;
    std::size_t universe = 0;   ///< dataset size
    std::size_t trainable = 0;  ///< |D_L| + |D_U|
    std::vector<IterationMetrics> iterations;

    bool same_outcome(const MetricsLog& other) const;

    std::string to_json() const;
    static MetricsLog from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static MetricsLog load(const std::filesystem::path& path);
};

}  // namespace xmal

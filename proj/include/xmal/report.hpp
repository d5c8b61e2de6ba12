#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmal/metrics.hpp"

namespace xmal {

/// Budget grid of the label-efficiency table, in percent of the dataset.
inline const std::vector<double> kDefaultBudgets{10, 30, 50, 70, 100};

/// Labeled count a run reaches at `budget_percent`: round(b% x universe),
/// capped at the trainable pool (so 100% means "D_U exhausted").
std::size_t budget_target(const MetricsLog& log, double budget_percent);

/// Test accuracy of the iteration trained at exactly the budget's labeled count.
std::optional<double> accuracy_at_budget(const MetricsLog& log, double budget_percent);

/// Trapezoidal area under accuracy vs labeled fraction.
double accuracy_auc(const MetricsLog& log);

/// Kendall tau-a of `values` against their index order, O(n log n) via
/// inversion counting. Tied values count as neither concordant nor discordant.
double kendall_tau(std::span<const double> values);

struct BudgetTable {
    std::vector<double> budgets;
    std::vector<std::string> methods;  ///< first-seen order
    /// cells[b][m]: mean accuracy over the method's runs; nullopt when blank.
    std::vector<std::vector<std::optional<double>>> cells;
    /// With exactly two methods: mean paired (same seed) difference second - first.
    std::vector<std::optional<double>> deltas;

    std::string to_csv() const;
};

struct Report {
    BudgetTable table;
    std::string histogram_csv;  ///< method,seed,iteration,phase,bin,lower,upper,count
    std::string top5_csv;       ///< method,seed,iteration,labeled_fraction,top5_mean_pre,top5_mean_post
    std::string trend_csv;      ///< method,seed,kendall_tau,decreasing
    std::vector<std::string> warnings;
};

Report build_report(std::span<const MetricsLog> logs, const std::vector<double>& budgets = kDefaultBudgets);

/// Writes budget_table.csv, uncertainty_histograms.csv, top5_series.csv and
/// top5_trend.csv into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace xmal

#include "xmal/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "xmal/error.hpp"
#include "xmal/numfmt.hpp"

namespace xmal {

std::size_t budget_target(const MetricsLog& log, double budget_percent) {
    const auto want = static_cast<std::size_t>(
        std::llround(budget_percent / 100.0 * static_cast<double>(log.universe)));
    return std::min(want, log.trainable);
}

std::optional<double> accuracy_at_budget(const MetricsLog& log, double budget_percent) {
    const auto target = budget_target(log, budget_percent);
    for (const auto& it : log.iterations)
        if (it.labeled == target) return it.test_accuracy;
    return std::nullopt;
}

double accuracy_auc(const MetricsLog& log) {
    double area = 0.0;
    for (std::size_t i = 1; i < log.iterations.size(); ++i) {
        const auto& a = log.iterations[i - 1];
        const auto& b = log.iterations[i];
        area += 0.5 * (a.test_accuracy + b.test_accuracy) * (b.labeled_fraction - a.labeled_fraction);
    }
    return area;
}

namespace {

// Sorts `v` and returns the number of pairs i < j with v[i] > v[j].
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                               std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;
            scratch[k++] = v[j++];
        } else {
            scratch[k++] = v[i++];
        }
    }
    while (i < mid) scratch[k++] = v[i++];
    while (j < hi) scratch[k++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace

double kendall_tau(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    std::vector<double> v(values.begin(), values.end());
    std::vector<double> scratch(n);
    const std::uint64_t discordant = count_inversions(v, scratch, 0, n);
    std::uint64_t tied = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && v[j] == v[i]) ++j;
        const std::uint64_t run = j - i;
        tied += run * (run - 1) / 2;
        i = j;
    }
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t concordant = pairs - discordant - tied;
    return (static_cast<double>(concordant) - static_cast<double>(discordant)) / static_cast<double>(pairs);
}

std::string BudgetTable::to_csv() const {
    std::ostringstream out;
    out << "budget_percent";
    for (const auto& m : methods) out << ',' << m;
    const bool with_delta = methods.size() == 2;
    if (with_delta) out << ",delta_" << methods[1] << "_minus_" << methods[0];
    out << '\n';
    for (std::size_t b = 0; b < budgets.size(); ++b) {
        out << format_double(budgets[b]);
        for (const auto& cell : cells[b]) {
            out << ',';
            if (cell) out << format_double(*cell);
        }
        if (with_delta) {
            out << ',';
            if (deltas[b]) out << format_double(*deltas[b]);
        }
        out << '\n';
    }
    return out.str();
}

Report build_report(std::span<const MetricsLog> logs, const std::vector<double>& budgets) {
    if (logs.empty()) throw DataError("report needs at least one completed run");
    Report rep;
    auto& t = rep.table;
    t.budgets = budgets;
    for (const auto& log : logs)
        if (std::find(t.methods.begin(), t.methods.end(), log.method) == t.methods.end()) t.methods.push_back(log.method);

    t.cells.assign(budgets.size(), std::vector<std::optional<double>>(t.methods.size()));
    t.deltas.assign(budgets.size(), std::nullopt);
    for (std::size_t b = 0; b < budgets.size(); ++b) {
        for (std::size_t m = 0; m < t.methods.size(); ++m) {
            double acc = 0.0;
            std::size_t runs = 0;
            bool missing = false;
            for (const auto& log : logs) {
                if (log.method != t.methods[m]) continue;
                const auto a = accuracy_at_budget(log, budgets[b]);
                if (!a) {
                    missing = true;
                    continue;
                }
                acc += *a;
                ++runs;
            }
            if (missing) {
                rep.warnings.push_back("method '" + t.methods[m] + "' has runs without a " +
                                       format_double(budgets[b]) + "% budget point; cell left blank");
            } else if (runs > 0) {
                t.cells[b][m] = acc / static_cast<double>(runs);
            }
        }
        if (t.methods.size() == 2 && t.cells[b][0] && t.cells[b][1]) {
            double diff = 0.0;
            std::size_t pairs = 0;
            for (const auto& first : logs) {
                if (first.method != t.methods[0]) continue;
                for (const auto& second : logs) {
                    if (second.method != t.methods[1] || second.seed != first.seed) continue;
                    diff += *accuracy_at_budget(second, budgets[b]) - *accuracy_at_budget(first, budgets[b]);
                    ++pairs;
                }
            }
            if (pairs > 0) t.deltas[b] = diff / static_cast<double>(pairs);
        }
    }

    std::ostringstream hist, top5, trend;
    hist << "method,seed,iteration,phase,bin,lower,upper,count\n";
    top5 << "method,seed,iteration,labeled_fraction,top5_mean_pre,top5_mean_post\n";
    trend << "method,seed,kendall_tau,decreasing\n";
    for (const auto& log : logs) {
        const double width = std::log(static_cast<double>(log.num_classes)) / UncertaintyHistogram::kBins;
        std::vector<double> series;
        for (const auto& it : log.iterations) {
            for (const auto& [phase, h] : {std::pair{"pre", &it.histogram_pre}, std::pair{"post", &it.histogram_post}}) {
                for (std::size_t bin = 0; bin < h->counts.size(); ++bin) {
                    hist << log.method << ',' << log.seed << ',' << it.iteration << ',' << phase << ',' << bin << ','
                         << format_double(width * static_cast<double>(bin)) << ','
                         << format_double(width * static_cast<double>(bin + 1)) << ',' << h->counts[bin] << '\n';
                }
            }
            top5 << log.method << ',' << log.seed << ',' << it.iteration << ',' << format_double(it.labeled_fraction)
                 << ',' << (it.top5_mean_pre ? format_double(*it.top5_mean_pre) : "") << ','
                 << (it.top5_mean_post ? format_double(*it.top5_mean_post) : "") << '\n';
            if (it.top5_mean_post) series.push_back(*it.top5_mean_post);
        }
        const double tau = kendall_tau(series);
        trend << log.method << ',' << log.seed << ',' << format_double(tau) << ',' << (tau < 0.0 ? "true" : "false")
              << '\n';
    }
    rep.histogram_csv = hist.str();
    rep.top5_csv = top5.str();
    rep.trend_csv = trend.str();
    return rep;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        out << text;
    };
    write("budget_table.csv", report.table.to_csv());
    write("uncertainty_histograms.csv", report.histogram_csv);
    write("top5_series.csv", report.top5_csv);
    write("top5_trend.csv", report.trend_csv);
}

}  // namespace xmal

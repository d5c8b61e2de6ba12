#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace xmal {

using SampleId = int;
using LabelMap = std::map<SampleId, int>;

/// Shannon entropy -sum p ln p (0 ln 0 = 0). Rejects entries < 0 or a sum
/// deviating from 1 by more than 1e-6.
double entropy(std::span<const double> p);

struct ScoredSample {
    SampleId id;
    double score;
    friend bool operator==(const ScoredSample&, const ScoredSample&) = default;
};

/// Selected samples in descending score order (ties: ascending id).
struct AcquisitionBatch {
    std::vector<ScoredSample> items;
    double ratio = 0.0;

    std::vector<SampleId> ids() const;
    bool empty() const noexcept { return items.empty(); }
    std::size_t size() const noexcept { return items.size(); }
};

/// ceil(ratio * unlabeled), capped at `unlabeled`.
std::size_t acquisition_count(std::size_t unlabeled, double ratio);

/// The `k` highest-scoring ids; ties broken by ascending id.
AcquisitionBatch select_top(const std::map<SampleId, double>& scores, std::size_t k);

/// Top ceil(ratio * |scores|) ids. `ratio` must lie in (0, 1]. An empty score
/// map yields an empty batch.
AcquisitionBatch rank_and_select(const std::map<SampleId, double>& scores, double ratio);

/// Partition of sample ids [0, universe) into labeled, unlabeled and test sets.
///
/// All membership changes go through `transfer`, which is all-or-nothing.
class SamplePool {
public:
    SamplePool() = default;
    SamplePool(std::size_t universe, LabelMap labeled, std::set<SampleId> unlabeled,
               std::set<SampleId> test);

    std::size_t universe() const noexcept { return universe_; }
    const LabelMap& labeled() const noexcept { return labeled_; }
    const std::set<SampleId>& unlabeled() const noexcept { return unlabeled_; }
    const std::set<SampleId>& test() const noexcept { return test_; }
    /// Ids moved by each successful non-empty transfer, in order.
    const std::vector<std::vector<SampleId>>& history() const noexcept { return history_; }

    /// Moves `ids` from unlabeled to labeled with `labels[id]`. Throws
    /// DataError (pool unchanged) if an id is not unlabeled, is repeated, or
    /// has no label.
    void transfer(std::span<const SampleId> ids, const LabelMap& labels);
    void transfer(const AcquisitionBatch& batch, const LabelMap& labels) {
        const auto ids = batch.ids();
        transfer(ids, labels);
    }

    /// Throws InvariantError on overlap, a lost or foreign id, or a count mismatch.
    void check_invariants() const;

    friend bool operator==(const SamplePool&, const SamplePool&) = default;

    /// Restores a pool including its transfer history (run-state files).
    static SamplePool restore(std::size_t universe, LabelMap labeled, std::set<SampleId> unlabeled,
                              std::set<SampleId> test, std::vector<std::vector<SampleId>> history);

private:
    std::size_t universe_ = 0;
    LabelMap labeled_;
    std::set<SampleId> unlabeled_;
    std::set<SampleId> test_;
    std::vector<std::vector<SampleId>> history_;
};

}  // namespace xmal

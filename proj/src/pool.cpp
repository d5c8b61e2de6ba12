#include "xmal/pool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "xmal/error.hpp"

namespace xmal {

double entropy(std::span<const double> p) {
    if (p.empty()) throw std::invalid_argument("entropy of an empty distribution");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("entropy: probability entries must be finite and >= 0");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw std::invalid_argument("entropy: probabilities sum to " + std::to_string(total));
    }
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

std::vector<SampleId> AcquisitionBatch::ids() const {
    std::vector<SampleId> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.id);
    return out;
}

std::size_t acquisition_count(std::size_t unlabeled, double ratio) {
    const double raw = std::ceil(ratio * static_cast<double>(unlabeled) - 1e-9);
    const auto k = raw <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(raw);
    return std::min(k, unlabeled);
}

AcquisitionBatch select_top(const std::map<SampleId, double>& scores, std::size_t k) {
    std::vector<ScoredSample> all;
    all.reserve(scores.size());
    for (const auto& [id, s] : scores) all.push_back({id, s});
    k = std::min(k, all.size());
    auto better = [](const ScoredSample& a, const ScoredSample& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
    all.resize(k);
    AcquisitionBatch batch;
    batch.items = std::move(all);
    return batch;
}

AcquisitionBatch rank_and_select(const std::map<SampleId, double>& scores, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw std::invalid_argument("acquisition ratio must lie in (0, 1]");
    }
    AcquisitionBatch batch = select_top(scores, acquisition_count(scores.size(), ratio));
    batch.ratio = ratio;
    return batch;
}

SamplePool::SamplePool(std::size_t universe, LabelMap labeled, std::set<SampleId> unlabeled,
                       std::set<SampleId> test)
    : universe_(universe),
      labeled_(std::move(labeled)),
      unlabeled_(std::move(unlabeled)),
      test_(std::move(test)) {
    check_invariants();
}

SamplePool SamplePool::restore(std::size_t universe, LabelMap labeled, std::set<SampleId> unlabeled,
                               std::set<SampleId> test, std::vector<std::vector<SampleId>> history) {
    SamplePool p(universe, std::move(labeled), std::move(unlabeled), std::move(test));
    p.history_ = std::move(history);
    for (const auto& batch : p.history_)
        for (auto id : batch)
            if (!p.labeled_.contains(id)) {
                throw InvariantError("pool history names sample " + std::to_string(id) +
                                     " which is not labeled");
            }
    return p;
}

void SamplePool::transfer(std::span<const SampleId> ids, const LabelMap& labels) {
    std::set<SampleId> seen;
    for (auto id : ids) {
        if (!unlabeled_.contains(id)) {
            throw DataError("transfer rejected: sample " + std::to_string(id) + " is not unlabeled");
        }
        if (!seen.insert(id).second) {
            throw DataError("transfer rejected: sample " + std::to_string(id) + " appears twice");
        }
        if (!labels.contains(id)) {
            throw DataError("transfer rejected: no label for sample " + std::to_string(id));
        }
    }
    if (ids.empty()) return;
    for (auto id : ids) {
        unlabeled_.erase(id);
        labeled_.emplace(id, labels.at(id));
    }
    history_.emplace_back(ids.begin(), ids.end());
}

void SamplePool::check_invariants() const {
    if (labeled_.size() + unlabeled_.size() + test_.size() != universe_) {
        throw InvariantError("pool sizes " + std::to_string(labeled_.size()) + "+" +
                             std::to_string(unlabeled_.size()) + "+" + std::to_string(test_.size()) +
                             " do not add up to universe " + std::to_string(universe_));
    }
    auto in_range = [this](SampleId id) {
        return id >= 0 && static_cast<std::size_t>(id) < universe_;
    };
    for (const auto& [id, label] : labeled_) {
        if (!in_range(id)) throw InvariantError("labeled id " + std::to_string(id) + " outside universe");
        if (unlabeled_.contains(id) || test_.contains(id)) {
            throw InvariantError("sample " + std::to_string(id) + " is in more than one partition");
        }
    }
    for (auto id : unlabeled_) {
        if (!in_range(id)) throw InvariantError("unlabeled id " + std::to_string(id) + " outside universe");
        if (test_.contains(id)) {
            throw InvariantError("sample " + std::to_string(id) + " is in more than one partition");
        }
    }
    for (auto id : test_)
        if (!in_range(id)) throw InvariantError("test id " + std::to_string(id) + " outside universe");
}

}  // namespace xmal

#include "xmal/oracle.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "xmal/annotation_hub.hpp"
#include "xmal/error.hpp"

namespace xmal {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SimulatedOracle::SimulatedOracle(LabelMap truth, std::size_t num_classes, double noise_rate,
                                 std::uint64_t seed)
    : truth_(std::move(truth)), num_classes_(num_classes), noise_rate_(noise_rate), seed_(seed) {
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
        throw ConfigError("oracle noise rate must lie in [0, 1)");
    }
    if (num_classes < 2) throw ConfigError("oracle needs at least two classes");
}

int SimulatedOracle::answer(SampleId id) const {
    auto it = truth_.find(id);
    if (it == truth_.end()) {
        throw DataError("simulated oracle has no ground truth for sample " + std::to_string(id));
    }
    const std::uint64_t h = mix64(seed_ ^ mix64(static_cast<std::uint64_t>(id)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    if (u >= noise_rate_) return it->second;
    const auto offset = 1 + mix64(h) % (num_classes_ - 1);
    return static_cast<int>((static_cast<std::size_t>(it->second) + offset) % num_classes_);
}

Annotation SimulatedOracle::annotate(std::span<const SampleId> ids) {
    Annotation out;
    for (auto id : ids) out.labels[id] = answer(id);
    return out;
}

RemoteOracle::RemoteOracle(AnnotationHub& hub, std::chrono::milliseconds timeout)
    : hub_(&hub), timeout_(timeout) {}

Annotation RemoteOracle::annotate(std::span<const SampleId> ids) {
    std::set<SampleId> open;
    for (auto id : hub_->active_samples()) open.insert(id);
    std::vector<PendingQuery> missing;
    for (auto id : ids) {
        if (!open.contains(id)) {
            PendingQuery q;
            q.sample_id = id;
            missing.push_back(std::move(q));
        }
    }
    if (!missing.empty()) hub_->post_queries(std::move(missing));

    Annotation out;
    out.labels = hub_->wait_for_labels(ids, timeout_);
    for (auto id : ids)
        if (!out.labels.contains(id)) out.unanswered.push_back(id);
    return out;
}

}  // namespace xmal

#include "xmal/annotation_hub.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace xmal {

std::int64_t unix_millis() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

FeatureSummary FeatureSummary::of(std::span<const double> values) {
    FeatureSummary s;
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    const std::size_t buckets = std::min(kProfileLength, values.size());
    for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t lo = b * values.size() / buckets;
        const std::size_t hi = (b + 1) * values.size() / buckets;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += values[i];
        s.profile.push_back(acc / static_cast<double>(hi - lo));
    }
    return s;
}

AnnotationHub::AnnotationHub(std::size_t num_classes) : num_classes_(num_classes) {}

std::vector<PendingQuery> AnnotationHub::post_queries(std::vector<PendingQuery> queries) {
    std::lock_guard lock(mu_);
    std::set<SampleId> open;
    for (const auto& [qid, e] : entries_)
        if (e.active && !e.label) open.insert(e.query.sample_id);
    std::set<SampleId> incoming;
    for (const auto& q : queries) {
        if (!incoming.insert(q.sample_id).second || open.contains(q.sample_id)) {
            throw std::invalid_argument("sample " + std::to_string(q.sample_id) +
                                        " already has a pending query");
        }
    }
    const auto now = unix_millis();
    for (auto& q : queries) {
        q.query_id = next_query_id_++;
        q.created_at_ms = now;
        entries_[q.query_id] = Entry{q, std::nullopt, true};
        active_order_.push_back(q.query_id);
    }
    return queries;
}

std::optional<PendingQuery> AnnotationHub::next_query() const {
    std::lock_guard lock(mu_);
    for (auto qid : active_order_) {
        const auto& e = entries_.at(qid);
        if (e.active && !e.label) return e.query;
    }
    return std::nullopt;
}

std::vector<PendingQuery> AnnotationHub::pending() const {
    std::lock_guard lock(mu_);
    std::vector<PendingQuery> out;
    for (auto qid : active_order_) {
        const auto& e = entries_.at(qid);
        if (e.active && !e.label) out.push_back(e.query);
    }
    return out;
}

std::vector<SampleId> AnnotationHub::active_samples() const {
    std::lock_guard lock(mu_);
    std::vector<SampleId> out;
    for (auto qid : active_order_) out.push_back(entries_.at(qid).query.sample_id);
    return out;
}

SubmitResult AnnotationHub::submit_label(std::int64_t query_id, int label) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(query_id);
    if (it == entries_.end()) return SubmitResult::UnknownQuery;
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes_) return SubmitResult::InvalidLabel;
    Entry& e = it->second;
    if (e.label) return *e.label == label ? SubmitResult::Duplicate : SubmitResult::Conflict;
    if (!e.active) return SubmitResult::UnknownQuery;
    e.label = label;
    audit_.push_back({query_id, e.query.sample_id, label, unix_millis()});
    answered_.notify_all();
    return SubmitResult::Accepted;
}

std::optional<int> AnnotationHub::recorded_label(std::int64_t query_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(query_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.label;
}

LabelMap AnnotationHub::wait_for_labels(std::span<const SampleId> ids, std::chrono::milliseconds timeout) {
    const std::set<SampleId> wanted(ids.begin(), ids.end());
    std::unique_lock lock(mu_);
    auto collect = [&] {
        LabelMap got;
        for (auto qid : active_order_) {
            const auto& e = entries_.at(qid);
            if (e.active && e.label && wanted.contains(e.query.sample_id)) got[e.query.sample_id] = *e.label;
        }
        return got;
    };
    answered_.wait_for(lock, timeout, [&] { return collect().size() == wanted.size(); });
    LabelMap got = collect();
    for (auto qid : active_order_) {
        auto& e = entries_.at(qid);
        if (e.active && e.label && wanted.contains(e.query.sample_id)) e.active = false;
    }
    std::erase_if(active_order_, [this](std::int64_t qid) { return !entries_.at(qid).active; });
    return got;
}

void AnnotationHub::clear_batch() {
    std::lock_guard lock(mu_);
    for (auto qid : active_order_) entries_.at(qid).active = false;
    active_order_.clear();
}

std::vector<AuditRow> AnnotationHub::audit_log() const {
    std::lock_guard lock(mu_);
    return audit_;
}

void AnnotationHub::publish_status(std::string json) {
    std::lock_guard lock(mu_);
    status_json_ = std::move(json);
}

void AnnotationHub::publish_metrics(std::string json) {
    std::lock_guard lock(mu_);
    metrics_json_ = std::move(json);
}

std::string AnnotationHub::status_json() const {
    std::lock_guard lock(mu_);
    return status_json_;
}

std::string AnnotationHub::metrics_json() const {
    std::lock_guard lock(mu_);
    return metrics_json_;
}

}  // namespace xmal

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmal/pool.hpp"

namespace xmal {

/// Compact, display-oriented view of one feature vector.
struct FeatureSummary {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::vector<double> profile;  ///< bucket means, at most `kProfileLength` points

    static constexpr std::size_t kProfileLength = 16;
    static FeatureSummary of(std::span<const double> values);
};

struct PendingQuery {
    std::int64_t query_id = 0;
    SampleId sample_id = 0;
    std::vector<double> probabilities;
    double uncertainty = 0.0;  ///< entropy of `probabilities`
    FeatureSummary eeg;
    FeatureSummary face;
    std::int64_t created_at_ms = 0;
};

struct AuditRow {
    std::int64_t query_id;
    SampleId sample_id;
    int label;
    std::int64_t timestamp_ms;
};

enum class SubmitResult { Accepted, Duplicate, Conflict, UnknownQuery, InvalidLabel };

/// Rendezvous between the training loop and the annotation service.
///
/// The runner posts query batches and later drains submitted labels; HTTP
/// handlers read published snapshots and submit labels. All members are
/// thread-safe. Labels only reach the sample pool when the runner drains them.
class AnnotationHub {
public:
    explicit AnnotationHub(std::size_t num_classes);

    std::size_t num_classes() const noexcept { return num_classes_; }

    /// Makes `queries` the active batch; assigns query ids and timestamps.
    /// Throws std::invalid_argument if a sample id appears twice or already
    /// has an unanswered query.
    std::vector<PendingQuery> post_queries(std::vector<PendingQuery> queries);

    /// First unanswered query of the active batch.
    std::optional<PendingQuery> next_query() const;
    /// All unanswered queries of the active batch.
    std::vector<PendingQuery> pending() const;
    /// Sample ids of the active batch, answered or not.
    std::vector<SampleId> active_samples() const;

    SubmitResult submit_label(std::int64_t query_id, int label);
    /// Label previously recorded for `query_id`, if any.
    std::optional<int> recorded_label(std::int64_t query_id) const;

    /// Blocks until every sample in `ids` has a submitted label or `timeout`
    /// elapses; returns whatever was answered. Answered queries leave the
    /// active batch.
    LabelMap wait_for_labels(std::span<const SampleId> ids, std::chrono::milliseconds timeout);

    /// Drops the active batch (answered history is kept for idempotence).
    void clear_batch();

    std::vector<AuditRow> audit_log() const;

    void publish_status(std::string json);
    void publish_metrics(std::string json);
    std::string status_json() const;
    std::string metrics_json() const;

private:
    struct Entry {
        PendingQuery query;
        std::optional<int> label;
        bool active = true;
    };

    std::size_t num_classes_;
    mutable std::mutex mu_;
    std::condition_variable answered_;
    std::int64_t next_query_id_ = 1;
    std::map<std::int64_t, Entry> entries_;
    std::vector<std::int64_t> active_order_;
    std::vector<AuditRow> audit_;
    std::string status_json_ = "{}";
    std::string metrics_json_ = "{}";
};

std::int64_t unix_millis();

}  // namespace xmal

#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include "xmal/pool.hpp"

namespace xmal {

class AnnotationHub;

struct Annotation {
    LabelMap labels;
    std::vector<SampleId> unanswered;
};

/// Source of labels for queried samples.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual Annotation annotate(std::span<const SampleId> ids) = 0;
};

/// Answers from ground truth, each answer independently replaced by a
/// uniformly chosen wrong class with probability `noise_rate`. The flip
/// decision for an id is a hash of (seed, id), so answers do not depend on
/// query order or on earlier calls.
class SimulatedOracle final : public Oracle {
public:
    SimulatedOracle(LabelMap truth, std::size_t num_classes, double noise_rate, std::uint64_t seed);

    Annotation annotate(std::span<const SampleId> ids) override;
    /// Throws DataError if `id` has no ground truth.
    int answer(SampleId id) const;

private:
    LabelMap truth_;
    std::size_t num_classes_;
    double noise_rate_;
    std::uint64_t seed_;
};

/// Waits on the annotation hub for human submissions.
class RemoteOracle final : public Oracle {
public:
    RemoteOracle(AnnotationHub& hub, std::chrono::milliseconds timeout);

    /// Posts bare queries for ids that have none pending, then blocks up to
    /// the timeout. Unanswered ids are reported, never invented.
    Annotation annotate(std::span<const SampleId> ids) override;

private:
    AnnotationHub* hub_;
    std::chrono::milliseconds timeout_;
};

/// SplitMix64 finalizer; also used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace xmal

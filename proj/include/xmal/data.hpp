#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmal/pool.hpp"
#include "xmal/tensor.hpp"

namespace xmal {

enum class Split { Labeled, Unlabeled, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

/// One synchronized sample.
struct FeatureRecord {
    SampleId id = 0;
    std::vector<double> eeg;
    std::vector<double> face;
    std::optional<int> label;
    Split split = Split::Unlabeled;
    std::optional<int> subject;

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/// Immutable collection of records with dense ids 0..n-1 stored in id order.
struct Dataset {
    std::size_t eeg_dim = 0;
    std::size_t face_dim = 0;
    std::size_t num_classes = 2;
    std::vector<FeatureRecord> records;

    /// Throws DataError on width drift, out-of-range labels, non-dense ids or
    /// unlabeled test records.
    void validate() const;

    const FeatureRecord& at(SampleId id) const { return records.at(static_cast<std::size_t>(id)); }
    std::size_t size() const noexcept { return records.size(); }

    /// Stacks the given samples' features row by row.
    Tensor eeg_matrix(std::span<const SampleId> ids) const;
    Tensor face_matrix(std::span<const SampleId> ids) const;
    /// Ground truth for every labelled record.
    LabelMap labels() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthConfig {
    std::size_t n_samples = 2000;
    std::size_t eeg_dim = 16;
    std::size_t face_dim = 16;
    std::size_t num_classes = 2;
    double margin = 2.0;
    double eeg_noise = 0.8;
    double face_noise = 0.4;
    double inconsistency_rate = 0.1;
    double label_noise = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Generator-side facts not visible in the dataset itself.
struct SynthTrace {
    std::vector<int> latent_class;  ///< class driving the EEG features
    std::vector<int> face_class;    ///< class whose prototype produced the face features
};

/// Per sample: class u uniform; eeg = A_e e(u) + N(0, eeg_noise^2); with
/// probability `inconsistency_rate` the face path uses a different class
/// u' != u; face = A_f f(u or u') + N(0, face_noise^2). Prototypes are
/// orthogonal with pairwise distance `margin`; A_e, A_f are fixed random maps.
/// Stored labels are u, flipped to another class with probability `label_noise`.
Dataset generate(const SynthConfig& cfg, SynthTrace* trace = nullptr);

struct SplitFractions {
    double labeled = 0.10;
    double unlabeled = 0.70;
    double test = 0.20;
    friend bool operator==(const SplitFractions&, const SplitFractions&) = default;
};

/// Uniform random partition. Part sizes are rounded (test takes the
/// remainder); every part must be non-empty. Initial labeled samples keep
/// their stored labels.
SamplePool split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

/// Pool taken from the records' own split tags.
SamplePool pool_from_tags(const Dataset& dataset);

/// Copy of `dataset` with split tags set from `pool`.
Dataset with_split_tags(Dataset dataset, const SamplePool& pool);

struct IngestSchema {
    std::size_t num_classes = 2;
    /// When set, the label column holds 1-9 valence scores: score >= threshold
    /// maps to class 1, otherwise class 0.
    std::optional<double> valence_threshold;

    friend bool operator==(const IngestSchema&, const IngestSchema&) = default;
};

/// Feature file: comma-separated text with header
/// `id,split,label[,subject],eeg_0..eeg_{p-1},face_0..face_{q-1}`.
/// An empty label means unlabeled; an empty split means `unlabeled`.
Dataset read_features(std::istream& in, const IngestSchema& schema, std::string_view source = "<stream>");
Dataset ingest(const std::filesystem::path& path, const IngestSchema& schema);

void write_features(std::ostream& out, const Dataset& dataset);
void export_features(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace xmal

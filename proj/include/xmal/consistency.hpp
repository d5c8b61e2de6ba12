#pragma once

#include <optional>
#include <span>
#include <vector>

#include "xmal/model.hpp"
#include "xmal/tape.hpp"
#include "xmal/tensor.hpp"

namespace xmal {

/// Weights of the similarity, reliability and task terms in the total objective.
struct LossWeights {
    double similarity = 1.0;
    double reliability = 1.0;
    double task = 1.0;

    /// Throws ConfigError unless all weights are >= 0 and at least one is > 0.
    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Per-sample cross-modal reliability scores derived from a similarity matrix.
struct ReliabilityVector {
    std::vector<double> mean_offdiag;  ///< h: mean similarity to the other samples' faces
    std::vector<double> normalized;    ///< min-max scaled h
    std::vector<double> target;        ///< 1 - normalized
};

/// Throws ShapeError if some row's Euclidean norm differs from 1 by more than `tol`.
void check_unit_rows(const Tensor& z, double tol = 1e-6);

/// S = zhat_eeg * zhat_face^T, so S(i, j) is the cosine between EEG sample i
/// and face sample j. Row norms are verified in debug builds.
ad::Var similarity_matrix(ad::Var zhat_eeg, ad::Var zhat_face);
Tensor similarity_matrix(const Tensor& zhat_eeg, const Tensor& zhat_face);

/// Symmetric contrastive loss: the mean row-wise cross-entropy of
/// softmax(S / temperature) against the diagonal, averaged with the same
/// quantity on S^T. Requires N >= 2.
ad::Var similarity_loss(ad::Var s, double temperature);

/// h_i = mean_{j != i} S(i, j), min-max scaled with `eps` in the denominator,
/// target = 1 - scaled. Plain values: no gradient flows through them.
ReliabilityVector reliability_targets(const Tensor& s, double eps = 1e-8);

/// 0.5 * (|r_eeg - r*|^2 + |r_face - r*|^2) / N, for N x 1 columns.
ad::Var reliability_loss(ad::Var r_eeg, ad::Var r_face, std::span<const double> target);

/// Mean negative log-probability of the labelled class, probabilities floored at 1e-12.
ad::Var task_loss(ad::Var probs, std::span<const int> labels);

ad::Var total_loss(ad::Var sim, ad::Var rel, ad::Var task, const LossWeights& w);

struct ObjectiveOptions {
    LossWeights weights;
    double temperature = 0.07;
    double reliability_epsilon = 1e-8;
    double norm_epsilon = 1e-12;

    friend bool operator==(const ObjectiveOptions&, const ObjectiveOptions&) = default;
};

/// Every intermediate of one batch's forward pass through the joint objective.
struct BatchObjective {
    ad::Var z_eeg, z_face;
    ad::Var similarity;  ///< S
    ad::Var probs;
    ad::Var r_eeg, r_face;
    ReliabilityVector targets;
    ad::Var loss_similarity, loss_reliability, loss_task, loss_total;
};

/// Records encode -> normalize -> S -> losses -> total on `model`'s tape.
/// `fixed_targets` replaces the batch-derived reliability targets; gradient
/// checks use it to hold the (non-differentiated) targets constant.
BatchObjective batch_objective(const BoundModel& model, const Tensor& x_eeg, const Tensor& x_face,
                               std::span<const int> labels, const ObjectiveOptions& options,
                               std::optional<std::span<const double>> fixed_targets = std::nullopt);

}  // namespace xmal

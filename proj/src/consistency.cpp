#include "xmal/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmal/error.hpp"

namespace xmal {

void LossWeights::validate() const {
    if (!(similarity >= 0.0) || !(reliability >= 0.0) || !(task >= 0.0)) {
        throw ConfigError("loss weights must be non-negative");
    }
    if (similarity == 0.0 && reliability == 0.0 && task == 0.0) {
        throw ConfigError("loss weights must not all be zero");
    }
}

void check_unit_rows(const Tensor& z, double tol) {
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double ss = 0.0;
        for (double v : z.row(r)) ss += v * v;
        if (std::abs(std::sqrt(ss) - 1.0) > tol) {
            throw ShapeError("row " + std::to_string(r) + " is not unit-normalized (norm " +
                             std::to_string(std::sqrt(ss)) + ")");
        }
    }
}

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("similarity_matrix: embedding batches differ " + a.shape_string() + " vs " +
                         b.shape_string());
    }
#ifndef NDEBUG
    check_unit_rows(a);
    check_unit_rows(b);
#endif
}

}  // namespace

ad::Var similarity_matrix(ad::Var zhat_eeg, ad::Var zhat_face) {
    check_pair(zhat_eeg.value(), zhat_face.value());
    return ad::matmul(zhat_eeg, ad::transpose(zhat_face));
}

Tensor similarity_matrix(const Tensor& zhat_eeg, const Tensor& zhat_face) {
    check_pair(zhat_eeg, zhat_face);
    return matmul(zhat_eeg, transpose(zhat_face));
}

ad::Var similarity_loss(ad::Var s, double temperature) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw ShapeError("similarity_loss: S must be square, got " + s.value().shape_string());
    if (n < 2) throw ShapeError("similarity_loss needs a batch of at least 2 (no negatives otherwise)");
    if (!(temperature > 0.0)) throw ConfigError("similarity_loss: temperature must be > 0");

    ad::Tape& tape = *s.tape;
    ad::Var diag = tape.constant(Tensor::identity(n));
    ad::Var logits = ad::scale(s, 1.0 / temperature);
    ad::Var rows = ad::sum(ad::hadamard(diag, ad::row_log_softmax(logits)));
    ad::Var cols = ad::sum(ad::hadamard(diag, ad::row_log_softmax(ad::transpose(logits))));
    // -(1/2) * (mean_i log p_row(i,i) + mean_i log p_col(i,i))
    return ad::scale(ad::add(rows, cols), -0.5 / static_cast<double>(n));
}

ReliabilityVector reliability_targets(const Tensor& s, double eps) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw ShapeError("reliability_targets: S must be square");
    if (n < 2) throw ShapeError("reliability_targets needs a batch of at least 2");

    ReliabilityVector out;
    out.mean_offdiag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) acc += s(i, j);
        out.mean_offdiag[i] = acc / static_cast<double>(n - 1);
    }
    const auto [lo, hi] = std::minmax_element(out.mean_offdiag.begin(), out.mean_offdiag.end());
    const double min_h = *lo;
    const double range = *hi - *lo;
    out.normalized.resize(n);
    out.target.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.normalized[i] = (out.mean_offdiag[i] - min_h) / (range + eps);
        out.target[i] = 1.0 - out.normalized[i];
    }
    return out;
}

ad::Var reliability_loss(ad::Var r_eeg, ad::Var r_face, std::span<const double> target) {
    const std::size_t n = target.size();
    if (r_eeg.rows() != n || r_face.rows() != n || r_eeg.cols() != 1 || r_face.cols() != 1) {
        throw ShapeError("reliability_loss: expected two " + std::to_string(n) +
                         "x1 columns, got " + r_eeg.value().shape_string() + " and " +
                         r_face.value().shape_string());
    }
    if (n == 0) throw ShapeError("reliability_loss on an empty batch");
    ad::Var t = r_eeg.tape->constant(Tensor::column(target));
    ad::Var both = ad::add(ad::sum(ad::squared_difference(r_eeg, t)),
                           ad::sum(ad::squared_difference(r_face, t)));
    return ad::scale(both, 0.5 / static_cast<double>(n));
}

ad::Var task_loss(ad::Var probs, std::span<const int> labels) {
    const std::size_t n = probs.rows();
    const std::size_t c = probs.cols();
    if (labels.size() != n) {
        throw ShapeError("task_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    if (n == 0) throw ShapeError("task_loss on an empty batch");
    Tensor onehot(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw std::out_of_range("task_loss: label " + std::to_string(labels[i]) +
                                    " outside [0, " + std::to_string(c) + ")");
        }
        onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    ad::Var picked = ad::sum(ad::hadamard(probs.tape->constant(std::move(onehot)), ad::log(probs, 1e-12)));
    return ad::scale(picked, -1.0 / static_cast<double>(n));
}

ad::Var total_loss(ad::Var sim, ad::Var rel, ad::Var task, const LossWeights& w) {
    return ad::add(ad::add(ad::scale(sim, w.similarity), ad::scale(rel, w.reliability)),
                   ad::scale(task, w.task));
}

BatchObjective batch_objective(const BoundModel& model, const Tensor& x_eeg, const Tensor& x_face,
                               std::span<const int> labels, const ObjectiveOptions& options,
                               std::optional<std::span<const double>> fixed_targets) {
    if (x_eeg.rows() != x_face.rows()) {
        throw ShapeError("batch_objective: modalities have different batch sizes");
    }
    ad::Tape& tape = model.tape();
    BatchObjective b;
    b.z_eeg = model.encode(Modality::Eeg, tape.constant(x_eeg));
    b.z_face = model.encode(Modality::Face, tape.constant(x_face));
    ad::Var zn_eeg = ad::row_l2_normalize(b.z_eeg, options.norm_epsilon);
    ad::Var zn_face = ad::row_l2_normalize(b.z_face, options.norm_epsilon);
    b.similarity = similarity_matrix(zn_eeg, zn_face);
    b.loss_similarity = similarity_loss(b.similarity, options.temperature);

    b.targets = reliability_targets(b.similarity.value(), options.reliability_epsilon);
    std::span<const double> target = fixed_targets ? *fixed_targets : std::span<const double>(b.targets.target);
    b.r_eeg = model.reliability(Modality::Eeg, b.z_eeg);
    b.r_face = model.reliability(Modality::Face, b.z_face);
    b.loss_reliability = reliability_loss(b.r_eeg, b.r_face, target);

    b.probs = model.predict(b.z_eeg);
    b.loss_task = task_loss(b.probs, labels);
    b.loss_total = total_loss(b.loss_similarity, b.loss_reliability, b.loss_task, options.weights);
    return b;
}

}  // namespace xmal

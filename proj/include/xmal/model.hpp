#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xmal/tape.hpp"
#include "xmal/tensor.hpp"

namespace xmal {

enum class Modality { Eeg, Face };

std::string_view to_string(Modality m);

/// Architecture of the two encoders and the three heads.
///
/// Each encoder is an MLP `input_dim -> hidden... -> embedding_dim` with relu
/// after every hidden layer and a linear embedding layer. An empty `hidden`
/// list gives a single linear map.
struct ModelConfig {
    std::size_t eeg_dim = 16;
    std::size_t face_dim = 16;
    std::vector<std::size_t> hidden{32};
    std::size_t embedding_dim = 16;
    std::size_t num_classes = 2;

    /// Throws ConfigError on zero widths or fewer than two classes.
    void validate() const;
    std::size_t input_dim(Modality m) const { return m == Modality::Eeg ? eeg_dim : face_dim; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All trainable tensors, stored in a fixed order under stable names
/// (`enc.eeg.0.w`, `enc.eeg.0.b`, ..., `head.task.w`, `head.rel.face.b`).
/// Weights are `in x out` so a layer computes `x W + b`.
class ModelParams {
public:
    ModelParams() = default;
    /// Zero-initialized parameters for `config`.
    explicit ModelParams(ModelConfig config);

    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::vector<Tensor>& tensors() noexcept { return tensors_; }
    const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    /// Number of layers in one encoder (hidden layers plus the embedding layer).
    std::size_t encoder_depth() const noexcept { return config_.hidden.size() + 1; }

    bool all_finite() const noexcept;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    ModelConfig config_;
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

std::string encoder_weight_name(Modality m, std::size_t layer);
std::string encoder_bias_name(Modality m, std::size_t layer);

/// ModelParams bound onto a tape as differentiable leaves, one per tensor.
class BoundModel {
public:
    BoundModel(ad::Tape& tape, const ModelParams& params);

    /// z_m = E_m(x_m); x must be N x input_dim(m).
    ad::Var encode(Modality m, ad::Var x) const;
    /// Class probabilities from EEG embeddings only: softmax(z W + b).
    ad::Var predict(ad::Var z_eeg) const;
    /// Pre-softmax task logits.
    ad::Var task_logits(ad::Var z_eeg) const;
    /// sigmoid(z w + b), an N x 1 column strictly inside (0, 1).
    ad::Var reliability(Modality m, ad::Var z) const;

    ad::Tape& tape() const noexcept { return *tape_; }
    const ModelParams& params() const noexcept { return *params_; }
    /// The leaf for parameter `i`, in ModelParams order.
    ad::Var leaf(std::size_t i) const { return leaves_.at(i); }
    /// Gradients of every parameter after `tape().backward(...)`.
    std::vector<Tensor> gradients() const;

private:
    ad::Var layer(std::string_view w, std::string_view b, ad::Var x) const;

    ad::Tape* tape_;
    const ModelParams* params_;
    std::vector<ad::Var> leaves_;
};

// Tape-free inference helpers.

Tensor encode(const ModelParams& params, Modality m, const Tensor& x);
Tensor predict(const ModelParams& params, const Tensor& z_eeg);
Tensor estimate_reliability(const ModelParams& params, Modality m, const Tensor& z);

/// Class probabilities straight from EEG features.
Tensor predict_from_eeg(const ModelParams& params, const Tensor& x_eeg);

}  // namespace xmal

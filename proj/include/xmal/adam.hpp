#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmal/tensor.hpp"

namespace xmal {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// First/second moment estimates for a fixed list of parameter tensors.
struct AdamState {
    AdamHyper hyper;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;

    /// Zero moments shaped like `params`.
    static AdamState for_params(std::span<const Tensor> params, AdamHyper hyper = {});

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update, in place:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws ShapeError if any gradient or moment does not match its parameter.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace xmal

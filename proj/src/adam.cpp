#include "xmal/adam.hpp"

#include <cmath>
#include <string>

#include "xmal/error.hpp"

namespace xmal {

AdamState AdamState::for_params(std::span<const Tensor> params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.rows(), p.cols());
        s.second_moment.emplace_back(p.rows(), p.cols());
    }
    return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw ShapeError("adam_step: parameter/gradient/moment counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]) ||
            !params[i].same_shape(state.second_moment[i])) {
            throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i) + " " +
                             params[i].shape_string() + " vs grad " + grads[i].shape_string());
        }
    }

    const auto& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data();
        const auto& g = grads[i].data();
        auto& m = state.first_moment[i].data();
        auto& v = state.second_moment[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
            v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
        }
    }
}

}  // namespace xmal

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "owafuse/errors.hpp"

namespace owafuse {

// Bias-corrected Adam state for one parameter block. Accumulators always
// match the parameter block's length; t counts completed steps.
struct AdamState {
    std::vector<float> m, v;
    std::int64_t t = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    explicit AdamState(std::size_t size, float b1 = 0.9f, float b2 = 0.999f, float e = 1e-8f)
        : m(size, 0.0f), v(size, 0.0f), beta1(b1), beta2(b2), eps(e) {}
};

inline void adam_step(float* params, const float* grads, std::size_t count, AdamState& state,
                      float lr) {
    if (count != state.m.size())
        throw contract_error("adam_step: size mismatch params " + std::to_string(count) +
                             " state " + std::to_string(state.m.size()));
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.t));
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    for (std::size_t i = 0; i < count; ++i) {
        const float g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0f - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0f - state.beta2) * g * g;
        const float mhat = state.m[i] * inv_bc1;
        const float vhat = state.v[i] * inv_bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

inline void adam_step(std::vector<float>& params, const std::vector<float>& grads,
                      AdamState& state, float lr) {
    if (params.size() != grads.size())
        throw contract_error("adam_step: size mismatch params " + std::to_string(params.size()) +
                             " grads " + std::to_string(grads.size()));
    adam_step(params.data(), grads.data(), params.size(), state, lr);
}

}  // namespace owafuse

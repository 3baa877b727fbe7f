#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "owafuse/simd_util.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

// ---- activations ----

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = sigmoid(v);
    return out;
}

// dL/dx given the forward *output* y = sigmoid(x).
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
    require_same_shape(y, grad_out, "sigmoid_backward");
    Tensor grad = grad_out;
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] *= y.data[i] * (1.0f - y.data[i]);
    return grad;
}

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor grad = grad_out;
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (x.data[i] <= 0.0f) grad.data[i] = 0.0f;
    return grad;
}

inline void relu_inplace(std::vector<float>& v) {
    for (float& x : v) x = x > 0.0f ? x : 0.0f;
}

// Softmax over a flat vector (the last axis of whatever batched structure
// the caller is iterating). Shift-invariant by construction.
inline std::vector<float> softmax(const std::vector<float>& v) {
    std::vector<float> out(v.size());
    float m = v.empty() ? 0.0f : v[0];
    for (float x : v) m = x > m ? x : m;
    double denom = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        denom += out[i];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (float& x : out) x *= inv;
    return out;
}

// dL/dlogits given softmax output y and dL/dy.
inline std::vector<float> softmax_backward(const std::vector<float>& y,
                                           const std::vector<float>& grad_out) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += static_cast<double>(y[i]) * grad_out[i];
    std::vector<float> grad(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        grad[i] = y[i] * (grad_out[i] - static_cast<float>(dot));
    return grad;
}

// ---- dense (affine) ----
// weights are row-major (out x in): out[o] = sum_i w[o*in+i] * x[i] + b[o].

inline std::vector<float> dense(const std::vector<float>& input, const std::vector<float>& weights,
                                const std::vector<float>& bias) {
    const std::size_t out_dim = bias.size();
    if (out_dim == 0 || input.empty() || weights.size() != out_dim * input.size())
        throw contract_error("dense: weights " + std::to_string(weights.size()) +
                             " != out " + std::to_string(out_dim) + " x in " +
                             std::to_string(input.size()));
    std::vector<float> out(out_dim);
    for (std::size_t o = 0; o < out_dim; ++o) {
        float acc = bias[o];
        const float* w = weights.data() + o * input.size();
        for (std::size_t i = 0; i < input.size(); ++i) acc += w[i] * input[i];
        out[o] = acc;
    }
    return out;
}

struct DenseGrads {
    std::vector<float> input, weights, bias;
};

inline DenseGrads dense_backward(const std::vector<float>& input, const std::vector<float>& weights,
                                 const std::vector<float>& grad_out) {
    const std::size_t out_dim = grad_out.size();
    if (weights.size() != out_dim * input.size())
        throw contract_error("dense_backward: weights " + std::to_string(weights.size()) +
                             " != out " + std::to_string(out_dim) + " x in " +
                             std::to_string(input.size()));
    DenseGrads g;
    g.input.assign(input.size(), 0.0f);
    g.weights.assign(weights.size(), 0.0f);
    g.bias = grad_out;
    for (std::size_t o = 0; o < out_dim; ++o) {
        const float go = grad_out[o];
        const float* w = weights.data() + o * input.size();
        float* gw = g.weights.data() + o * input.size();
        for (std::size_t i = 0; i < input.size(); ++i) {
            g.input[i] += w[i] * go;
            gw[i] = input[i] * go;
        }
    }
    return g;
}

// ---- channel concatenation ----

inline Tensor concat_channels(const std::vector<const Tensor*>& tensors) {
    if (tensors.empty()) throw contract_error("concat_channels: no inputs");
    const Tensor& first = *tensors[0];
    int total_c = 0;
    for (const Tensor* t : tensors) {
        if (t->n != first.n || t->h != first.h || t->w != first.w)
            throw contract_error("concat_channels: mismatched dims " + t->shape_str() + " vs " +
                                 first.shape_str());
        total_c += t->c;
    }
    Tensor out(first.n, total_c, first.h, first.w);
    for (int s = 0; s < first.n; ++s) {
        int ch = 0;
        for (const Tensor* t : tensors)
            for (int tc = 0; tc < t->c; ++tc, ++ch)
                std::copy_n(t->plane_ptr(s, tc), t->plane(), out.plane_ptr(s, ch));
    }
    return out;
}

// Inverse of concat: slices grad_out back into per-input gradients.
inline std::vector<Tensor> concat_split_backward(const Tensor& grad_out,
                                                 const std::vector<int>& channel_counts) {
    int total = 0;
    for (int c : channel_counts) total += c;
    if (total != grad_out.c)
        throw contract_error("concat_split_backward: channel counts sum " + std::to_string(total) +
                             " != grad channels " + std::to_string(grad_out.c));
    std::vector<Tensor> grads;
    grads.reserve(channel_counts.size());
    int ch = 0;
    for (int c : channel_counts) {
        Tensor g(grad_out.n, c, grad_out.h, grad_out.w);
        for (int s = 0; s < grad_out.n; ++s)
            for (int tc = 0; tc < c; ++tc)
                std::copy_n(grad_out.plane_ptr(s, ch + tc), grad_out.plane(), g.plane_ptr(s, tc));
        ch += c;
        grads.push_back(std::move(g));
    }
    return grads;
}

// ---- pixel-wise binary cross-entropy ----

inline constexpr float kBceClamp = 1e-7f;

struct BceResult {
    double loss;
    Tensor grad;  // dL/dpred
};

// Mean over all pixels of -[y ln p + (1-y) ln(1-p)], with p clamped to
// [1e-7, 1-1e-7] before the logs. The gradient is the derivative of the
// clamped expression: zero wherever the clamp is active.
inline BceResult bce_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "bce_loss");
    BceResult r;
    r.grad = Tensor(pred.n, pred.c, pred.h, pred.w);
    const double inv_count = 1.0 / static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const float y = target.data[static_cast<std::size_t>(i)];
        const float p_raw = pred.data[static_cast<std::size_t>(i)];
        const float p = p_raw < kBceClamp             ? kBceClamp
                        : p_raw > 1.0f - kBceClamp    ? 1.0f - kBceClamp
                                                      : p_raw;
        acc -= y * std::log(static_cast<double>(p)) +
               (1.0 - y) * std::log(1.0 - static_cast<double>(p));
        if (p_raw >= kBceClamp && p_raw <= 1.0f - kBceClamp)
            r.grad.data[static_cast<std::size_t>(i)] =
                static_cast<float>((static_cast<double>(p) - y) /
                                   (static_cast<double>(p) * (1.0 - p)) * inv_count);
    }
    r.loss = acc * inv_count;
    return r;
}

}  // namespace owafuse

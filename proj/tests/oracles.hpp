#pragma once

// Independent reference implementations used to pin expected values.
// Everything here is deliberately naive and kept free of the library's
// kernel machinery so the two routes stay independent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "owafuse/tensor.hpp"

namespace oracle {

// Quadruple-nested-loop cross-correlation with zero padding, stride 1.
inline owafuse::Tensor conv2d(const owafuse::Tensor& input, const owafuse::Tensor& kernel,
                              const std::vector<float>& bias) {
    const int k = kernel.h, r = k / 2;
    owafuse::Tensor out(input.n, kernel.n, input.h, input.w);
    for (int s = 0; s < input.n; ++s)
        for (int co = 0; co < kernel.n; ++co)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < input.c; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int yy = y + ky - r, xx = x + kx - r;
                                if (yy < 0 || yy >= input.h || xx < 0 || xx >= input.w) continue;
                                acc += static_cast<double>(kernel.at(co, ci, ky, kx)) *
                                       input.at(s, ci, yy, xx);
                            }
                    out.at(s, co, y, x) = static_cast<float>(acc);
                }
    return out;
}

// Sliding-window 3x3 pooling; taps visited in row-major window order with
// zero (avg) or -inf (max) standing in for out-of-bounds positions, which
// matches the contract's padding semantics tap for tap.
inline owafuse::Tensor pool3(const owafuse::Tensor& input, bool max_mode) {
    owafuse::Tensor out(input.n, input.c, input.h, input.w);
    for (int s = 0; s < input.n; ++s)
        for (int c = 0; c < input.c; ++c)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    float acc = 0.0f;
                    bool first = true;
                    for (int ky = -1; ky <= 1; ++ky)
                        for (int kx = -1; kx <= 1; ++kx) {
                            const int yy = y + ky, xx = x + kx;
                            const bool in =
                                yy >= 0 && yy < input.h && xx >= 0 && xx < input.w;
                            float v;
                            if (max_mode)
                                v = in ? input.at(s, c, yy, xx)
                                       : -std::numeric_limits<float>::infinity();
                            else
                                v = in ? input.at(s, c, yy, xx) : 0.0f;
                            if (first) {
                                acc = v;
                                first = false;
                            } else {
                                acc = max_mode ? (v > acc ? v : acc) : acc + v;
                            }
                        }
                    out.at(s, c, y, x) = max_mode ? acc : acc / 9.0f;
                }
    return out;
}

// Direct O(64^2) double-sum 2D DCT of one 8x8 block (values already
// centered), orthonormal normalization.
inline void naive_dct8(const double* block, double* out) {
    const double pi = 3.14159265358979323846;
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            const double av = v == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            const double au = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            double acc = 0.0;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    acc += block[y * 8 + x] * std::cos((2 * y + 1) * v * pi / 16.0) *
                           std::cos((2 * x + 1) * u * pi / 16.0);
            out[v * 8 + u] = av * au * acc;
        }
}

// Mann-Whitney AUC with average ranks on ties: probability that a random
// positive outranks a random negative.
inline double auc(const std::vector<float>& pos, const std::vector<float>& neg) {
    std::vector<std::pair<float, int>> all;  // (score, is_positive)
    for (float v : pos) all.push_back({v, 1});
    for (float v : neg) all.push_back({v, 0});
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (all[t].second) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

// Brute-force pixel-counting metrics (independent of the library path).
struct BruteMetrics {
    double macro_f1, f1_tampered, iou;
};

inline BruteMetrics brute_metrics(const std::vector<std::uint8_t>& pred,
                                  const std::vector<std::uint8_t>& gt) {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && gt[i]) ++tp;
        if (pred[i] && !gt[i]) ++fp;
        if (!pred[i] && gt[i]) ++fn;
        if (!pred[i] && !gt[i]) ++tn;
    }
    const auto f1 = [](long long tp_, long long fp_, long long fn_) {
        if (tp_ == 0 && fp_ == 0 && fn_ == 0) return 1.0;
        const double d = 2.0 * tp_ + fp_ + fn_;
        return d > 0 ? 2.0 * tp_ / d : 0.0;
    };
    BruteMetrics m{};
    m.f1_tampered = f1(tp, fp, fn);
    m.macro_f1 = 0.5 * (m.f1_tampered + f1(tn, fn, fp));
    m.iou = (tp + fp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp + fn);
    return m;
}

// Textbook Adam on a scalar, double precision throughout.
inline std::vector<double> adam_scalar_trace(double x0, double lr, int steps) {
    double x = x0, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> trace;
    for (int t = 1; t <= steps; ++t) {
        const double g = 2.0 * x;  // d/dx x^2
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);
        trace.push_back(x);
    }
    return trace;
}

}  // namespace oracle

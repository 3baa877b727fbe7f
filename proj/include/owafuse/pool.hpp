#pragma once

#include <cstring>
#include <limits>
#include <vector>

#include "owafuse/simd_util.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

enum class PoolMode { avg, max };

namespace detail {

inline thread_local std::vector<float> pool_pad_scratch;

// Pads one plane with a 1-ring of `fill` into scratch, returns pointer.
inline const float* pool_pad_plane(const float* in, int h, int w, float fill) {
    auto& buf = pool_pad_scratch;
    const int hp = h + 2, wp = w + 2;
    buf.resize(static_cast<std::size_t>(hp) * wp);
    for (int x = 0; x < wp; ++x) {
        buf[static_cast<std::size_t>(x)] = fill;
        buf[static_cast<std::size_t>(hp - 1) * wp + x] = fill;
    }
    for (int y = 0; y < h; ++y) {
        float* row = buf.data() + static_cast<std::size_t>(y + 1) * wp;
        row[0] = fill;
        std::memcpy(row + 1, in + static_cast<std::int64_t>(y) * w,
                    sizeof(float) * static_cast<std::size_t>(w));
        row[w + 1] = fill;
    }
    return buf.data();
}

// Taps are visited in row-major window order for both modes, so results
// match a scalar sliding-window evaluation bit for bit.
inline void pool3_avg_plane(const float* in, int h, int w, float* out) {
    const int wp = w + 2;
    const float* pad = pool_pad_plane(in, h, w, 0.0f);
    for (int y = 0; y < h; ++y) {
        const float* r0 = pad + static_cast<std::int64_t>(y) * wp;
        const float* r1 = r0 + wp;
        const float* r2 = r1 + wp;
        float* o = out + static_cast<std::int64_t>(y) * w;
        int x = 0;
        for (; x + 16 <= w; x += 16) {
            vf16 acc = loadu<vf16>(r0 + x);
            acc += loadu<vf16>(r0 + x + 1);
            acc += loadu<vf16>(r0 + x + 2);
            acc += loadu<vf16>(r1 + x);
            acc += loadu<vf16>(r1 + x + 1);
            acc += loadu<vf16>(r1 + x + 2);
            acc += loadu<vf16>(r2 + x);
            acc += loadu<vf16>(r2 + x + 1);
            acc += loadu<vf16>(r2 + x + 2);
            acc /= 9.0f;
            std::memcpy(o + x, &acc, sizeof(acc));
        }
        for (; x < w; ++x) {
            float acc = r0[x];
            acc += r0[x + 1];
            acc += r0[x + 2];
            acc += r1[x];
            acc += r1[x + 1];
            acc += r1[x + 2];
            acc += r2[x];
            acc += r2[x + 1];
            acc += r2[x + 2];
            o[x] = acc / 9.0f;
        }
    }
}

// If idx != nullptr, records the arg-max tap (0..8, window row-major);
// strict > keeps the first occurrence on ties. Padding is -inf and the
// center tap is always real, so padding never wins.
inline void pool3_max_plane(const float* in, int h, int w, float* out, std::uint8_t* idx) {
    const float ninf = -std::numeric_limits<float>::infinity();
    const int wp = w + 2;
    const float* pad = pool_pad_plane(in, h, w, ninf);
    for (int y = 0; y < h; ++y) {
        const float* rows[3] = {pad + static_cast<std::int64_t>(y) * wp,
                                pad + static_cast<std::int64_t>(y + 1) * wp,
                                pad + static_cast<std::int64_t>(y + 2) * wp};
        float* o = out + static_cast<std::int64_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float best = rows[0][x];
            int best_t = 0;
            for (int t = 1; t < 9; ++t) {
                const float v = rows[t / 3][x + t % 3];
                if (v > best) {
                    best = v;
                    best_t = t;
                }
            }
            o[x] = best;
            if (idx) idx[static_cast<std::int64_t>(y) * w + x] = static_cast<std::uint8_t>(best_t);
        }
    }
}

}  // namespace detail

// 3x3 pooling, stride 1, spatial size preserved. Average pooling uses zero
// padding with a fixed divisor of 9, which keeps the operator linear; max
// pooling pads with -inf so padding never wins.
inline Tensor pool3(const Tensor& input, PoolMode mode) {
    Tensor out(input.n, input.c, input.h, input.w);
    for (int s = 0; s < input.n; ++s)
        for (int ch = 0; ch < input.c; ++ch) {
            if (mode == PoolMode::avg)
                detail::pool3_avg_plane(input.plane_ptr(s, ch), input.h, input.w,
                                        out.plane_ptr(s, ch));
            else
                detail::pool3_max_plane(input.plane_ptr(s, ch), input.h, input.w,
                                        out.plane_ptr(s, ch), nullptr);
        }
    return out;
}

// Max-pool backward routes each gradient to the window's arg-max position
// (first occurrence in row-major scan on ties), recomputed from the input.
// Avg-pool backward is the same clipped box sum over /9 shares, i.e. the
// forward operator applied to grad_out.
inline Tensor pool3_backward(const Tensor& input, PoolMode mode, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "pool3_backward");
    if (mode == PoolMode::avg) return pool3(grad_out, PoolMode::avg);

    Tensor grad(input.n, input.c, input.h, input.w);
    std::vector<std::uint8_t> idx(static_cast<std::size_t>(input.plane()));
    std::vector<float> scratch_out(static_cast<std::size_t>(input.plane()));
    const int h = input.h, w = input.w;
    for (int s = 0; s < input.n; ++s)
        for (int ch = 0; ch < input.c; ++ch) {
            detail::pool3_max_plane(input.plane_ptr(s, ch), h, w, scratch_out.data(), idx.data());
            const float* go = grad_out.plane_ptr(s, ch);
            float* gi = grad.plane_ptr(s, ch);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const int t = idx[static_cast<std::int64_t>(y) * w + x];
                    gi[static_cast<std::int64_t>(y + t / 3 - 1) * w + (x + t % 3 - 1)] +=
                        go[static_cast<std::int64_t>(y) * w + x];
                }
        }
    return grad;
}

}  // namespace owafuse

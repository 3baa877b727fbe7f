#pragma once

#include <cstring>
#include <vector>

#include "owafuse/simd_util.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

namespace detail {

// Zero-padded copy of one sample, all channels: (c, h+2r, w+2r).
inline void pad_sample(const Tensor& x, int s, int r, float* out) {
    const int hp = x.h + 2 * r, wp = x.w + 2 * r;
    for (int ch = 0; ch < x.c; ++ch) {
        float* plane = out + static_cast<std::int64_t>(ch) * hp * wp;
        std::memset(plane, 0, sizeof(float) * static_cast<std::size_t>(r) * wp);
        std::memset(plane + static_cast<std::int64_t>(hp - r) * wp, 0,
                    sizeof(float) * static_cast<std::size_t>(r) * wp);
        const float* src = x.plane_ptr(s, ch);
        for (int y = 0; y < x.h; ++y) {
            float* row = plane + (static_cast<std::int64_t>(y) + r) * wp;
            for (int i = 0; i < r; ++i) row[i] = 0.0f;
            std::memcpy(row + r, src + static_cast<std::int64_t>(y) * x.w,
                        sizeof(float) * static_cast<std::size_t>(x.w));
            for (int i = 0; i < r; ++i) row[r + x.w + i] = 0.0f;
        }
    }
}

// Tap table of a small-kernel convolution over a padded plane stack: one
// entry per (dy, dx, cin), carrying the flat offset into the padded buffer
// and a weight column across the vectorized channel axis.
struct TapTable {
    std::vector<std::int32_t> offset;  // ntaps
    std::vector<float> weight;         // ntaps * cv
};

// Forward taps: cv = cout, x operand is the padded input.
inline TapTable build_fwd_taps(const Tensor& kernel, int hp, int wp) {
    const int k = kernel.h, r = k / 2, cin = kernel.c, cout = kernel.n;
    TapTable taps;
    taps.offset.resize(static_cast<std::size_t>(k) * k * cin);
    taps.weight.resize(taps.offset.size() * static_cast<std::size_t>(cout));
    int t = 0;
    for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
            for (int ci = 0; ci < cin; ++ci, ++t) {
                taps.offset[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(
                    (static_cast<std::int64_t>(ci) * hp + dy) * wp + dx -
                    (static_cast<std::int64_t>(r) * wp + r));
                for (int co = 0; co < cout; ++co)
                    taps.weight[static_cast<std::size_t>(t) * cout + co] = kernel.at(co, ci, dy, dx);
            }
    return taps;
}

// Input-gradient taps: cv = cin, x operand is the padded grad_out; the
// kernel is transposed in channels and point-reflected in space.
inline TapTable build_bwd_taps(const Tensor& kernel, int hp, int wp) {
    const int k = kernel.h, r = k / 2, cin = kernel.c, cout = kernel.n;
    TapTable taps;
    taps.offset.resize(static_cast<std::size_t>(k) * k * cout);
    taps.weight.resize(taps.offset.size() * static_cast<std::size_t>(cin));
    int t = 0;
    for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
            for (int co = 0; co < cout; ++co, ++t) {
                taps.offset[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(
                    (static_cast<std::int64_t>(co) * hp + dy) * wp + dx -
                    (static_cast<std::int64_t>(r) * wp + r));
                for (int ci = 0; ci < cin; ++ci)
                    taps.weight[static_cast<std::size_t>(t) * cin + ci] =
                        kernel.at(co, ci, k - 1 - dy, k - 1 - dx);
            }
    return taps;
}

// Accumulators live in one vector register per pixel; four pixels share a
// pass over the weight table. The tap loop is chunked so the active slice
// of the table stays L1-resident across a whole row span, with partial
// sums parked in a small row buffer between chunks.
template <int CV>
inline void tap_kernel_fixed(const float* padded, const std::int32_t* offset, const float* weight,
                             int ntaps, const float* bias, float* out, std::int64_t out_stride,
                             int h, int w, int wp, int r) {
    using V = typename vec_of<CV>::type;
    const V bias_v = loadu<V>(bias);
    constexpr int kChunk = 240;  // 240 taps * CV floats stays within L1
    constexpr int kSpan = 128;
    V accbuf[kSpan];
    for (int y = 0; y < h; ++y) {
        const float* xrow = padded + (static_cast<std::int64_t>(y) + r) * wp + r;
        const std::int64_t orow = static_cast<std::int64_t>(y) * w;
        for (int x0 = 0; x0 < w; x0 += kSpan) {
            const int span = w - x0 < kSpan ? w - x0 : kSpan;
            for (int i = 0; i < span; ++i) accbuf[i] = bias_v;
            for (int t0 = 0; t0 < ntaps; t0 += kChunk) {
                const int tn = ntaps - t0 < kChunk ? ntaps - t0 : kChunk;
                const std::int32_t* off = offset + t0;
                const float* wt = weight + static_cast<std::int64_t>(t0) * CV;
                int i = 0;
                for (; i + 4 <= span; i += 4) {
                    V a0 = accbuf[i], a1 = accbuf[i + 1], a2 = accbuf[i + 2], a3 = accbuf[i + 3];
                    const float* xp = xrow + x0 + i;
                    for (int t = 0; t < tn; ++t) {
                        const V wv = loadu<V>(wt + static_cast<std::int64_t>(t) * CV);
                        const float* xo = xp + off[t];
                        a0 += wv * xo[0];
                        a1 += wv * xo[1];
                        a2 += wv * xo[2];
                        a3 += wv * xo[3];
                    }
                    accbuf[i] = a0;
                    accbuf[i + 1] = a1;
                    accbuf[i + 2] = a2;
                    accbuf[i + 3] = a3;
                }
                for (; i < span; ++i) {
                    V acc = accbuf[i];
                    const float* xp = xrow + x0 + i;
                    for (int t = 0; t < tn; ++t)
                        acc += loadu<V>(wt + static_cast<std::int64_t>(t) * CV) * xp[off[t]];
                    accbuf[i] = acc;
                }
            }
            for (int j = 0; j < CV; ++j) {
                float* o = out + j * out_stride + orow + x0;
                for (int i = 0; i < span; ++i) o[i] = accbuf[i][j];
            }
        }
    }
}

// Scalar path for a single output channel (the head convolution).
template <>
inline void tap_kernel_fixed<1>(const float* padded, const std::int32_t* offset,
                                const float* weight, int ntaps, const float* bias, float* out,
                                std::int64_t, int h, int w, int wp, int r) {
    for (int y = 0; y < h; ++y) {
        const float* xrow = padded + (static_cast<std::int64_t>(y) + r) * wp + r;
        for (int x = 0; x < w; ++x) {
            float acc = bias[0];
            const float* xp = xrow + x;
            for (int t = 0; t < ntaps; ++t) acc += weight[t] * xp[offset[t]];
            out[static_cast<std::int64_t>(y) * w + x] = acc;
        }
    }
}

inline void tap_kernel_generic(const float* padded, const std::int32_t* offset, const float* weight,
                               int ntaps, int cv, const float* bias, float* out,
                               std::int64_t out_stride, int h, int w, int wp, int r) {
    std::vector<float> acc(static_cast<std::size_t>(cv));
    for (int y = 0; y < h; ++y) {
        const float* xrow = padded + (static_cast<std::int64_t>(y) + r) * wp + r;
        const std::int64_t orow = static_cast<std::int64_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            for (int j = 0; j < cv; ++j) acc[static_cast<std::size_t>(j)] = bias[j];
            const float* xp = xrow + x;
            for (int t = 0; t < ntaps; ++t) {
                const float xv = xp[offset[t]];
                const float* wv = weight + static_cast<std::int64_t>(t) * cv;
                for (int j = 0; j < cv; ++j) acc[static_cast<std::size_t>(j)] += wv[j] * xv;
            }
            for (int j = 0; j < cv; ++j) out[j * out_stride + orow + x] = acc[static_cast<std::size_t>(j)];
        }
    }
}

inline void run_tap_kernel(const float* padded, const TapTable& taps, int cv, const float* bias,
                           float* out, std::int64_t out_stride, int h, int w, int wp, int r) {
    const int ntaps = static_cast<int>(taps.offset.size());
    switch (cv) {
        case 16:
            tap_kernel_fixed<16>(padded, taps.offset.data(), taps.weight.data(), ntaps, bias, out,
                                 out_stride, h, w, wp, r);
            break;
        case 8:
            tap_kernel_fixed<8>(padded, taps.offset.data(), taps.weight.data(), ntaps, bias, out,
                                out_stride, h, w, wp, r);
            break;
        case 4:
            tap_kernel_fixed<4>(padded, taps.offset.data(), taps.weight.data(), ntaps, bias, out,
                                out_stride, h, w, wp, r);
            break;
        case 1:
            tap_kernel_fixed<1>(padded, taps.offset.data(), taps.weight.data(), ntaps, bias, out,
                                out_stride, h, w, wp, r);
            break;
        default:
            tap_kernel_generic(padded, taps.offset.data(), taps.weight.data(), ntaps, cv, bias, out,
                               out_stride, h, w, wp, r);
    }
}

// ---- 1x1 path ----
// A 1x1 convolution is a channel mix; no padding, output vectorized over
// pixels with one accumulator register per output channel in the block.

template <int B>
inline void mix1x1_block(const float* x, std::int64_t xstride, int cin, const float* w, int wstride,
                         const float* bias, float* out, std::int64_t ostride, std::int64_t npx) {
    vf16 acc[B];
    std::int64_t p = 0;
    for (; p + 16 <= npx; p += 16) {
        for (int b = 0; b < B; ++b) acc[b] = vf16{} + bias[b];
        for (int ci = 0; ci < cin; ++ci) {
            const vf16 xv = loadu<vf16>(x + ci * xstride + p);
            for (int b = 0; b < B; ++b) acc[b] += xv * w[b * wstride + ci];
        }
        for (int b = 0; b < B; ++b) std::memcpy(out + b * ostride + p, &acc[b], sizeof(vf16));
    }
    for (; p < npx; ++p) {
        for (int b = 0; b < B; ++b) {
            float a = bias[b];
            for (int ci = 0; ci < cin; ++ci) a += w[b * wstride + ci] * x[ci * xstride + p];
            out[b * ostride + p] = a;
        }
    }
}

// w is row-major (cout x cin) with row stride wstride.
inline void mix1x1(const float* x, std::int64_t xstride, int cin, int cout, const float* w,
                   int wstride, const float* bias, float* out, std::int64_t ostride,
                   std::int64_t npx) {
    int co = 0;
    for (; co + 16 <= cout; co += 16)
        mix1x1_block<16>(x, xstride, cin, w + static_cast<std::int64_t>(co) * wstride, wstride,
                         bias + co, out + co * ostride, ostride, npx);
    for (; co + 4 <= cout; co += 4)
        mix1x1_block<4>(x, xstride, cin, w + static_cast<std::int64_t>(co) * wstride, wstride,
                        bias + co, out + co * ostride, ostride, npx);
    for (; co < cout; ++co)
        mix1x1_block<1>(x, xstride, cin, w + static_cast<std::int64_t>(co) * wstride, wstride,
                        bias + co, out + co * ostride, ostride, npx);
}

// ---- weight gradients ----
// gw[dy][dx] accumulates <grad_out plane, shifted padded input plane> with
// one vector accumulator per spatial offset, held in registers for a whole
// plane pass. K == 7 is split over two dy ranges to stay within the
// register file.

template <int K, int DY0, int DY1>
inline void gw_plane_pass(const float* gy, const float* xpad, int h, int w, int wp, double* gw) {
    vf16 acc[(DY1 - DY0) * K];
    for (int i = 0; i < (DY1 - DY0) * K; ++i) acc[i] = vf16{};
    float tail[(DY1 - DY0) * K] = {};
    for (int y = 0; y < h; ++y) {
        const float* gyrow = gy + static_cast<std::int64_t>(y) * w;
        const float* xrow = xpad + static_cast<std::int64_t>(y) * wp;
        int x = 0;
        for (; x + 16 <= w; x += 16) {
            const vf16 gyv = loadu<vf16>(gyrow + x);
            for (int dy = DY0; dy < DY1; ++dy) {
                const float* xr = xrow + static_cast<std::int64_t>(dy) * wp + x;
                for (int dx = 0; dx < K; ++dx)
                    acc[(dy - DY0) * K + dx] += gyv * loadu<vf16>(xr + dx);
            }
        }
        for (; x < w; ++x) {
            const float gv = gyrow[x];
            for (int dy = DY0; dy < DY1; ++dy) {
                const float* xr = xrow + static_cast<std::int64_t>(dy) * wp + x;
                for (int dx = 0; dx < K; ++dx) tail[(dy - DY0) * K + dx] += gv * xr[dx];
            }
        }
    }
    for (int dy = DY0; dy < DY1; ++dy)
        for (int dx = 0; dx < K; ++dx) {
            const int i = (dy - DY0) * K + dx;
            double total = tail[i];
            for (int j = 0; j < 16; ++j) total += acc[i][j];
            gw[dy * K + dx] += total;
        }
}

inline void gw_plane_generic(const float* gy, const float* xpad, int h, int w, int wp, int k,
                             double* gw) {
    for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
            double acc = 0.0;
            for (int y = 0; y < h; ++y)
                acc += dot_lanes(gy + static_cast<std::int64_t>(y) * w,
                                 xpad + (static_cast<std::int64_t>(y) + dy) * wp + dx, w);
            gw[dy * k + dx] += acc;
        }
}

// xpad points at the padded plane for one channel; gy at the unpadded
// grad_out plane for one channel.
inline void gw_plane(const float* gy, const float* xpad, int h, int w, int wp, int k, double* gw) {
    switch (k) {
        case 1: gw_plane_pass<1, 0, 1>(gy, xpad, h, w, wp, gw); break;
        case 3: gw_plane_pass<3, 0, 3>(gy, xpad, h, w, wp, gw); break;
        case 5: gw_plane_pass<5, 0, 5>(gy, xpad, h, w, wp, gw); break;
        case 7:
            gw_plane_pass<7, 0, 4>(gy, xpad, h, w, wp, gw);
            gw_plane_pass<7, 4, 7>(gy, xpad, h, w, wp, gw);
            break;
        default: gw_plane_generic(gy, xpad, h, w, wp, k, gw);
    }
}

inline thread_local std::vector<float> conv_pad_scratch;

inline void check_conv_args(const Tensor& input, const Tensor& kernel,
                            const std::vector<float>& bias) {
    if (kernel.h != kernel.w)
        throw contract_error("conv2d: kernel must be square, got " + kernel.shape_str());
    if (kernel.h % 2 == 0 || kernel.h < 1)
        throw contract_error("conv2d: kernel size must be odd, got " + std::to_string(kernel.h));
    if (kernel.c != input.c)
        throw contract_error("conv2d: kernel cin " + std::to_string(kernel.c) +
                             " != input channels " + std::to_string(input.c) + " for input " +
                             input.shape_str());
    if (static_cast<int>(bias.size()) != kernel.n)
        throw contract_error("conv2d: bias size " + std::to_string(bias.size()) +
                             " != cout " + std::to_string(kernel.n));
}

}  // namespace detail

// Stride-1 cross-correlation with zero padding of (k-1)/2, so the spatial
// size is preserved. kernel shape is (cout, cin, k, k).
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::vector<float>& bias) {
    detail::check_conv_args(input, kernel, bias);
    const int k = kernel.h, r = k / 2, cin = input.c, cout = kernel.n;
    Tensor out(input.n, cout, input.h, input.w);
    if (k == 1) {
        for (int s = 0; s < input.n; ++s)
            detail::mix1x1(input.plane_ptr(s, 0), input.plane(), cin, cout, kernel.data.data(), cin,
                           bias.data(), out.plane_ptr(s, 0), out.plane(), out.plane());
        return out;
    }
    const int hp = input.h + 2 * r, wp = input.w + 2 * r;
    const detail::TapTable taps = detail::build_fwd_taps(kernel, hp, wp);
    auto& padded = detail::conv_pad_scratch;
    padded.resize(static_cast<std::size_t>(cin) * hp * wp);
    for (int s = 0; s < input.n; ++s) {
        detail::pad_sample(input, s, r, padded.data());
        detail::run_tap_kernel(padded.data(), taps, cout, bias.data(), out.plane_ptr(s, 0),
                               out.plane(), input.h, input.w, wp, r);
    }
    return out;
}

struct Conv2dGrads {
    Tensor input;             // dL/dinput
    Tensor kernel;            // dL/dkernel
    std::vector<float> bias;  // dL/dbias
};

// Exact analytic gradients of conv2d.
inline Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel,
                                   const std::vector<float>& bias, const Tensor& grad_out) {
    detail::check_conv_args(input, kernel, bias);
    if (grad_out.n != input.n || grad_out.c != kernel.n || grad_out.h != input.h ||
        grad_out.w != input.w)
        throw contract_error("conv2d_backward: grad_out " + grad_out.shape_str() +
                             " does not match forward output (" + std::to_string(input.n) + "," +
                             std::to_string(kernel.n) + "," + std::to_string(input.h) + "," +
                             std::to_string(input.w) + ")");

    const int k = kernel.h, r = k / 2, cin = input.c, cout = kernel.n;
    const int h = input.h, w = input.w;
    const int hp = h + 2 * r, wp = w + 2 * r;

    Conv2dGrads g;
    g.input = Tensor(input.n, cin, h, w);
    g.kernel = Tensor(cout, cin, k, k);
    g.bias.assign(static_cast<std::size_t>(cout), 0.0f);

    for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (int s = 0; s < grad_out.n; ++s)
            acc += detail::sum_lanes(grad_out.plane_ptr(s, co), grad_out.plane());
        g.bias[static_cast<std::size_t>(co)] = static_cast<float>(acc);
    }

    auto& padded = detail::conv_pad_scratch;
    std::vector<double> gw(static_cast<std::size_t>(cout) * cin * k * k, 0.0);

    if (k == 1) {
        std::vector<float> wt(static_cast<std::size_t>(cin) * cout);  // transposed (cin x cout)
        for (int co = 0; co < cout; ++co)
            for (int ci = 0; ci < cin; ++ci)
                wt[static_cast<std::size_t>(ci) * cout + co] = kernel.data[static_cast<std::size_t>(co) * cin + ci];
        const std::vector<float> zeros(static_cast<std::size_t>(cin), 0.0f);
        for (int s = 0; s < input.n; ++s) {
            detail::mix1x1(grad_out.plane_ptr(s, 0), grad_out.plane(), cout, cin, wt.data(), cout,
                           zeros.data(), g.input.plane_ptr(s, 0), g.input.plane(), g.input.plane());
            for (int co = 0; co < cout; ++co)
                for (int ci = 0; ci < cin; ++ci)
                    detail::gw_plane(grad_out.plane_ptr(s, co), input.plane_ptr(s, ci), h, w, w, 1,
                                     gw.data() + (static_cast<std::size_t>(co) * cin + ci));
        }
    } else {
        const detail::TapTable taps = detail::build_bwd_taps(kernel, hp, wp);
        const std::vector<float> zeros(static_cast<std::size_t>(cin), 0.0f);
        padded.resize(static_cast<std::size_t>(std::max(cout, cin)) * hp * wp);
        for (int s = 0; s < input.n; ++s) {
            detail::pad_sample(grad_out, s, r, padded.data());
            detail::run_tap_kernel(padded.data(), taps, cin, zeros.data(), g.input.plane_ptr(s, 0),
                                   g.input.plane(), h, w, wp, r);
        }
        for (int s = 0; s < input.n; ++s) {
            detail::pad_sample(input, s, r, padded.data());
            for (int co = 0; co < cout; ++co)
                for (int ci = 0; ci < cin; ++ci)
                    detail::gw_plane(grad_out.plane_ptr(s, co),
                                     padded.data() + static_cast<std::int64_t>(ci) * hp * wp, h, w,
                                     wp, k,
                                     gw.data() + (static_cast<std::size_t>(co) * cin + ci) * k * k);
        }
    }
    for (std::size_t i = 0; i < gw.size(); ++i) g.kernel.data[i] = static_cast<float>(gw[i]);
    return g;
}

}  // namespace owafuse

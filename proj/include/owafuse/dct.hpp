#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "owafuse/raster.hpp"

namespace owafuse {

namespace detail {

// Orthonormal DCT-II basis for length 8: basis[u][x] = a(u) cos((2x+1)u pi/16),
// a(0) = sqrt(1/8), a(u>0) = 1/2. This equals the JPEG reference transform.
inline const std::array<std::array<double, 8>, 8>& dct8_basis() {
    static const auto basis = []() {
        std::array<std::array<double, 8>, 8> b{};
        for (int u = 0; u < 8; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            for (int x = 0; x < 8; ++x)
                b[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    a * std::cos((2.0 * x + 1.0) * u * 3.14159265358979323846 / 16.0);
        }
        return b;
    }();
    return basis;
}

// in/out are 8x8 row-major; separable C * X * C^T.
inline void dct8_block(const double* in, double* out) {
    const auto& c = dct8_basis();
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += c[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * in[y * 8 + x];
            tmp[u * 8 + x] = acc;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * c[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
            out[u * 8 + v] = acc;
        }
}

inline void idct8_block(const double* in, double* out) {
    const auto& c = dct8_basis();
    double tmp[64];
    for (int y = 0; y < 8; ++y)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += c[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * in[u * 8 + v];
            tmp[y * 8 + v] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += tmp[y * 8 + v] * c[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
            out[y * 8 + x] = acc;
        }
}

// Zigzag scan order of an 8x8 block; entries are flat indices v*8+u.
inline const std::array<int, 64>& zigzag_order() {
    static const auto order = []() {
        std::array<int, 64> z{};
        int idx = 0;
        for (int s = 0; s <= 14; ++s) {
            if (s % 2 == 0) {
                for (int v = std::min(s, 7); v >= std::max(0, s - 7); --v)
                    z[static_cast<std::size_t>(idx++)] = v * 8 + (s - v);
            } else {
                for (int v = std::max(0, s - 7); v <= std::min(s, 7); ++v)
                    z[static_cast<std::size_t>(idx++)] = v * 8 + (s - v);
            }
        }
        return z;
    }();
    return order;
}

}  // namespace detail

// Grid-aligned 8x8 block DCT coefficients of a luminance image.
struct BlockDct {
    int blocks_y = 0, blocks_x = 0;
    std::vector<float> coeff;  // (by, bx, 64) with v*8+u inside a block

    float at(int by, int bx, int v, int u) const {
        return coeff[(static_cast<std::size_t>(by) * blocks_x + bx) * 64 +
                     static_cast<std::size_t>(v) * 8 + u];
    }
};

// Per-block orthonormal DCT-II of (pixel - 128); bottom/right excess beyond
// multiples of 8 is discarded.
inline BlockDct block_dct8(const LumaImage& luma) {
    if (luma.h < 8 || luma.w < 8)
        throw contract_error("block_dct8: image must be at least 8x8, got " +
                             std::to_string(luma.h) + "x" + std::to_string(luma.w));
    BlockDct out;
    out.blocks_y = luma.h / 8;
    out.blocks_x = luma.w / 8;
    out.coeff.resize(static_cast<std::size_t>(out.blocks_y) * out.blocks_x * 64);
    double in[64], tf[64];
    for (int by = 0; by < out.blocks_y; ++by)
        for (int bx = 0; bx < out.blocks_x; ++bx) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    in[y * 8 + x] = static_cast<double>(luma.at(by * 8 + y, bx * 8 + x)) - 128.0;
            detail::dct8_block(in, tf);
            float* dst = out.coeff.data() + (static_cast<std::size_t>(by) * out.blocks_x + bx) * 64;
            for (int i = 0; i < 64; ++i) dst[i] = static_cast<float>(tf[i]);
        }
    return out;
}

// Inverse transform (+128), for round-trip verification.
inline LumaImage block_idct8(const BlockDct& dct) {
    LumaImage out(dct.blocks_y * 8, dct.blocks_x * 8);
    double in[64], px[64];
    for (int by = 0; by < dct.blocks_y; ++by)
        for (int bx = 0; bx < dct.blocks_x; ++bx) {
            const float* src = dct.coeff.data() + (static_cast<std::size_t>(by) * dct.blocks_x + bx) * 64;
            for (int i = 0; i < 64; ++i) in[i] = src[i];
            detail::idct8_block(in, px);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    out.at(by * 8 + y, bx * 8 + x) = static_cast<float>(px[y * 8 + x] + 128.0);
        }
    return out;
}

}  // namespace owafuse

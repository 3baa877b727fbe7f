#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "owafuse/dct.hpp"
#include "owafuse/raster.hpp"

namespace owafuse {

namespace detail {

// Annex K reference quantization tables.
inline const int* jpeg_luma_table() {
    static const int t[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                              14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                              18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                              49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    return t;
}

inline const int* jpeg_chroma_table() {
    static const int t[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                              24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
    return t;
}

// IJG quality scaling of a reference table.
inline std::array<int, 64> scaled_quant_table(const int* base, int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> q{};
    for (int i = 0; i < 64; ++i)
        q[static_cast<std::size_t>(i)] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
    return q;
}

// One channel: pad to multiples of 8 by edge replication, blockwise
// DCT -> quantize -> dequantize -> IDCT, crop back.
inline void jpeg_channel_round_trip(std::vector<float>& ch, int h, int w,
                                    const std::array<int, 64>& q) {
    const int hp = (h + 7) / 8 * 8, wp = (w + 7) / 8 * 8;
    std::vector<double> plane(static_cast<std::size_t>(hp) * wp);
    for (int y = 0; y < hp; ++y) {
        const int sy = y < h ? y : h - 1;
        for (int x = 0; x < wp; ++x) {
            const int sx = x < w ? x : w - 1;
            plane[static_cast<std::size_t>(y) * wp + x] =
                static_cast<double>(ch[static_cast<std::size_t>(sy) * w + sx]) - 128.0;
        }
    }
    double block[64], tf[64];
    for (int by = 0; by < hp / 8; ++by)
        for (int bx = 0; bx < wp / 8; ++bx) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y * 8 + x] = plane[static_cast<std::size_t>(by * 8 + y) * wp + bx * 8 + x];
            dct8_block(block, tf);
            for (int i = 0; i < 64; ++i)
                tf[i] = std::nearbyint(tf[i] / q[static_cast<std::size_t>(i)]) *
                        q[static_cast<std::size_t>(i)];
            idct8_block(tf, block);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    plane[static_cast<std::size_t>(by * 8 + y) * wp + bx * 8 + x] = block[y * 8 + x];
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            ch[static_cast<std::size_t>(y) * w + x] =
                static_cast<float>(plane[static_cast<std::size_t>(y) * wp + x] + 128.0);
}

}  // namespace detail

// Baseline-JPEG lossy round trip: BT.601 YCbCr, 8x8 DCT quantization with
// the Annex K tables at IJG quality scaling (4:4:4, no entropy stage --
// entropy coding is lossless and does not affect decoded pixels).
// Output dimensions equal input dimensions.
inline RgbImage jpeg_round_trip(const RgbImage& img, int quality) {
    if (quality < 50 || quality > 95)
        throw contract_error("jpeg_round_trip: quality " + std::to_string(quality) +
                             " outside [50, 95]");
    if (img.h < 1 || img.w < 1) throw contract_error("jpeg_round_trip: empty image");

    const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
    std::vector<float> Y(n), Cb(n), Cr(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float r = img.data[i * 3], g = img.data[i * 3 + 1], b = img.data[i * 3 + 2];
        Y[i] = 0.299f * r + 0.587f * g + 0.114f * b;
        Cb[i] = -0.168736f * r - 0.331264f * g + 0.5f * b + 128.0f;
        Cr[i] = 0.5f * r - 0.418688f * g - 0.081312f * b + 128.0f;
    }
    const auto ql = detail::scaled_quant_table(detail::jpeg_luma_table(), quality);
    const auto qc = detail::scaled_quant_table(detail::jpeg_chroma_table(), quality);
    detail::jpeg_channel_round_trip(Y, img.h, img.w, ql);
    detail::jpeg_channel_round_trip(Cb, img.h, img.w, qc);
    detail::jpeg_channel_round_trip(Cr, img.h, img.w, qc);

    RgbImage out(img.h, img.w);
    for (std::size_t i = 0; i < n; ++i) {
        const float y = Y[i], cb = Cb[i] - 128.0f, cr = Cr[i] - 128.0f;
        const float rgb[3] = {y + 1.402f * cr, y - 0.344136f * cb - 0.714136f * cr,
                              y + 1.772f * cb};
        for (int c = 0; c < 3; ++c)
            out.data[i * 3 + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(
                std::clamp(static_cast<int>(std::lround(rgb[c])), 0, 255));
    }
    return out;
}

}  // namespace owafuse

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "owafuse/dct.hpp"
#include "owafuse/fmap.hpp"
#include "owafuse/raster.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

// Single-channel localization map in [0,1] with provenance label.
struct FeatureMap {
    int h = 0, w = 0;
    std::vector<float> values;
    std::string producer;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, float fill, std::string producer_)
        : h(h_), w(w_), values(static_cast<std::size_t>(h_) * w_, fill),
          producer(std::move(producer_)) {}
    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * w + x]; }
};

inline const std::vector<std::string>& builtin_producers() {
    static const std::vector<std::string> names = {"adq1", "blk", "noise"};
    return names;
}

namespace detail {

// Min-max over the whole map; a degenerate range becomes the no-evidence
// constant 0.5.
inline void minmax_normalize(std::vector<float>& v) {
    float lo = v[0], hi = v[0];
    for (float x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi - lo < 1e-12f) {
        std::fill(v.begin(), v.end(), 0.5f);
        return;
    }
    const float inv = 1.0f / (hi - lo);
    for (float& x : v) x = (x - lo) * inv;
}

// Spreads a stride-8 cell grid to pixel resolution by replication. Cell
// (cy, cx) takes the window whose center sits on that cell; border cells
// clamp to the nearest window.
inline FeatureMap cells_to_pixels(const std::vector<float>& cells, int n_wy, int n_wx,
                                  int center_off, int h, int w, const std::string& producer) {
    FeatureMap map(h, w, 0.5f, producer);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int wy = std::clamp(y / 8 - center_off, 0, n_wy - 1);
            const int wx = std::clamp(x / 8 - center_off, 0, n_wx - 1);
            map.values[static_cast<std::size_t>(y) * w + x] =
                cells[static_cast<std::size_t>(wy) * n_wx + wx];
        }
    return map;
}

}  // namespace detail

// Simplified transform-domain double-quantization detector. Recomputed
// grid-aligned DCT coefficients are histogrammed per frequency; a frequency
// participates only when its histogram shows a periodic comb. A block's
// tamper evidence is how far its coefficients sit below the local histogram
// mass (off-comb bins), accumulated as a log-likelihood ratio and squashed
// to (0,1). Degenerate statistics abstain into the constant 0.5 map.
inline FeatureMap adq1_map(const RgbImage& image) {
    const std::string label = "adq1";
    if (image.h < 8 || image.w < 8) return FeatureMap(image.h, image.w, 0.5f, label);

    const LumaImage luma = luminance(image);
    const BlockDct dct = block_dct8(luma);
    const int nblocks = dct.blocks_y * dct.blocks_x;
    constexpr int kFreqs = 15;       // zigzag AC frequencies 1..15
    constexpr int kBins = 127;       // histogram range [-127, 127]
    constexpr int kMinMass = 64;     // minimum off-zero mass to even look
    constexpr double kCombRatio = 1.2;

    const auto& zz = detail::zigzag_order();
    std::vector<double> llr(static_cast<std::size_t>(nblocks), 0.0);
    bool any_active = false;

    std::vector<int> bins(static_cast<std::size_t>(nblocks));
    std::vector<double> hist(2 * kBins + 1), smooth(2 * kBins + 1);
    for (int f = 1; f <= kFreqs; ++f) {
        const int coeff_idx = zz[static_cast<std::size_t>(f)];
        std::fill(hist.begin(), hist.end(), 0.0);
        for (int b = 0; b < nblocks; ++b) {
            const float c = dct.coeff[static_cast<std::size_t>(b) * 64 + coeff_idx];
            const int v = std::clamp(static_cast<int>(std::lround(c)), -kBins, kBins);
            bins[static_cast<std::size_t>(b)] = v;
            hist[static_cast<std::size_t>(v + kBins)] += 1.0;
        }

        double total_offzero = 0.0;
        for (int b = -kBins; b <= kBins; ++b)
            if (b != 0) total_offzero += hist[static_cast<std::size_t>(b + kBins)];
        if (total_offzero < kMinMass) continue;

        // period search: prominence selects, mean comb occupancy gates
        double best_prom = -1.0;
        double best_mean_comb = 0.0;
        for (int p = 2; p <= 16; ++p) {
            double prom = 0.0, comb_mass = 0.0;
            int n_comb = 0;
            for (int k = 1; k * p <= kBins; ++k) {
                for (int sign : {1, -1}) {
                    const int b = sign * k * p;
                    const double hb = hist[static_cast<std::size_t>(b + kBins)];
                    const double left = hist[static_cast<std::size_t>(b - 1 + kBins)];
                    const double right = hist[static_cast<std::size_t>(b + 1 + kBins)];
                    prom += hb - 0.5 * (left + right);
                    comb_mass += hb;
                    ++n_comb;
                }
            }
            if (n_comb == 0) continue;
            if (prom > best_prom) {
                best_prom = prom;
                best_mean_comb = comb_mass / n_comb;
            }
        }
        const double baseline = total_offzero / (2.0 * kBins);  // no-period occupancy
        if (best_mean_comb <= kCombRatio * baseline) continue;

        // 5-bin moving average for the smoothed (comb-free) reference
        for (int b = 0; b <= 2 * kBins; ++b) {
            double acc = 0.0;
            int n = 0;
            for (int d = -2; d <= 2; ++d) {
                const int i = b + d;
                if (i < 0 || i > 2 * kBins) continue;
                acc += hist[static_cast<std::size_t>(i)];
                ++n;
            }
            smooth[static_cast<std::size_t>(b)] = acc / n;
        }

        any_active = true;
        for (int b = 0; b < nblocks; ++b) {
            const int bin = bins[static_cast<std::size_t>(b)] + kBins;
            const double h = hist[static_cast<std::size_t>(bin)];
            const double s = std::max(1.0, smooth[static_cast<std::size_t>(bin)]);
            // off-comb bins (h below local mass) push toward tampered
            llr[static_cast<std::size_t>(b)] += std::log(s) - std::log(h);
        }
    }

    if (!any_active) return FeatureMap(image.h, image.w, 0.5f, label);

    FeatureMap map(image.h, image.w, 0.5f, label);
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
            const int by = std::min(y / 8, dct.blocks_y - 1);
            const int bx = std::min(x / 8, dct.blocks_x - 1);
            const double v = llr[static_cast<std::size_t>(by) * dct.blocks_x + bx];
            map.values[static_cast<std::size_t>(y) * image.w + x] =
                static_cast<float>(1.0 / (1.0 + std::exp(-v)));
        }
    return map;
}

// Spatial blocking-grid inconsistency detector. Second differences of
// luminance are split into block-boundary positions (x or y congruent to
// 7 mod 8) and interior positions; windows where boundary energy does not
// dominate are grid-inconsistent and end up near 1 after inversion and
// min-max normalization.
inline FeatureMap blk_map(const RgbImage& image) {
    const std::string label = "blk";
    constexpr int kWin = 32, kStride = 8;
    if (image.h < kWin || image.w < kWin) return FeatureMap(image.h, image.w, 0.5f, label);

    const LumaImage luma = luminance(image);
    const int h = luma.h, w = luma.w;
    // |second difference| along each axis; index by the center pixel
    std::vector<float> dh(static_cast<std::size_t>(h) * w, 0.0f);
    std::vector<float> dv(static_cast<std::size_t>(h) * w, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 1; x < w - 1; ++x)
            dh[static_cast<std::size_t>(y) * w + x] =
                std::fabs(luma.at(y, x - 1) - 2.0f * luma.at(y, x) + luma.at(y, x + 1));
    for (int y = 1; y < h - 1; ++y)
        for (int x = 0; x < w; ++x)
            dv[static_cast<std::size_t>(y) * w + x] =
                std::fabs(luma.at(y - 1, x) - 2.0f * luma.at(y, x) + luma.at(y + 1, x));

    const int n_wy = (h - kWin) / kStride + 1;
    const int n_wx = (w - kWin) / kStride + 1;
    std::vector<float> cells(static_cast<std::size_t>(n_wy) * n_wx);
    for (int wy = 0; wy < n_wy; ++wy)
        for (int wx = 0; wx < n_wx; ++wx) {
            double boundary = 0.0, interior = 0.0;
            std::int64_t nb = 0, ni = 0;
            for (int y = wy * kStride; y < wy * kStride + kWin; ++y)
                for (int x = wx * kStride; x < wx * kStride + kWin; ++x) {
                    const float fh = dh[static_cast<std::size_t>(y) * w + x];
                    const float fv = dv[static_cast<std::size_t>(y) * w + x];
                    if (x % 8 == 7) {
                        boundary += fh;
                        ++nb;
                    } else {
                        interior += fh;
                        ++ni;
                    }
                    if (y % 8 == 7) {
                        boundary += fv;
                        ++nb;
                    } else {
                        interior += fv;
                        ++ni;
                    }
                }
            const double b = nb > 0 ? boundary / nb : 0.0;
            const double i = ni > 0 ? interior / ni : 0.0;
            const double score = b / (b + i + 1e-6);
            cells[static_cast<std::size_t>(wy) * n_wx + wx] = static_cast<float>(-score);
        }
    detail::minmax_normalize(cells);
    return detail::cells_to_pixels(cells, n_wy, n_wx, kWin / (2 * kStride), h, w, label);
}

// Noise-level stand-in for a noise-based splicing detector: the median
// residual averaged over windows, min-max normalized.
inline FeatureMap noise_residual_map(const RgbImage& image) {
    const std::string label = "noise";
    constexpr int kWin = 16, kStride = 8;
    if (image.h < kWin || image.w < kWin) return FeatureMap(image.h, image.w, 0.5f, label);

    const LumaImage luma = luminance(image);
    const int h = luma.h, w = luma.w;
    std::vector<float> resid(static_cast<std::size_t>(h) * w);
    float window[9];
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    window[n++] = luma.at(yy, xx);
                }
            std::nth_element(window, window + 4, window + 9);
            resid[static_cast<std::size_t>(y) * w + x] = std::fabs(luma.at(y, x) - window[4]);
        }

    const int n_wy = (h - kWin) / kStride + 1;
    const int n_wx = (w - kWin) / kStride + 1;
    std::vector<float> cells(static_cast<std::size_t>(n_wy) * n_wx);
    for (int wy = 0; wy < n_wy; ++wy)
        for (int wx = 0; wx < n_wx; ++wx) {
            double acc = 0.0;
            for (int y = wy * kStride; y < wy * kStride + kWin; ++y)
                for (int x = wx * kStride; x < wx * kStride + kWin; ++x)
                    acc += resid[static_cast<std::size_t>(y) * w + x];
            cells[static_cast<std::size_t>(wy) * n_wx + wx] =
                static_cast<float>(acc / (kWin * kWin));
        }
    detail::minmax_normalize(cells);
    return detail::cells_to_pixels(cells, n_wy, n_wx, kWin / (2 * kStride), h, w, label);
}

// Reads an externally computed single-channel FMAP, clamps to [0,1] and
// bilinearly resizes (corner-aligned) when the stored size differs.
inline FeatureMap load_external_map(const std::string& path, int h, int w,
                                    const std::string& name) {
    const FmapData data = read_fmap(path);
    if (data.c != 1)
        throw format_error("external map must have 1 channel, got " + std::to_string(data.c) +
                           " in " + path);
    FeatureMap map(h, w, 0.0f, "external:" + name);
    if (data.h == h && data.w == w) {
        for (std::size_t i = 0; i < map.values.size(); ++i)
            map.values[i] = std::clamp(data.values[i], 0.0f, 1.0f);
        return map;
    }
    const double sy = h > 1 ? static_cast<double>(data.h - 1) / (h - 1) : 0.0;
    const double sx = w > 1 ? static_cast<double>(data.w - 1) / (w - 1) : 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fy = y * sy, fx = x * sx;
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, data.h - 1), x1 = std::min(x0 + 1, data.w - 1);
            const double ty = fy - y0, tx = fx - x0;
            const auto v = [&](int yy, int xx) {
                return static_cast<double>(data.values[static_cast<std::size_t>(yy) * data.w + xx]);
            };
            const double val = (1 - ty) * ((1 - tx) * v(y0, x0) + tx * v(y0, x1)) +
                               ty * ((1 - tx) * v(y1, x0) + tx * v(y1, x1));
            map.values[static_cast<std::size_t>(y) * w + x] =
                std::clamp(static_cast<float>(val), 0.0f, 1.0f);
        }
    return map;
}

// Stacks maps into the fusion input tensor. Channel order is the caller's
// list order; slots beyond the provided maps are filled with the
// no-evidence constant 0.5.
inline Tensor stack_maps(const std::vector<FeatureMap>& maps, int k) {
    if (maps.empty()) throw contract_error("stack_maps: no maps");
    if (static_cast<int>(maps.size()) > k)
        throw contract_error("stack_maps: " + std::to_string(maps.size()) + " maps exceed K=" +
                             std::to_string(k));
    const int h = maps[0].h, w = maps[0].w;
    for (const FeatureMap& m : maps)
        if (m.h != h || m.w != w)
            throw contract_error("stack_maps: mixed dimensions " + std::to_string(m.h) + "x" +
                                 std::to_string(m.w) + " vs " + std::to_string(h) + "x" +
                                 std::to_string(w));
    Tensor out = Tensor::full(1, k, h, w, 0.5f);
    for (std::size_t j = 0; j < maps.size(); ++j)
        std::copy(maps[j].values.begin(), maps[j].values.end(),
                  out.data.begin() + static_cast<std::int64_t>(j) * h * w);
    return out;
}

inline std::vector<FeatureMap> compute_builtin_maps(const RgbImage& image) {
    return {adq1_map(image), blk_map(image), noise_residual_map(image)};
}

}  // namespace owafuse

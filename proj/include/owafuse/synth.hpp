#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "owafuse/jpeg.hpp"
#include "owafuse/raster.hpp"
#include "owafuse/rng.hpp"

namespace owafuse {

enum class ForgeryKind { splicing, copy_move, removal };

inline const char* forgery_kind_name(ForgeryKind k) {
    switch (k) {
        case ForgeryKind::splicing: return "splicing";
        case ForgeryKind::copy_move: return "copy_move";
        case ForgeryKind::removal: return "removal";
    }
    return "?";
}

enum class RegionShape { rect, ellipse };

// Axis-aligned rectangle or ellipse, center plus half-axes in pixels.
struct Region {
    RegionShape shape = RegionShape::rect;
    int cx = 0, cy = 0, ax = 0, ay = 0;

    bool contains(int y, int x) const {
        if (shape == RegionShape::rect)
            return std::abs(x - cx) <= ax && std::abs(y - cy) <= ay;
        const double u = static_cast<double>(x - cx) / ax;
        const double v = static_cast<double>(y - cy) / ay;
        return u * u + v * v <= 1.0;
    }

    // analytic pixel-count estimate, used for the area bounds
    double area() const {
        if (shape == RegionShape::rect)
            return static_cast<double>(2 * ax + 1) * (2 * ay + 1);
        return 3.14159265358979323846 * ax * ay;
    }
};

struct ForgerySpec {
    ForgeryKind kind = ForgeryKind::splicing;
    Region region;
    int host_quality = 70;   // q1
    int final_quality = 90;  // q2
    std::uint64_t seed = 0;
    int src_cx = -1, src_cy = -1;  // copy_move source center

    void validate(int h, int w) const {
        const double frac = region.area() / (static_cast<double>(h) * w);
        if (frac < 0.02 || frac > 0.30)
            throw config_error("forgery region covers " + std::to_string(frac * 100.0) +
                               "% of the image, outside [2%, 30%]");
        if (host_quality < 50 || host_quality > 95 || final_quality < 50 || final_quality > 95)
            throw config_error("forgery qualities must lie in [50, 95]");
        if (host_quality == final_quality)
            throw config_error("host and final JPEG qualities must differ");
        if (region.cx - region.ax < 0 || region.cx + region.ax >= w || region.cy - region.ay < 0 ||
            region.cy + region.ay >= h)
            throw config_error("forgery region exceeds image bounds");
        if (kind == ForgeryKind::copy_move) {
            if (src_cx - region.ax < 0 || src_cx + region.ax >= w || src_cy - region.ay < 0 ||
                src_cy + region.ay >= h)
                throw config_error("copy_move source exceeds image bounds");
            // overlap check on bounding boxes
            if (std::abs(src_cx - region.cx) <= 2 * region.ax &&
                std::abs(src_cy - region.cy) <= 2 * region.ay)
                throw config_error("copy_move source and target regions overlap");
        }
    }
};

// Procedural base image: smooth two-color gradient, 3-8 filled shapes,
// bilinear value-noise texture, per-pixel Gaussian noise.
inline RgbImage gen_base_image(std::uint64_t seed, int h, int w) {
    if (h < 64 || h > 512 || w < 64 || w > 512)
        throw config_error("gen_base_image: size " + std::to_string(h) + "x" + std::to_string(w) +
                           " outside [64, 512]");
    Rng rng(seed);
    std::vector<float> px(static_cast<std::size_t>(h) * w * 3);

    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(30, 225));
        c1[c] = static_cast<float>(rng.uniform(30, 225));
    }
    const double theta = rng.uniform(0, 2.0 * 3.14159265358979323846);
    const double gx = std::cos(theta), gy = std::sin(theta);
    const double span = std::abs(gx) * w + std::abs(gy) * h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = 0.5 + (gx * (x - w / 2.0) + gy * (y - h / 2.0)) / span;
            for (int c = 0; c < 3; ++c)
                px[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] =
                    static_cast<float>((1.0 - t) * c0[c] + t * c1[c]);
        }

    const int nshapes = static_cast<int>(rng.uniform_int(3, 8));
    for (int s = 0; s < nshapes; ++s) {
        Region shape;
        shape.shape = rng.uniform() < 0.5 ? RegionShape::rect : RegionShape::ellipse;
        shape.ax = static_cast<int>(rng.uniform_int(4, std::max(5, w / 4)));
        shape.ay = static_cast<int>(rng.uniform_int(4, std::max(5, h / 4)));
        shape.cx = static_cast<int>(rng.uniform_int(0, w - 1));
        shape.cy = static_cast<int>(rng.uniform_int(0, h - 1));
        float col[3];
        for (int c = 0; c < 3; ++c) col[c] = static_cast<float>(rng.uniform(10, 245));
        const int y0 = std::max(0, shape.cy - shape.ay), y1 = std::min(h - 1, shape.cy + shape.ay);
        const int x0 = std::max(0, shape.cx - shape.ax), x1 = std::min(w - 1, shape.cx + shape.ax);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (shape.contains(y, x))
                    for (int c = 0; c < 3; ++c)
                        px[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] =
                            col[c];
    }

    // coarse value noise, bilinearly interpolated
    const int cell = 16;
    const int gh = h / cell + 2, gw2 = w / cell + 2;
    const double amp = rng.uniform(8, 20);
    std::vector<float> grid(static_cast<std::size_t>(gh) * gw2);
    for (float& g : grid) g = static_cast<float>(rng.uniform(-amp, amp));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
            const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
            const double ty = fy - iy, tx = fx - ix;
            const auto g = [&](int yy, int xx) {
                return static_cast<double>(grid[static_cast<std::size_t>(yy) * gw2 + xx]);
            };
            const double v = (1 - ty) * ((1 - tx) * g(iy, ix) + tx * g(iy, ix + 1)) +
                             ty * ((1 - tx) * g(iy + 1, ix) + tx * g(iy + 1, ix + 1));
            for (int c = 0; c < 3; ++c)
                px[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] +=
                    static_cast<float>(v);
        }

    const double sigma = rng.uniform(1, 4);
    RgbImage img(h, w);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double v = px[i] + rng.normal(0.0, sigma);
        img.data[i] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(v)), 0, 255));
    }
    return img;
}

// Applies one forgery with controlled JPEG provenance:
// host -> q1 round trip -> edit -> q2 round trip. The spliced donor content
// never passes through q1, which is what leaves the double-quantization
// signature everywhere except the tampered region.
inline std::pair<RgbImage, GrayImage> make_forgery(const RgbImage& host, const RgbImage& donor,
                                                   const ForgerySpec& spec) {
    if (host.h != donor.h || host.w != donor.w)
        throw contract_error("make_forgery: host and donor sizes differ");
    spec.validate(host.h, host.w);

    RgbImage work = jpeg_round_trip(host, spec.host_quality);
    const int h = host.h, w = host.w;

    GrayImage mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (spec.region.contains(y, x)) mask.at(y, x) = 255;

    switch (spec.kind) {
        case ForgeryKind::splicing:
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (mask.at(y, x))
                        for (int c = 0; c < 3; ++c) work.at(y, x, c) = donor.at(y, x, c);
            break;
        case ForgeryKind::copy_move: {
            const RgbImage snapshot = work;
            const int dy = spec.region.cy - spec.src_cy, dx = spec.region.cx - spec.src_cx;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (mask.at(y, x))
                        for (int c = 0; c < 3; ++c) work.at(y, x, c) = snapshot.at(y - dy, x - dx, c);
            break;
        }
        case ForgeryKind::removal: {
            // per-channel median fill plus noise matched to the host's
            // median-residual level
            std::uint8_t fill[3];
            std::vector<std::uint8_t> vals(static_cast<std::size_t>(h) * w);
            for (int c = 0; c < 3; ++c) {
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        vals[static_cast<std::size_t>(y) * w + x] = work.at(y, x, c);
                std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
                fill[c] = vals[vals.size() / 2];
            }
            const LumaImage luma = luminance(work);
            double resid = 0.0;
            for (int y = 1; y < h - 1; ++y)
                for (int x = 1; x < w - 1; ++x) {
                    float win[9];
                    int n = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) win[n++] = luma.at(y + dy, x + dx);
                    std::nth_element(win, win + 4, win + 9);
                    resid += std::fabs(luma.at(y, x) - win[4]);
                }
            // mean |residual| of a Gaussian is sigma*sqrt(2/pi)
            const double sigma =
                resid / (static_cast<double>(h - 2) * (w - 2)) * std::sqrt(3.14159265358979323846 / 2.0);
            Rng rng(mix_seed(spec.seed, 0x72656d6f));
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (mask.at(y, x))
                        for (int c = 0; c < 3; ++c)
                            work.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(
                                static_cast<int>(std::lround(fill[c] + rng.normal(0.0, sigma))), 0,
                                255));
            break;
        }
    }
    return {jpeg_round_trip(work, spec.final_quality), std::move(mask)};
}

}  // namespace owafuse

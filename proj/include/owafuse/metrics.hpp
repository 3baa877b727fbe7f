#pragma once

#include <cstdint>
#include <vector>

#include "owafuse/producers.hpp"

namespace owafuse {

struct BinaryMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> values;  // 0 pristine, 1 tampered

    BinaryMask() = default;
    BinaryMask(int h_, int w_) : h(h_), w(w_), values(static_cast<std::size_t>(h_) * w_, 0) {}
};

// Pixels at or above the threshold are tampered.
inline BinaryMask binarize(const FeatureMap& map, float threshold = 0.5f) {
    BinaryMask out(map.h, map.w);
    for (std::size_t i = 0; i < map.values.size(); ++i)
        out.values[i] = map.values[i] >= threshold ? 1 : 0;
    return out;
}

// Pixel counts are for the tampered class; the pristine class mirrors them.
struct Metrics {
    double macro_f1 = 0.0, f1_tampered = 0.0, iou = 0.0;
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

namespace detail {

// Empty-class convention: a class with no true or predicted pixels scores 1.
inline double f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;
    const double denom = 2.0 * tp + fp + fn;
    return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace detail

inline Metrics compute_metrics(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw contract_error("metrics: mask dimensions differ, " + std::to_string(pred.h) + "x" +
                             std::to_string(pred.w) + " vs " + std::to_string(gt.h) + "x" +
                             std::to_string(gt.w));
    Metrics m;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0, g = gt.values[i] != 0;
        if (p && g)
            ++m.tp;
        else if (p && !g)
            ++m.fp;
        else if (!p && g)
            ++m.fn;
        else
            ++m.tn;
    }
    m.f1_tampered = detail::f1_from_counts(m.tp, m.fp, m.fn);
    const double f1_pristine = detail::f1_from_counts(m.tn, m.fn, m.fp);
    m.macro_f1 = 0.5 * (m.f1_tampered + f1_pristine);
    const std::int64_t uni = m.tp + m.fp + m.fn;
    m.iou = uni == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(uni);
    return m;
}

inline std::pair<double, double> f1_scores(const BinaryMask& pred, const BinaryMask& gt) {
    const Metrics m = compute_metrics(pred, gt);
    return {m.macro_f1, m.f1_tampered};
}

inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
    return compute_metrics(pred, gt).iou;
}

}  // namespace owafuse

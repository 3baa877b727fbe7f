#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "owafuse/errors.hpp"

namespace owafuse {

// Dense rank-4 array, layout (batch, channel, row, col), row-major with
// channel-major planes per sample. The carrier for maps, features,
// weights and gradients.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw contract_error("Tensor: negative dimension in " + shape_str());
    }

    static Tensor full(int n, int c, int h, int w, float value) {
        Tensor t(n, c, h, w);
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(n) * c * h * w; }
    std::int64_t plane() const { return static_cast<std::int64_t>(h) * w; }

    std::int64_t index(int s, int ch, int y, int x) const {
        return ((static_cast<std::int64_t>(s) * c + ch) * h + y) * w + x;
    }
    float& at(int s, int ch, int y, int x) { return data[index(s, ch, y, x)]; }
    float at(int s, int ch, int y, int x) const { return data[index(s, ch, y, x)]; }

    const float* plane_ptr(int s, int ch) const { return data.data() + index(s, ch, 0, 0); }
    float* plane_ptr(int s, int ch) { return data.data() + index(s, ch, 0, 0); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw contract_error(std::string(where) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

}  // namespace owafuse

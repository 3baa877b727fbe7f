#pragma once

#include <cstdint>
#include <cstring>

namespace owafuse::detail {

// GNU vector extensions (GCC/Clang). Reductions and the conv tap kernels
// need explicit lanes: plain reduction loops do not vectorize without
// -ffast-math, and local accumulator arrays get scalarized before the
// vectorizer sees them. Lane structure is fixed in the source, so results
// are deterministic and independent of the compiler's cost model.

typedef float vf16 __attribute__((vector_size(64)));
typedef float vf8 __attribute__((vector_size(32)));
typedef float vf4 __attribute__((vector_size(16)));
typedef double vd8 __attribute__((vector_size(64)));

template <int N>
struct vec_of;
template <>
struct vec_of<16> {
    using type = vf16;
};
template <>
struct vec_of<8> {
    using type = vf8;
};
template <>
struct vec_of<4> {
    using type = vf4;
};

template <typename V, typename S>
inline V loadu(const S* p) {
    V v;
    std::memcpy(&v, p, sizeof(V));
    return v;
}

// <a, b> with 16 independent float lanes, combined in fixed lane order.
inline float dot_lanes(const float* a, const float* b, std::int64_t len) {
    vf16 acc = {};
    std::int64_t i = 0;
    for (; i + 16 <= len; i += 16) acc += loadu<vf16>(a + i) * loadu<vf16>(b + i);
    float tail = 0.0f;
    for (; i < len; ++i) tail += a[i] * b[i];
    float total = tail;
    for (int j = 0; j < 16; ++j) total += acc[j];
    return total;
}

// Sum of a float span accumulated in 8 double lanes.
inline double sum_lanes(const float* a, std::int64_t len) {
    vd8 acc = {};
    std::int64_t i = 0;
    for (; i + 8 <= len; i += 8) {
        const vf8 v = loadu<vf8>(a + i);
        vd8 d;
        for (int j = 0; j < 8; ++j) d[j] = v[j];
        acc += d;
    }
    double total = 0.0;
    for (; i < len; ++i) total += a[i];
    for (int j = 0; j < 8; ++j) total += acc[j];
    return total;
}

}  // namespace owafuse::detail

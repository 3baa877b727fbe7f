#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "owafuse/rng.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

struct GradCheckReport {
    std::string op;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// An operation under gradient test: `forward` evaluates using the current
// contents of the registered value arrays and returns the flat output;
// `backward` returns dJ/darray for each registered array (same order)
// given dJ/doutput. Outputs flow as doubles so scalar losses keep their
// native precision through the probe.
struct GradCheckTarget {
    std::string name;
    std::vector<std::pair<float*, std::int64_t>> values;
    std::function<std::vector<double>()> forward;
    std::function<std::vector<std::vector<float>>(const std::vector<float>&)> backward;
};

inline std::vector<double> tensor_as_output(const Tensor& t) {
    return std::vector<double>(t.data.begin(), t.data.end());
}

// Central finite differences against the analytic backward pass.
// J = <forward(), R> for a fixed random projection R, so a single scalar
// probes every output element. The denominator uses the perturbation as
// actually realized in float. Failures are reported, never thrown.
inline GradCheckReport grad_check(const GradCheckTarget& target, std::uint64_t seed,
                                  double perturbation = 1e-3, double tolerance = 1e-3) {
    GradCheckReport report;
    report.op = target.name;
    report.tolerance = tolerance;

    const std::vector<double> out0 = target.forward();
    std::vector<float> projection(out0.size());
    Rng rng(mix_seed(seed, 0x67726164));
    for (float& v : projection) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    const auto objective = [&]() {
        const std::vector<double> out = target.forward();
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * projection[i];
        return acc;
    };

    const std::vector<std::vector<float>> analytic = target.backward(projection);

    double worst = 0.0;
    for (std::size_t a = 0; a < target.values.size(); ++a) {
        float* data = target.values[a].first;
        for (std::int64_t i = 0; i < target.values[a].second; ++i) {
            const float saved = data[i];
            data[i] = saved + static_cast<float>(perturbation);
            const double hp = static_cast<double>(data[i]) - saved;
            const double plus = objective();
            data[i] = saved - static_cast<float>(perturbation);
            const double hm = static_cast<double>(saved) - data[i];
            const double minus = objective();
            data[i] = saved;
            const double fd = (plus - minus) / (hp + hm);
            const double an = static_cast<double>(analytic[a][static_cast<std::size_t>(i)]);
            const double rel = std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an));
            if (rel > worst) worst = rel;
        }
    }
    report.max_rel_err = worst;
    report.pass = worst <= tolerance;
    return report;
}

// Central differences along seeded random parameter directions, each
// aligned with the analytic gradient's signs over a random half of the
// elements. The directional quotient aggregates every element into one
// high-magnitude comparison, which is what float32 forward passes can
// support for deep compositions: per-element probes bottom out at the
// forward rounding floor (~1e-4 absolute here) for near-zero gradients.
inline GradCheckReport grad_check_directional(const GradCheckTarget& target, std::uint64_t seed,
                                              int num_directions = 50, double perturbation = 1e-3,
                                              double tolerance = 1e-2) {
    GradCheckReport report;
    report.op = target.name;
    report.tolerance = tolerance;

    const std::vector<double> out0 = target.forward();
    std::vector<float> projection(out0.size());
    Rng rng(mix_seed(seed, 0x67726164));
    for (float& v : projection) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    const auto objective = [&]() {
        const std::vector<double> out = target.forward();
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * projection[i];
        return acc;
    };
    const std::vector<std::vector<float>> analytic = target.backward(projection);

    std::vector<std::vector<float>> saved(target.values.size());
    for (std::size_t a = 0; a < target.values.size(); ++a)
        saved[a].assign(target.values[a].first, target.values[a].first + target.values[a].second);
    const auto restore = [&]() {
        for (std::size_t a = 0; a < target.values.size(); ++a)
            std::copy(saved[a].begin(), saved[a].end(), target.values[a].first);
    };

    Rng dir_rng(mix_seed(seed, 0x64697273));
    double worst = 0.0;
    std::vector<std::vector<float>> direction(target.values.size());
    for (int dir = 0; dir < num_directions; ++dir) {
        double an_dot = 0.0;
        for (std::size_t a = 0; a < target.values.size(); ++a) {
            direction[a].assign(static_cast<std::size_t>(target.values[a].second), 0.0f);
            for (std::int64_t i = 0; i < target.values[a].second; ++i) {
                if (dir_rng.uniform() < 0.5) continue;
                const float d = analytic[a][static_cast<std::size_t>(i)] >= 0.0f ? 1.0f : -1.0f;
                direction[a][static_cast<std::size_t>(i)] = d;
                an_dot += static_cast<double>(analytic[a][static_cast<std::size_t>(i)]) * d;
            }
        }
        const auto shift = [&](double scale) {
            for (std::size_t a = 0; a < target.values.size(); ++a)
                for (std::int64_t i = 0; i < target.values[a].second; ++i)
                    target.values[a].first[i] +=
                        static_cast<float>(scale * perturbation) *
                        direction[a][static_cast<std::size_t>(i)];
        };
        shift(+1.0);
        const double plus = objective();
        restore();
        shift(-1.0);
        const double minus = objective();
        restore();
        const double fd = (plus - minus) / (2.0 * perturbation);
        const double rel = std::abs(fd - an_dot) / std::max(1e-6, std::abs(fd) + std::abs(an_dot));
        if (rel > worst) worst = rel;
    }
    report.max_rel_err = worst;
    report.pass = worst <= tolerance;
    return report;
}

}  // namespace owafuse

#pragma once

#include <vector>

#include "owafuse/gradcheck.hpp"
#include "owafuse/model.hpp"
#include "owafuse/ops.hpp"
#include "owafuse/pool.hpp"

namespace owafuse {

// Gradient target over every parameter of a model (inputs are leaves and
// carry no gradient).
inline GradCheckTarget model_gradcheck_target(OwaModel& model, const Tensor& maps) {
    GradCheckTarget t;
    t.name = "owa_model_L" + std::to_string(model.config.num_layers) + "_F" +
             std::to_string(model.config.feature_width);
    for (const ParamView& v : param_views(model.params, model.config))
        t.values.push_back({v.data, v.size});
    t.forward = [&model, maps]() { return tensor_as_output(forward(model, maps)); };
    t.backward = [&model, maps](const std::vector<float>& proj) {
        ForwardCache cache;
        const Tensor out = forward(model, maps, cache);
        Tensor go(out.n, out.c, out.h, out.w);
        go.data = proj;
        OwaParams grads = backward(model, cache, go);
        std::vector<std::vector<float>> flat;
        for (const ParamView& v : param_views(grads, model.config))
            flat.emplace_back(v.data, v.data + v.size);
        return flat;
    };
    return t;
}

// The full gradient-check suite: every primitive at relative tolerance
// 1e-3 plus a depth-2, width-4 model at 1e-2. Linear operations take a
// larger probe step (they have no truncation error, and it lifts the
// quotient clear of float forward rounding); seeds keep the projected
// gradients away of the noise floor.
inline std::vector<GradCheckReport> run_gradient_check_suite() {
    std::vector<GradCheckReport> reports;
    const auto seeded = [](int n, int c, int h, int w, std::uint64_t seed, double lo, double hi) {
        Tensor t(n, c, h, w);
        Rng rng(seed);
        for (float& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
        return t;
    };

    // convolutions, every kernel size of the operation set
    const std::pair<int, std::uint64_t> conv_cases[] = {{1, 31}, {3, 51}, {5, 57}, {7, 17}};
    for (auto [k, seed] : conv_cases) {
        Tensor x = seeded(1, 2, 5, 5, seed * 3 + 1, -1, 1);
        Tensor kn = seeded(2, 2, k, k, seed * 3 + 2, -0.4, 0.4);
        std::vector<float> b = {0.05f, -0.1f};
        GradCheckTarget t;
        t.name = "conv2d_k" + std::to_string(k);
        t.values = {{x.data.data(), x.size()},
                    {kn.data.data(), kn.size()},
                    {b.data(), static_cast<std::int64_t>(b.size())}};
        t.forward = [&]() { return tensor_as_output(conv2d(x, kn, b)); };
        t.backward = [&](const std::vector<float>& proj) {
            Tensor go(1, 2, 5, 5);
            go.data = proj;
            Conv2dGrads g = conv2d_backward(x, kn, b, go);
            return std::vector<std::vector<float>>{g.input.data, g.kernel.data, g.bias};
        };
        reports.push_back(grad_check(t, seed * 3 + 3));
    }

    for (PoolMode mode : {PoolMode::avg, PoolMode::max}) {
        Tensor x = seeded(1, 2, 6, 6, 60, -2, 2);
        GradCheckTarget t;
        t.name = mode == PoolMode::avg ? "pool3_avg" : "pool3_max";
        t.values = {{x.data.data(), x.size()}};
        t.forward = [&]() { return tensor_as_output(pool3(x, mode)); };
        t.backward = [&](const std::vector<float>& proj) {
            Tensor go(1, 2, 6, 6);
            go.data = proj;
            return std::vector<std::vector<float>>{pool3_backward(x, mode, go).data};
        };
        reports.push_back(grad_check(t, 61, mode == PoolMode::avg ? 0.05 : 1e-3));
    }

    {
        Tensor x = seeded(1, 2, 5, 5, 70, -3, 3);
        GradCheckTarget t;
        t.name = "sigmoid";
        t.values = {{x.data.data(), x.size()}};
        t.forward = [&]() { return tensor_as_output(sigmoid(x)); };
        t.backward = [&](const std::vector<float>& proj) {
            Tensor go(1, 2, 5, 5);
            go.data = proj;
            return std::vector<std::vector<float>>{sigmoid_backward(sigmoid(x), go).data};
        };
        reports.push_back(grad_check(t, 71));
    }
    {
        Tensor x = seeded(1, 2, 5, 5, 72, -2, 2);
        GradCheckTarget t;
        t.name = "relu";
        t.values = {{x.data.data(), x.size()}};
        t.forward = [&]() { return tensor_as_output(relu(x)); };
        t.backward = [&](const std::vector<float>& proj) {
            Tensor go(1, 2, 5, 5);
            go.data = proj;
            return std::vector<std::vector<float>>{relu_backward(x, go).data};
        };
        reports.push_back(grad_check(t, 73));
    }
    {
        std::vector<float> v(6);
        Rng rng(74);
        for (float& x : v) x = static_cast<float>(rng.uniform(-2, 2));
        GradCheckTarget t;
        t.name = "softmax";
        t.values = {{v.data(), 6}};
        t.forward = [&]() {
            const std::vector<float> y = softmax(v);
            return std::vector<double>(y.begin(), y.end());
        };
        t.backward = [&](const std::vector<float>& proj) {
            return std::vector<std::vector<float>>{softmax_backward(softmax(v), proj)};
        };
        reports.push_back(grad_check(t, 75));
    }
    {
        Rng rng(81);
        std::vector<float> x(3), w(6), b(2);
        for (float& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        for (float& v : w) v = static_cast<float>(rng.uniform(-1, 1));
        for (float& v : b) v = static_cast<float>(rng.uniform(-1, 1));
        GradCheckTarget t;
        t.name = "dense";
        t.values = {{x.data(), 3}, {w.data(), 6}, {b.data(), 2}};
        t.forward = [&]() {
            const std::vector<float> y = dense(x, w, b);
            return std::vector<double>(y.begin(), y.end());
        };
        t.backward = [&](const std::vector<float>& proj) {
            DenseGrads g = dense_backward(x, w, proj);
            return std::vector<std::vector<float>>{g.input, g.weights, g.bias};
        };
        reports.push_back(grad_check(t, 82));
    }
    {
        Tensor a = seeded(1, 2, 3, 3, 400, -1, 1);
        Tensor b = seeded(1, 1, 3, 3, 401, -1, 1);
        GradCheckTarget t;
        t.name = "concat_channels";
        t.values = {{a.data.data(), a.size()}, {b.data.data(), b.size()}};
        t.forward = [&]() { return tensor_as_output(concat_channels({&a, &b})); };
        t.backward = [&](const std::vector<float>& proj) {
            Tensor go(1, 3, 3, 3);
            go.data = proj;
            auto parts = concat_split_backward(go, {2, 1});
            return std::vector<std::vector<float>>{parts[0].data, parts[1].data};
        };
        reports.push_back(grad_check(t, 402));
    }
    {
        Tensor p = seeded(1, 1, 4, 4, 95, 0.1, 0.9);
        Tensor y = seeded(1, 1, 4, 4, 96, 0.0, 1.0);
        GradCheckTarget t;
        t.name = "bce_loss";
        t.values = {{p.data.data(), p.size()}};
        t.forward = [&]() { return std::vector<double>{bce_loss(p, y).loss}; };
        t.backward = [&](const std::vector<float>& proj) {
            BceResult r = bce_loss(p, y);
            std::vector<float> g(r.grad.data.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = r.grad.data[i] * proj[0];
            return std::vector<std::vector<float>>{g};
        };
        reports.push_back(grad_check(t, 97));
    }
    {
        OwaConfig cfg;
        cfg.feature_width = 4;
        cfg.num_layers = 2;
        cfg.seed = 7;
        OwaModel model = init_model(cfg);
        Tensor maps = seeded(1, 5, 8, 8, 900, 0.0, 1.0);
        reports.push_back(
            grad_check_directional(model_gradcheck_target(model, maps), 901, 50, 1e-3, 1e-2));
    }
    return reports;
}

}  // namespace owafuse

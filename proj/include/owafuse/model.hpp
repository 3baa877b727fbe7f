#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "owafuse/conv.hpp"
#include "owafuse/ops.hpp"
#include "owafuse/pool.hpp"
#include "owafuse/rng.hpp"
#include "owafuse/tensor.hpp"

namespace owafuse {

enum class OpKind { conv1, conv3, conv5, conv7, avgpool3, maxpool3 };

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::conv1: return "conv1";
        case OpKind::conv3: return "conv3";
        case OpKind::conv5: return "conv5";
        case OpKind::conv7: return "conv7";
        case OpKind::avgpool3: return "avgpool3";
        case OpKind::maxpool3: return "maxpool3";
    }
    return "?";
}

inline OpKind op_kind_from_name(const std::string& name) {
    for (OpKind k : {OpKind::conv1, OpKind::conv3, OpKind::conv5, OpKind::conv7, OpKind::avgpool3,
                     OpKind::maxpool3})
        if (name == op_kind_name(k)) return k;
    throw config_error("unknown operation kind: " + name);
}

inline int op_kernel_size(OpKind k) {
    switch (k) {
        case OpKind::conv1: return 1;
        case OpKind::conv3: return 3;
        case OpKind::conv5: return 5;
        case OpKind::conv7: return 7;
        default: return 0;  // pooling
    }
}

inline std::vector<OpKind> default_op_set() {
    return {OpKind::conv1, OpKind::conv3, OpKind::conv5, OpKind::conv7, OpKind::avgpool3,
            OpKind::maxpool3};
}

struct OwaConfig {
    int in_channels = 5;
    int feature_width = 16;
    int num_layers = 4;
    int attention_hidden = 8;
    bool residual = true;
    std::uint64_t seed = 1;
    std::vector<OpKind> op_set = default_op_set();

    int num_ops() const { return static_cast<int>(op_set.size()); }

    void validate() const {
        if (in_channels < 1) throw config_error("in_channels must be >= 1");
        if (feature_width < 1) throw config_error("feature_width must be >= 1");
        if (num_layers < 1) throw config_error("num_layers must be >= 1");
        if (attention_hidden < 1) throw config_error("attention_hidden must be >= 1");
        if (op_set.empty()) throw config_error("op_set must not be empty");
    }
};

// Full parameter set; also the container for parameter gradients, which
// share the exact same structure.
struct OwaParams {
    struct Layer {
        std::vector<Tensor> kernels;             // aligned to op_set; empty for pooling ops
        std::vector<std::vector<float>> biases;  // aligned to op_set; empty for pooling ops
        std::vector<float> att1_w, att1_b;       // feature_width -> attention_hidden
        std::vector<float> att2_w, att2_b;       // attention_hidden -> |op_set|
        Tensor mix_kernel;                       // (F, F*|op_set|, 1, 1)
        std::vector<float> mix_bias;
    };
    Tensor stem_kernel;  // (F, K, 3, 3)
    std::vector<float> stem_bias;
    std::vector<Layer> layers;
    Tensor head_kernel;  // (1, F, 1, 1)
    std::vector<float> head_bias;
};

struct OwaModel {
    OwaConfig config;
    OwaParams params;
};

// Allocates all parameter blocks with the shapes implied by the config,
// zero-filled.
inline OwaParams make_params(const OwaConfig& cfg) {
    const int F = cfg.feature_width, K = cfg.in_channels, ops = cfg.num_ops();
    OwaParams p;
    p.stem_kernel = Tensor(F, K, 3, 3);
    p.stem_bias.assign(static_cast<std::size_t>(F), 0.0f);
    p.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& layer : p.layers) {
        layer.kernels.resize(cfg.op_set.size());
        layer.biases.resize(cfg.op_set.size());
        for (std::size_t i = 0; i < cfg.op_set.size(); ++i) {
            const int k = op_kernel_size(cfg.op_set[i]);
            if (k > 0) {
                layer.kernels[i] = Tensor(F, F, k, k);
                layer.biases[i].assign(static_cast<std::size_t>(F), 0.0f);
            }
        }
        layer.att1_w.assign(static_cast<std::size_t>(cfg.attention_hidden) * F, 0.0f);
        layer.att1_b.assign(static_cast<std::size_t>(cfg.attention_hidden), 0.0f);
        layer.att2_w.assign(static_cast<std::size_t>(ops) * cfg.attention_hidden, 0.0f);
        layer.att2_b.assign(static_cast<std::size_t>(ops), 0.0f);
        layer.mix_kernel = Tensor(F, F * ops, 1, 1);
        layer.mix_bias.assign(static_cast<std::size_t>(F), 0.0f);
    }
    p.head_kernel = Tensor(1, F, 1, 1);
    p.head_bias.assign(1, 0.0f);
    return p;
}

// A named view into one parameter block; the flat order over all views is
// the checkpoint payload order.
struct ParamView {
    std::string name;
    std::vector<int> shape;
    float* data;
    std::int64_t size;
};

inline std::vector<ParamView> param_views(OwaParams& p, const OwaConfig& cfg) {
    std::vector<ParamView> views;
    auto add_tensor = [&](const std::string& name, Tensor& t) {
        views.push_back({name, {t.n, t.c, t.h, t.w}, t.data.data(), t.size()});
    };
    auto add_vec = [&](const std::string& name, std::vector<float>& v) {
        views.push_back({name, {static_cast<int>(v.size())}, v.data(),
                         static_cast<std::int64_t>(v.size())});
    };
    add_tensor("stem.kernel", p.stem_kernel);
    add_vec("stem.bias", p.stem_bias);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = "layers." + std::to_string(l) + ".";
        auto& layer = p.layers[l];
        for (std::size_t i = 0; i < cfg.op_set.size(); ++i) {
            if (op_kernel_size(cfg.op_set[i]) == 0) continue;
            const std::string op = op_kind_name(cfg.op_set[i]);
            add_tensor(base + op + ".kernel", layer.kernels[i]);
            add_vec(base + op + ".bias", layer.biases[i]);
        }
        add_vec(base + "att1.w", layer.att1_w);
        add_vec(base + "att1.b", layer.att1_b);
        add_vec(base + "att2.w", layer.att2_w);
        add_vec(base + "att2.b", layer.att2_b);
        add_tensor(base + "mix.kernel", layer.mix_kernel);
        add_vec(base + "mix.bias", layer.mix_bias);
    }
    add_tensor("head.kernel", p.head_kernel);
    add_vec("head.bias", p.head_bias);
    return views;
}

inline std::int64_t param_count(const OwaConfig& cfg) {
    OwaParams p = make_params(cfg);
    std::int64_t total = 0;
    for (const auto& v : param_views(p, cfg)) total += v.size;
    return total;
}

// He-initialized model: kernels and dense weights ~ N(0, 2/fan_in), biases
// zero. Draw order equals checkpoint order, so a seed pins every bit.
inline OwaModel init_model(const OwaConfig& cfg) {
    cfg.validate();
    OwaModel model{cfg, make_params(cfg)};
    Rng rng(cfg.seed);
    auto fill_kernel = [&](Tensor& t) {
        const double std = std::sqrt(2.0 / (static_cast<double>(t.c) * t.h * t.w));
        for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, std));
    };
    auto fill_dense = [&](std::vector<float>& w, int fan_in) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (float& v : w) v = static_cast<float>(rng.normal(0.0, std));
    };
    fill_kernel(model.params.stem_kernel);
    for (auto& layer : model.params.layers) {
        for (std::size_t i = 0; i < cfg.op_set.size(); ++i)
            if (op_kernel_size(cfg.op_set[i]) > 0) fill_kernel(layer.kernels[i]);
        fill_dense(layer.att1_w, cfg.feature_width);
        fill_dense(layer.att2_w, cfg.attention_hidden);
        fill_kernel(layer.mix_kernel);
    }
    fill_kernel(model.params.head_kernel);
    return model;
}

// ---- forward / backward ----

struct LayerCache {
    Tensor input;     // features entering the layer (n, F, h, w)
    Tensor cat_raw;   // unscaled op outputs, concatenated (n, F*ops, h, w)
    std::vector<float> gap;                       // n x F
    std::vector<float> z1, h1;                    // n x attention_hidden
    std::vector<float> logits, att;               // n x ops
    std::vector<std::vector<std::uint8_t>> max_idx;  // per op; filled for maxpool ops
};

struct ForwardCache {
    Tensor maps;
    Tensor stem_z;  // pre-relu
    std::vector<LayerCache> layers;
    Tensor head_in;
    Tensor output;  // sigmoid(head)
    bool valid = false;
};

namespace detail {

inline thread_local std::vector<float> model_pad_scratch;

// One OwA layer. `features` must have F channels. Returns via out params:
// the layer output and (optionally) the attention row per sample.
// attention_override, when given, replaces the computed softmax weights
// (n x ops, row-major); it exists for tests that pin the operation choice.
inline void owa_layer_forward_impl(const OwaParams::Layer& lp, const OwaConfig& cfg,
                                   const Tensor& features, LayerCache& cache, Tensor& out,
                                   const float* attention_override) {
    const int F = cfg.feature_width, ops = cfg.num_ops();
    if (features.c != F)
        throw contract_error("owa_layer_forward: expected " + std::to_string(F) +
                             " channels, got " + features.shape_str());
    const int n = features.n, h = features.h, w = features.w;
    const std::int64_t plane = features.plane();

    cache.input = features;
    cache.cat_raw = Tensor(n, F * ops, h, w);
    cache.gap.assign(static_cast<std::size_t>(n) * F, 0.0f);
    cache.z1.assign(static_cast<std::size_t>(n) * cfg.attention_hidden, 0.0f);
    cache.h1 = cache.z1;
    cache.logits.assign(static_cast<std::size_t>(n) * ops, 0.0f);
    cache.att = cache.logits;
    cache.max_idx.assign(static_cast<std::size_t>(ops), {});

    // attention: global average pool -> dense -> relu -> dense -> softmax
    for (int s = 0; s < n; ++s) {
        std::vector<float> gap(static_cast<std::size_t>(F));
        for (int f = 0; f < F; ++f)
            gap[static_cast<std::size_t>(f)] = static_cast<float>(
                sum_lanes(features.plane_ptr(s, f), plane) / static_cast<double>(plane));
        std::copy(gap.begin(), gap.end(), cache.gap.begin() + static_cast<std::size_t>(s) * F);
        std::vector<float> z1 = dense(gap, lp.att1_w, lp.att1_b);
        std::copy(z1.begin(), z1.end(),
                  cache.z1.begin() + static_cast<std::size_t>(s) * cfg.attention_hidden);
        relu_inplace(z1);
        std::copy(z1.begin(), z1.end(),
                  cache.h1.begin() + static_cast<std::size_t>(s) * cfg.attention_hidden);
        std::vector<float> logits = dense(z1, lp.att2_w, lp.att2_b);
        std::copy(logits.begin(), logits.end(),
                  cache.logits.begin() + static_cast<std::size_t>(s) * ops);
        std::vector<float> att = softmax(logits);
        if (attention_override)
            std::copy(attention_override + static_cast<std::size_t>(s) * ops,
                      attention_override + static_cast<std::size_t>(s + 1) * ops,
                      att.begin());
        std::copy(att.begin(), att.end(), cache.att.begin() + static_cast<std::size_t>(s) * ops);
    }

    // parallel operations, written straight into their concat slices
    const int R = 3;
    const int hp = h + 2 * R, wp = w + 2 * R;
    auto& padded = model_pad_scratch;
    padded.resize(static_cast<std::size_t>(F) * hp * wp);
    std::vector<TapTable> taps(static_cast<std::size_t>(ops));
    for (int j = 0; j < ops; ++j)
        if (op_kernel_size(cfg.op_set[static_cast<std::size_t>(j)]) > 0)
            taps[static_cast<std::size_t>(j)] =
                build_fwd_taps(lp.kernels[static_cast<std::size_t>(j)], hp, wp);
    for (int j = 0; j < ops; ++j)
        if (cfg.op_set[static_cast<std::size_t>(j)] == OpKind::maxpool3)
            cache.max_idx[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(n) * F *
                                                              plane);

    for (int s = 0; s < n; ++s) {
        bool padded_ready = false;
        for (int j = 0; j < ops; ++j) {
            const OpKind kind = cfg.op_set[static_cast<std::size_t>(j)];
            float* out_slice = cache.cat_raw.plane_ptr(s, j * F);
            if (op_kernel_size(kind) > 0) {
                if (!padded_ready) {
                    pad_sample(features, s, R, padded.data());
                    padded_ready = true;
                }
                run_tap_kernel(padded.data(), taps[static_cast<std::size_t>(j)], F,
                               lp.biases[static_cast<std::size_t>(j)].data(), out_slice, plane, h,
                               w, wp, R);
            } else if (kind == OpKind::avgpool3) {
                for (int f = 0; f < F; ++f)
                    pool3_avg_plane(features.plane_ptr(s, f), h, w, out_slice + f * plane);
            } else {
                auto& idx = cache.max_idx[static_cast<std::size_t>(j)];
                for (int f = 0; f < F; ++f)
                    pool3_max_plane(features.plane_ptr(s, f), h, w, out_slice + f * plane,
                                    idx.data() + (static_cast<std::int64_t>(s) * F + f) * plane);
            }
        }
    }

    // scale by attention, 1x1 mix, residual
    out = Tensor(n, F, h, w);
    std::vector<float> scaled(static_cast<std::size_t>(F) * ops * plane);
    for (int s = 0; s < n; ++s) {
        const float* att_row = cache.att.data() + static_cast<std::size_t>(s) * ops;
        for (int j = 0; j < ops; ++j) {
            const float a = att_row[j];
            const float* src = cache.cat_raw.plane_ptr(s, j * F);
            float* dst = scaled.data() + static_cast<std::size_t>(j) * F * plane;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(F) * plane; ++i)
                dst[i] = src[i] * a;
        }
        mix1x1(scaled.data(), plane, F * ops, F, lp.mix_kernel.data.data(), F * ops,
               lp.mix_bias.data(), out.plane_ptr(s, 0), plane, plane);
    }
    if (cfg.residual)
        for (std::int64_t i = 0; i < out.size(); ++i)
            out.data[static_cast<std::size_t>(i)] += features.data[static_cast<std::size_t>(i)];
}

}  // namespace detail

// Public layer entry point: returns (output, attention (n x ops)).
inline std::pair<Tensor, std::vector<float>> owa_layer_forward(
    const OwaParams::Layer& lp, const OwaConfig& cfg, const Tensor& features,
    const std::vector<float>* attention_override = nullptr) {
    LayerCache cache;
    Tensor out;
    detail::owa_layer_forward_impl(lp, cfg, features, cache, out,
                                   attention_override ? attention_override->data() : nullptr);
    return {std::move(out), std::move(cache.att)};
}

// Stem conv + relu -> num_layers OwA layers -> 1x1 head -> sigmoid.
// Output shape (n, 1, h, w), values strictly inside (0, 1).
inline Tensor forward(const OwaModel& model, const Tensor& maps, ForwardCache& cache) {
    const OwaConfig& cfg = model.config;
    if (maps.c != cfg.in_channels)
        throw contract_error("forward: maps " + maps.shape_str() + " do not carry " +
                             std::to_string(cfg.in_channels) + " channels");
    if (maps.h < 8 || maps.w < 8)
        throw contract_error("forward: spatial size must be at least 8x8, got " + maps.shape_str());

    cache = ForwardCache{};
    cache.maps = maps;
    cache.stem_z = conv2d(maps, model.params.stem_kernel, model.params.stem_bias);
    Tensor features = relu(cache.stem_z);

    cache.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (int l = 0; l < cfg.num_layers; ++l) {
        Tensor out;
        detail::owa_layer_forward_impl(model.params.layers[static_cast<std::size_t>(l)], cfg,
                                       features, cache.layers[static_cast<std::size_t>(l)], out,
                                       nullptr);
        features = std::move(out);
    }
    cache.head_in = features;
    cache.output = sigmoid(conv2d(features, model.params.head_kernel, model.params.head_bias));
    cache.valid = true;
    return cache.output;
}

inline Tensor forward(const OwaModel& model, const Tensor& maps) {
    ForwardCache cache;
    return forward(model, maps, cache);
}

// Exact analytic parameter gradients. Requires the cache produced by the
// forward pass over the same maps.
inline OwaParams backward(const OwaModel& model, const ForwardCache& cache,
                          const Tensor& grad_out) {
    if (!cache.valid) throw usage_error("backward: forward cache is not populated");
    require_same_shape(cache.output, grad_out, "backward");

    const OwaConfig& cfg = model.config;
    const int F = cfg.feature_width, ops = cfg.num_ops();
    OwaParams grads = make_params(cfg);

    // head
    Tensor g = sigmoid_backward(cache.output, grad_out);
    Conv2dGrads head_g =
        conv2d_backward(cache.head_in, model.params.head_kernel, model.params.head_bias, g);
    grads.head_kernel = std::move(head_g.kernel);
    grads.head_bias = std::move(head_g.bias);
    Tensor gout = std::move(head_g.input);

    const int n = cache.maps.n, h = cache.maps.h, w = cache.maps.w;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const auto& lp = model.params.layers[static_cast<std::size_t>(l)];
        auto& lg = grads.layers[static_cast<std::size_t>(l)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];

        // mix conv backward. gS = W^T x gout; gw_mix uses the scaled concat,
        // recovered as att * <gout, cat_raw> without materializing it.
        Tensor g_scaled(n, F * ops, h, w);
        {
            std::vector<float> wt(static_cast<std::size_t>(F) * ops * F);  // (F*ops, F)
            for (int co = 0; co < F; ++co)
                for (int ci = 0; ci < F * ops; ++ci)
                    wt[static_cast<std::size_t>(ci) * F + co] =
                        lp.mix_kernel.data[static_cast<std::size_t>(co) * F * ops + ci];
            const std::vector<float> zeros(static_cast<std::size_t>(F * ops), 0.0f);
            for (int s = 0; s < n; ++s)
                detail::mix1x1(gout.plane_ptr(s, 0), plane, F, F * ops, wt.data(), F, zeros.data(),
                               g_scaled.plane_ptr(s, 0), plane, plane);
        }
        {
            std::vector<double> gw(static_cast<std::size_t>(F) * F * ops, 0.0);
            for (int s = 0; s < n; ++s) {
                const float* att_row = lc.att.data() + static_cast<std::size_t>(s) * ops;
                for (int co = 0; co < F; ++co)
                    for (int ci = 0; ci < F * ops; ++ci)
                        gw[static_cast<std::size_t>(co) * F * ops + ci] +=
                            static_cast<double>(att_row[ci / F]) *
                            detail::dot_lanes(gout.plane_ptr(s, co), lc.cat_raw.plane_ptr(s, ci),
                                              plane);
            }
            for (std::size_t i = 0; i < gw.size(); ++i)
                lg.mix_kernel.data[i] = static_cast<float>(gw[i]);
            for (int co = 0; co < F; ++co) {
                double acc = 0.0;
                for (int s = 0; s < n; ++s) acc += detail::sum_lanes(gout.plane_ptr(s, co), plane);
                lg.mix_bias[static_cast<std::size_t>(co)] = static_cast<float>(acc);
            }
        }

        // attention gradient: g_att[j] = <gS_j, C_j>; then gS_j *= a_j to
        // become the gradient at the raw op outputs.
        std::vector<float> g_att(static_cast<std::size_t>(n) * ops, 0.0f);
        for (int s = 0; s < n; ++s) {
            const float* att_row = lc.att.data() + static_cast<std::size_t>(s) * ops;
            for (int j = 0; j < ops; ++j) {
                double acc = 0.0;
                for (int f = 0; f < F; ++f)
                    acc += detail::dot_lanes(g_scaled.plane_ptr(s, j * F + f),
                                             lc.cat_raw.plane_ptr(s, j * F + f), plane);
                g_att[static_cast<std::size_t>(s) * ops + j] = static_cast<float>(acc);
                const float a = att_row[j];
                float* gs = g_scaled.plane_ptr(s, j * F);
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(F) * plane; ++i) gs[i] *= a;
            }
        }

        // attention sub-network backward, per sample
        Tensor g_input = cfg.residual ? gout : Tensor(n, F, h, w);
        for (int s = 0; s < n; ++s) {
            const std::vector<float> att_row(lc.att.begin() + static_cast<std::size_t>(s) * ops,
                                             lc.att.begin() + static_cast<std::size_t>(s + 1) * ops);
            const std::vector<float> ga_row(g_att.begin() + static_cast<std::size_t>(s) * ops,
                                            g_att.begin() + static_cast<std::size_t>(s + 1) * ops);
            const std::vector<float> g_logits = softmax_backward(att_row, ga_row);
            const std::vector<float> h1_row(
                lc.h1.begin() + static_cast<std::size_t>(s) * cfg.attention_hidden,
                lc.h1.begin() + static_cast<std::size_t>(s + 1) * cfg.attention_hidden);
            DenseGrads d2 = dense_backward(h1_row, lp.att2_w, g_logits);
            for (int i = 0; i < cfg.attention_hidden; ++i)
                if (lc.z1[static_cast<std::size_t>(s) * cfg.attention_hidden + i] <= 0.0f)
                    d2.input[static_cast<std::size_t>(i)] = 0.0f;
            const std::vector<float> gap_row(lc.gap.begin() + static_cast<std::size_t>(s) * F,
                                             lc.gap.begin() + static_cast<std::size_t>(s + 1) * F);
            DenseGrads d1 = dense_backward(gap_row, lp.att1_w, d2.input);
            for (std::size_t i = 0; i < lg.att2_w.size(); ++i) lg.att2_w[i] += d2.weights[i];
            for (std::size_t i = 0; i < lg.att2_b.size(); ++i) lg.att2_b[i] += d2.bias[i];
            for (std::size_t i = 0; i < lg.att1_w.size(); ++i) lg.att1_w[i] += d1.weights[i];
            for (std::size_t i = 0; i < lg.att1_b.size(); ++i) lg.att1_b[i] += d1.bias[i];
            // global-average-pool backward: spread evenly over the plane
            for (int f = 0; f < F; ++f) {
                const float share =
                    d1.input[static_cast<std::size_t>(f)] / static_cast<float>(plane);
                float* gi = g_input.plane_ptr(s, f);
                for (std::int64_t i = 0; i < plane; ++i) gi[i] += share;
            }
        }

        // op backwards: route each g_scaled slice through its operation
        const int R = 3;
        const int hp = h + 2 * R, wp = w + 2 * R;
        auto& padded = detail::model_pad_scratch;
        padded.resize(static_cast<std::size_t>(std::max(F, 1)) * hp * wp);
        std::vector<float> gslice_pad(static_cast<std::size_t>(F) * hp * wp);
        std::vector<float> gi_scratch(static_cast<std::size_t>(F) * plane);
        const std::vector<float> zeros(static_cast<std::size_t>(F), 0.0f);
        std::vector<std::vector<double>> gw_ops(static_cast<std::size_t>(ops));
        for (int j = 0; j < ops; ++j) {
            const int k = op_kernel_size(cfg.op_set[static_cast<std::size_t>(j)]);
            if (k > 0) gw_ops[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(F) * F * k * k, 0.0);
        }

        for (int s = 0; s < n; ++s) {
            bool input_padded = false;
            for (int j = 0; j < ops; ++j) {
                const OpKind kind = cfg.op_set[static_cast<std::size_t>(j)];
                const float* gsl = g_scaled.plane_ptr(s, j * F);
                float* gi = g_input.plane_ptr(s, 0);
                if (op_kernel_size(kind) > 0) {
                    const Tensor& kernel = lp.kernels[static_cast<std::size_t>(j)];
                    const int k = kernel.h;
                    // pad this op's grad slice for the transposed-tap pass
                    {
                        Tensor view(1, F, h, w);
                        std::copy_n(gsl, static_cast<std::int64_t>(F) * plane, view.data.begin());
                        detail::pad_sample(view, 0, R, gslice_pad.data());
                    }
                    const detail::TapTable bwd = detail::build_bwd_taps(kernel, hp, wp);
                    detail::run_tap_kernel(gslice_pad.data(), bwd, F, zeros.data(),
                                           gi_scratch.data(), plane, h, w, wp, R);
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(F) * plane; ++i)
                        gi[i] += gi_scratch[static_cast<std::size_t>(i)];
                    if (!input_padded) {
                        detail::pad_sample(lc.input, s, R, padded.data());
                        input_padded = true;
                    }
                    auto& gw = gw_ops[static_cast<std::size_t>(j)];
                    for (int co = 0; co < F; ++co)
                        for (int ci = 0; ci < F; ++ci)
                            detail::gw_plane(
                                gsl + co * plane,
                                padded.data() + static_cast<std::int64_t>(ci) * hp * wp +
                                    (static_cast<std::int64_t>(R) - k / 2) * wp + (R - k / 2),
                                h, w, wp, k,
                                gw.data() + (static_cast<std::size_t>(co) * F + ci) * k * k);
                    auto& gb = lg.biases[static_cast<std::size_t>(j)];
                    for (int co = 0; co < F; ++co)
                        gb[static_cast<std::size_t>(co)] += static_cast<float>(
                            detail::sum_lanes(gsl + co * plane, plane));
                } else if (kind == OpKind::avgpool3) {
                    for (int f = 0; f < F; ++f) {
                        detail::pool3_avg_plane(gsl + f * plane, h, w, gi_scratch.data());
                        float* dst = gi + f * plane;
                        for (std::int64_t i = 0; i < plane; ++i)
                            dst[i] += gi_scratch[static_cast<std::size_t>(i)];
                    }
                } else {
                    const auto& idx = lc.max_idx[static_cast<std::size_t>(j)];
                    for (int f = 0; f < F; ++f) {
                        const std::uint8_t* id =
                            idx.data() + (static_cast<std::int64_t>(s) * F + f) * plane;
                        const float* gsf = gsl + f * plane;
                        float* dst = gi + f * plane;
                        for (int y = 0; y < h; ++y)
                            for (int x = 0; x < w; ++x) {
                                const int t = id[static_cast<std::int64_t>(y) * w + x];
                                dst[static_cast<std::int64_t>(y + t / 3 - 1) * w +
                                    (x + t % 3 - 1)] += gsf[static_cast<std::int64_t>(y) * w + x];
                            }
                    }
                }
            }
        }
        for (int j = 0; j < ops; ++j) {
            if (op_kernel_size(cfg.op_set[static_cast<std::size_t>(j)]) == 0) continue;
            auto& gk = lg.kernels[static_cast<std::size_t>(j)];
            const auto& gw = gw_ops[static_cast<std::size_t>(j)];
            for (std::size_t i = 0; i < gw.size(); ++i) gk.data[i] = static_cast<float>(gw[i]);
        }
        gout = std::move(g_input);
    }

    // stem backward; the input maps are leaves, so their gradient is skipped
    Tensor g_stem_z = relu_backward(cache.stem_z, gout);
    {
        const Tensor& kernel = model.params.stem_kernel;
        const int k = kernel.h, r = k / 2, K = cfg.in_channels;
        const int hp = h + 2 * r, wp = w + 2 * r;
        auto& padded = detail::model_pad_scratch;
        padded.resize(static_cast<std::size_t>(K) * hp * wp);
        std::vector<double> gw(static_cast<std::size_t>(F) * K * k * k, 0.0);
        for (int s = 0; s < n; ++s) {
            detail::pad_sample(cache.maps, s, r, padded.data());
            for (int co = 0; co < F; ++co)
                for (int ci = 0; ci < K; ++ci)
                    detail::gw_plane(g_stem_z.plane_ptr(s, co),
                                     padded.data() + static_cast<std::int64_t>(ci) * hp * wp, h, w,
                                     wp, k, gw.data() + (static_cast<std::size_t>(co) * K + ci) * k * k);
        }
        for (std::size_t i = 0; i < gw.size(); ++i)
            grads.stem_kernel.data[i] = static_cast<float>(gw[i]);
        for (int co = 0; co < F; ++co) {
            double acc = 0.0;
            for (int s = 0; s < n; ++s) acc += detail::sum_lanes(g_stem_z.plane_ptr(s, co), plane);
            grads.stem_bias[static_cast<std::size_t>(co)] = static_cast<float>(acc);
        }
    }
    return grads;
}

}  // namespace owafuse

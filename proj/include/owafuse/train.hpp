#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "owafuse/adam.hpp"
#include "owafuse/checkpoint.hpp"
#include "owafuse/dataset.hpp"
#include "owafuse/model.hpp"
#include "owafuse/parallel.hpp"

namespace owafuse {

struct TrainConfig {
    double lr0 = 0.001;
    int batch = 4;
    int epochs = 20;
    int plateau_patience = 5;
    double lr_factor = 0.1;
    int val_subset = 300;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const {
        if (lr0 <= 0) throw config_error("lr0 must be positive");
        if (batch < 1) throw config_error("batch must be >= 1");
        if (epochs < 0) throw config_error("epochs must be >= 0");
        if (plateau_patience < 1) throw config_error("plateau_patience must be >= 1");
        if (lr_factor <= 0 || lr_factor >= 1) throw config_error("lr_factor must lie in (0, 1)");
        if (val_subset < 1) throw config_error("val_subset must be >= 1");
    }
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
};

struct TrainResult {
    std::string checkpoint_path;
    TrainHistory history;
};

inline void write_history(const TrainHistory& h, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write history: " + path);
    for (const EpochStats& e : h.epochs) {
        const nlohmann::json j = {
            {"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}};
        out << j.dump() << "\n";
    }
}

namespace detail {

struct Sample {
    Tensor input;   // (1, k, h, w)
    Tensor target;  // (1, 1, h, w)
};

inline std::vector<Sample> load_split(const Manifest& m, const std::string& base_dir,
                                      const std::string& split, int limit, int jobs) {
    std::vector<const SampleRecord*> recs;
    for (const auto& r : m.records)
        if (r.split == split) recs.push_back(&r);
    if (limit >= 0 && static_cast<int>(recs.size()) > limit)
        recs.resize(static_cast<std::size_t>(limit));
    std::vector<Sample> samples(recs.size());
    parallel_for(static_cast<std::int64_t>(recs.size()), jobs, [&](std::int64_t i) {
        samples[static_cast<std::size_t>(i)].input = load_record_input(m, *recs[static_cast<std::size_t>(i)], base_dir);
        samples[static_cast<std::size_t>(i)].target = load_record_target(*recs[static_cast<std::size_t>(i)], base_dir);
    });
    return samples;
}

// Forward + loss + backward for one batch of samples. Samples are
// processed independently (parallel across jobs) and reduced in index
// order, so the result is identical for every job count. The loss is the
// mean over all pixels of the batch.
struct BatchResult {
    double loss = 0.0;
    OwaParams grads;
};

inline BatchResult batch_step(const OwaModel& model, const std::vector<const Sample*>& batch,
                              int jobs, bool want_grads) {
    const int n = static_cast<int>(batch.size());
    std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
    std::vector<OwaParams> grads(want_grads ? static_cast<std::size_t>(n) : 0);

    parallel_for(n, jobs, [&](std::int64_t i) {
        const Sample& s = *batch[static_cast<std::size_t>(i)];
        ForwardCache cache;
        const Tensor out = forward(model, s.input, cache);
        BceResult bce = bce_loss(out, s.target);
        losses[static_cast<std::size_t>(i)] = bce.loss;
        if (!want_grads) return;
        // scale to the global batch-pixel mean
        const float inv_n = 1.0f / static_cast<float>(n);
        for (float& v : bce.grad.data) v *= inv_n;
        grads[static_cast<std::size_t>(i)] = backward(model, cache, bce.grad);
    });

    BatchResult result;
    for (double l : losses) result.loss += l;
    result.loss /= n;
    if (want_grads) {
        result.grads = std::move(grads[0]);
        auto views = param_views(result.grads, model.config);
        for (int i = 1; i < n; ++i) {
            auto other = param_views(grads[static_cast<std::size_t>(i)], model.config);
            for (std::size_t b = 0; b < views.size(); ++b)
                for (std::int64_t j = 0; j < views[b].size; ++j)
                    views[b].data[j] += other[b].data[j];
        }
    }
    return result;
}

}  // namespace detail

// Training per the fixed protocol: Adam from lr0, batches of `batch`,
// validation after every epoch on at most val_subset samples, checkpoint
// on strict improvement (1e-6 absolute), learning rate times lr_factor
// after plateau_patience epochs without improvement.
inline TrainResult train(OwaModel& model, const Manifest& manifest, const std::string& data_dir,
                         const TrainConfig& cfg, const std::string& out_dir, int jobs = 1) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "best.owaf").string();

    std::vector<detail::Sample> train_set =
        detail::load_split(manifest, data_dir, "train", -1, jobs);
    if (train_set.empty()) throw config_error("train split is empty");
    std::vector<detail::Sample> val_set =
        detail::load_split(manifest, data_dir, "val", cfg.val_subset, jobs);
    if (val_set.empty()) throw config_error("val split is empty");

    TrainResult result;
    result.checkpoint_path = ckpt_path;
    if (cfg.epochs == 0) {
        save_checkpoint(model, ckpt_path);
        return result;
    }

    std::vector<AdamState> opt_state;
    auto model_views = param_views(model.params, model.config);
    opt_state.reserve(model_views.size());
    for (const ParamView& v : model_views)
        opt_state.emplace_back(static_cast<std::size_t>(v.size));

    const auto val_loss_fn = [&]() {
        std::vector<const detail::Sample*> all;
        for (const auto& s : val_set) all.push_back(&s);
        return detail::batch_step(model, all, jobs, false).loss;
    };

    double lr = cfg.lr0;
    int bad_epochs = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        if (cfg.shuffle) {
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
            rng.shuffle(order);
        }

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch)) {
            std::vector<const detail::Sample*> batch;
            for (std::size_t i = b0; i < std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch)); ++i)
                batch.push_back(&train_set[static_cast<std::size_t>(order[i])]);
            detail::BatchResult step = detail::batch_step(model, batch, jobs, true);
            if (!std::isfinite(step.loss))
                throw train_abort("non-finite training loss at epoch " + std::to_string(epoch) +
                                  " batch " + std::to_string(batches) + ": " +
                                  std::to_string(step.loss));
            auto grad_views = param_views(step.grads, model.config);
            for (std::size_t v = 0; v < model_views.size(); ++v)
                adam_step(model_views[v].data, grad_views[v].data,
                          static_cast<std::size_t>(model_views[v].size), opt_state[v],
                          static_cast<float>(lr));
            loss_sum += step.loss;
            ++batches;
        }

        const double train_loss = loss_sum / batches;
        const double val_loss = val_loss_fn();
        result.history.epochs.push_back({epoch, train_loss, val_loss, lr});
        if (!std::isfinite(val_loss))
            throw train_abort("non-finite validation loss at epoch " + std::to_string(epoch));

        if (val_loss < result.history.best_val - 1e-6) {
            result.history.best_val = val_loss;
            result.history.best_epoch = epoch;
            bad_epochs = 0;
            save_checkpoint(model, ckpt_path);
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.plateau_patience) {
                lr *= cfg.lr_factor;
                bad_epochs = 0;
            }
        }
    }
    return result;
}

}  // namespace owafuse

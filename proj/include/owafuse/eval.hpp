#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "owafuse/dataset.hpp"
#include "owafuse/metrics.hpp"
#include "owafuse/model.hpp"
#include "owafuse/parallel.hpp"

namespace owafuse {

struct EvalRow {
    std::string method;
    Metrics mean;  // macro_f1 / f1_tampered / iou are per-image means; counts are totals
    int n_images = 0;
    int n_skipped = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::string dataset_id;
    double threshold = 0.5;
};

namespace detail {

inline std::vector<const SampleRecord*> split_records(const Manifest& m, const std::string& split) {
    std::vector<const SampleRecord*> recs;
    for (const auto& r : m.records)
        if (r.split == split) recs.push_back(&r);
    return recs;
}

// Per-image metrics averaged unweighted over the dataset; images whose
// map files are missing are skipped and counted.
template <typename MapFn>
inline EvalRow eval_rows(const std::vector<const SampleRecord*>& recs, const std::string& base_dir,
                         const std::string& method, double threshold, int jobs, MapFn map_fn) {
    EvalRow row;
    row.method = method;
    std::vector<Metrics> per_image(recs.size());
    std::vector<std::uint8_t> ok(recs.size(), 0);
    parallel_for(static_cast<std::int64_t>(recs.size()), jobs, [&](std::int64_t i) {
        const SampleRecord& rec = *recs[static_cast<std::size_t>(i)];
        FeatureMap map;
        try {
            map = map_fn(rec);
        } catch (const io_error&) {
            return;  // skip, counted below
        } catch (const format_error&) {
            return;
        }
        const GrayImage gt_raw =
            read_pgm((std::filesystem::path(base_dir) / rec.mask).string());
        BinaryMask gt(gt_raw.h, gt_raw.w);
        gt.values = mask_to_binary(gt_raw);
        per_image[static_cast<std::size_t>(i)] =
            compute_metrics(binarize(map, static_cast<float>(threshold)), gt);
        ok[static_cast<std::size_t>(i)] = 1;
    });
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (!ok[i]) {
            ++row.n_skipped;
            continue;
        }
        const Metrics& m = per_image[i];
        row.mean.macro_f1 += m.macro_f1;
        row.mean.f1_tampered += m.f1_tampered;
        row.mean.iou += m.iou;
        row.mean.tp += m.tp;
        row.mean.fp += m.fp;
        row.mean.fn += m.fn;
        row.mean.tn += m.tn;
        ++row.n_images;
    }
    if (row.n_images > 0) {
        row.mean.macro_f1 /= row.n_images;
        row.mean.f1_tampered /= row.n_images;
        row.mean.iou /= row.n_images;
    }
    return row;
}

}  // namespace detail

// One producer channel of the stacked input: a stored map when the record
// carries that channel, the constant 0.5 fill otherwise.
inline EvalRow evaluate_channel(const Manifest& m, const std::string& base_dir,
                                const std::string& split, int channel, double threshold = 0.5,
                                int jobs = 1) {
    const auto recs = detail::split_records(m, split);
    if (recs.empty()) throw config_error("evaluate: split \"" + split + "\" is empty");
    const std::string label = channel < static_cast<int>(m.producers.size())
                                  ? m.producers[static_cast<std::size_t>(channel)]
                                  : "fill" + std::to_string(channel);
    return detail::eval_rows(
        recs, base_dir, label, threshold, jobs, [&](const SampleRecord& rec) {
            const GrayImage mask =
                read_pgm((std::filesystem::path(base_dir) / rec.mask).string());
            if (channel < static_cast<int>(rec.maps.size())) {
                const FmapData data = read_fmap(
                    (std::filesystem::path(base_dir) / rec.maps[static_cast<std::size_t>(channel)])
                        .string());
                FeatureMap fm(data.h, data.w, 0.0f, label);
                fm.values = data.values;
                return fm;
            }
            return FeatureMap(mask.h, mask.w, 0.5f, label);
        });
}

inline EvalRow evaluate_model(const OwaModel& model, const Manifest& m,
                              const std::string& base_dir, const std::string& split,
                              double threshold = 0.5, int jobs = 1) {
    const auto recs = detail::split_records(m, split);
    if (recs.empty()) throw config_error("evaluate: split \"" + split + "\" is empty");
    return detail::eval_rows(recs, base_dir, "fusion", threshold, jobs,
                             [&](const SampleRecord& rec) {
                                 const Tensor input = load_record_input(m, rec, base_dir);
                                 const Tensor out = forward(model, input);
                                 FeatureMap fm(out.h, out.w, 0.0f, "fusion");
                                 fm.values = out.data;
                                 return fm;
                             });
}

// Producers alphabetically, fusion rows last.
inline void sort_report_rows(EvalReport& report) {
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const EvalRow& a, const EvalRow& b) {
                         const bool fa = a.method == "fusion", fb = b.method == "fusion";
                         if (fa != fb) return !fa;
                         if (fa && fb) return false;
                         return a.method < b.method;
                     });
}

inline void write_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write report: " + path);
    out << "method,macro_f1,f1_tampered,iou,n_images\n";
    char buf[160];
    for (const EvalRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%d\n", r.method.c_str(),
                      r.mean.macro_f1, r.mean.f1_tampered, r.mean.iou, r.n_images);
        out << buf;
    }
}

inline void print_report(const EvalReport& report, std::ostream& out) {
    out << "dataset: " << report.dataset_id << "   threshold: " << report.threshold << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %9s %13s %9s %9s\n", "method", "macro_f1",
                  "f1_tampered", "iou", "images");
    out << buf;
    for (const EvalRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-16s %9.4f %13.4f %9.4f %6d", r.method.c_str(),
                      r.mean.macro_f1, r.mean.f1_tampered, r.mean.iou, r.n_images);
        out << buf;
        if (r.n_skipped > 0) out << "   (" << r.n_skipped << " skipped)";
        out << "\n";
    }
}

}  // namespace owafuse

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "owafuse/parallel.hpp"
#include "owafuse/producers.hpp"
#include "owafuse/png.hpp"
#include "owafuse/synth.hpp"

namespace owafuse {

struct SampleRecord {
    std::string id;
    std::string image;
    std::string mask;
    std::vector<std::string> maps;  // channel order, relative paths
    std::string split;              // train | val | test
};

struct Manifest {
    int version = 1;
    int k = 5;
    std::vector<std::string> producers;  // channel labels, length k
    std::vector<SampleRecord> records;

    int split_count(const std::string& split) const {
        int n = 0;
        for (const auto& r : records)
            if (r.split == split) ++n;
        return n;
    }
};

inline void write_manifest(const Manifest& m, const std::string& path) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : m.records)
        records.push_back({{"id", r.id},
                           {"image", r.image},
                           {"mask", r.mask},
                           {"maps", r.maps},
                           {"split", r.split}});
    const nlohmann::json j = {
        {"version", m.version}, {"k", m.k}, {"producers", m.producers}, {"records", records}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write manifest: " + path);
    out << j.dump(1, '\t') << "\n";
}

inline Manifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("malformed manifest " + path + ": " + e.what());
    }
    Manifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != 1)
            throw format_error("unsupported manifest version " + std::to_string(m.version));
        m.k = j.at("k").get<int>();
        m.producers = j.at("producers").get<std::vector<std::string>>();
        for (const auto& r : j.at("records")) {
            SampleRecord rec;
            rec.id = r.at("id").get<std::string>();
            rec.image = r.at("image").get<std::string>();
            rec.mask = r.at("mask").get<std::string>();
            rec.maps = r.at("maps").get<std::vector<std::string>>();
            rec.split = r.at("split").get<std::string>();
            m.records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error("malformed manifest " + path + ": " + e.what());
    }
    return m;
}

// Referenced files must exist, ids must be unique, masks must match their
// images in size.
inline void validate_manifest(const Manifest& m, const std::string& base_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> ids;
    for (const auto& r : m.records) {
        ids.push_back(r.id);
        for (const std::string& rel : {r.image, r.mask}) {
            if (!fs::exists(fs::path(base_dir) / rel))
                throw format_error("manifest references missing file: " + rel);
        }
        for (const std::string& rel : r.maps)
            if (!fs::exists(fs::path(base_dir) / rel))
                throw format_error("manifest references missing map: " + rel);
        const RgbImage img = read_image((fs::path(base_dir) / r.image).string());
        const GrayImage mask = read_pgm((fs::path(base_dir) / r.mask).string());
        if (img.h != mask.h || img.w != mask.w)
            throw format_error("mask size mismatch for record " + r.id);
        if (static_cast<int>(r.maps.size()) > m.k)
            throw format_error("record " + r.id + " carries more maps than K");
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw format_error("manifest ids are not unique");
}

// Runs the built-in producers on one image and writes their FMAPs next to
// map_dir/<id>.<producer>.fmap; externally computed maps matching the same
// naming convention in external_dir are bound after the built-ins, in
// sorted producer-name order, up to k channels.
inline std::vector<std::string> compute_sample_maps(const std::string& image_path,
                                                    const std::string& map_dir,
                                                    const std::string& id, int k,
                                                    const std::string& external_dir = "") {
    namespace fs = std::filesystem;
    const RgbImage image = read_image(image_path);
    std::vector<std::string> rel_paths;
    for (const FeatureMap& map : compute_builtin_maps(image)) {
        if (static_cast<int>(rel_paths.size()) >= k) break;
        const std::string rel = id + "." + map.producer + ".fmap";
        write_fmap((fs::path(map_dir) / rel).string(), map.w, map.h, 1, map.values.data());
        rel_paths.push_back(rel);
    }
    if (!external_dir.empty()) {
        std::vector<std::string> externals;
        const std::string prefix = id + ".";
        for (const auto& entry : fs::directory_iterator(external_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > prefix.size() + 5 && name.rfind(prefix, 0) == 0 &&
                name.substr(name.size() - 5) == ".fmap") {
                const std::string producer = name.substr(prefix.size(), name.size() - prefix.size() - 5);
                bool builtin = false;
                for (const auto& b : builtin_producers()) builtin = builtin || producer == b;
                if (!builtin) externals.push_back(name);
            }
        }
        std::sort(externals.begin(), externals.end());
        for (const std::string& name : externals) {
            if (static_cast<int>(rel_paths.size()) >= k) break;
            const std::string rel = name;
            fs::copy_file(fs::path(external_dir) / name, fs::path(map_dir) / rel,
                          fs::copy_options::overwrite_existing);
            rel_paths.push_back(rel);
        }
    }
    return rel_paths;
}

struct BuildOptions {
    int n_train = 600, n_val = 50, n_test = 50;
    int k = 5;
    std::uint64_t seed = 1;
    int height = 128, width = 128;
    int jobs = 1;
    std::string external_dir;
};

struct BuildResult {
    Manifest manifest;
    int failed = 0;
};

// Generates the full desk corpus: procedural hosts and donors, one forgery
// per record with the kind drawn uniformly, controlled (q1, q2) with
// |q1 - q2| >= 10, producer maps, and the manifest. Fully deterministic in
// (seed, sizes, counts); records are independent so generation may run on
// any job count with identical bytes.
inline BuildResult build_dataset(const std::string& out_dir, const BuildOptions& opt) {
    namespace fs = std::filesystem;
    if (opt.n_train < 1) throw config_error("n_train must be >= 1");
    if (opt.n_val < 0 || opt.n_test < 0) throw config_error("split counts must be >= 0");
    if (opt.k < 3) throw config_error("k must be >= 3 (built-in producers)");
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");
    fs::create_directories(fs::path(out_dir) / "maps");

    const int total = opt.n_train + opt.n_val + opt.n_test;
    std::vector<SampleRecord> records(static_cast<std::size_t>(total));
    std::vector<std::uint8_t> ok(static_cast<std::size_t>(total), 0);

    parallel_for(total, opt.jobs, [&](std::int64_t i) {
        const std::uint64_t rec_seed = mix_seed(opt.seed, static_cast<std::uint64_t>(i));
        Rng rng(rec_seed);
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "%06lld", static_cast<long long>(i));
        const std::string id(idbuf);
        try {
            const RgbImage host = gen_base_image(mix_seed(rec_seed, 1), opt.height, opt.width);
            const RgbImage donor = gen_base_image(mix_seed(rec_seed, 2), opt.height, opt.width);

            ForgerySpec spec;
            spec.seed = rec_seed;
            spec.kind = static_cast<ForgeryKind>(rng.uniform_int(0, 2));
            spec.region.shape = rng.uniform() < 0.5 ? RegionShape::rect : RegionShape::ellipse;
            // target area fraction comfortably inside [2%, 30%]
            const double frac = rng.uniform(0.04, 0.25);
            const double aspect = rng.uniform(0.6, 1.6);
            const double area_px = frac * opt.height * opt.width;
            const double shape_factor = spec.region.shape == RegionShape::rect ? 4.0 : 3.14159265;
            int ax = std::max(3, static_cast<int>(std::sqrt(area_px / shape_factor * aspect)));
            int ay = std::max(3, static_cast<int>(std::sqrt(area_px / shape_factor / aspect)));
            ax = std::min(ax, opt.width / 2 - 2);
            ay = std::min(ay, opt.height / 2 - 2);
            spec.region.ax = ax;
            spec.region.ay = ay;
            spec.region.cx = static_cast<int>(rng.uniform_int(ax, opt.width - 1 - ax));
            spec.region.cy = static_cast<int>(rng.uniform_int(ay, opt.height - 1 - ay));
            spec.host_quality = static_cast<int>(rng.uniform_int(50, 95));
            do {
                spec.final_quality = static_cast<int>(rng.uniform_int(50, 95));
            } while (std::abs(spec.final_quality - spec.host_quality) < 10);
            if (spec.kind == ForgeryKind::copy_move) {
                for (int attempt = 0; attempt < 64; ++attempt) {
                    spec.src_cx = static_cast<int>(rng.uniform_int(ax, opt.width - 1 - ax));
                    spec.src_cy = static_cast<int>(rng.uniform_int(ay, opt.height - 1 - ay));
                    if (std::abs(spec.src_cx - spec.region.cx) > 2 * ax ||
                        std::abs(spec.src_cy - spec.region.cy) > 2 * ay)
                        break;
                }
                if (std::abs(spec.src_cx - spec.region.cx) <= 2 * ax &&
                    std::abs(spec.src_cy - spec.region.cy) <= 2 * ay)
                    spec.kind = ForgeryKind::removal;  // no disjoint spot; degrade gracefully
            }

            auto [image, mask] = make_forgery(host, donor, spec);
            const std::string image_rel = "images/" + id + ".ppm";
            const std::string mask_rel = "masks/" + id + ".pgm";
            write_ppm(image, (fs::path(out_dir) / image_rel).string());
            write_pgm(mask, (fs::path(out_dir) / mask_rel).string());

            SampleRecord rec;
            rec.id = id;
            rec.image = image_rel;
            rec.mask = mask_rel;
            for (const std::string& rel :
                 compute_sample_maps((fs::path(out_dir) / image_rel).string(),
                                     (fs::path(out_dir) / "maps").string(), id, opt.k,
                                     opt.external_dir))
                rec.maps.push_back("maps/" + rel);
            rec.split = i < opt.n_train ? "train" : (i < opt.n_train + opt.n_val ? "val" : "test");
            records[static_cast<std::size_t>(i)] = std::move(rec);
            ok[static_cast<std::size_t>(i)] = 1;
        } catch (const std::exception&) {
            ok[static_cast<std::size_t>(i)] = 0;
        }
    });

    BuildResult result;
    result.manifest.k = opt.k;
    result.manifest.producers = builtin_producers();
    for (int c = static_cast<int>(result.manifest.producers.size()); c < opt.k; ++c)
        result.manifest.producers.push_back("fill" + std::to_string(c));
    for (int i = 0; i < total; ++i) {
        if (ok[static_cast<std::size_t>(i)])
            result.manifest.records.push_back(std::move(records[static_cast<std::size_t>(i)]));
        else
            ++result.failed;
    }
    write_manifest(result.manifest, (fs::path(out_dir) / "manifest.json").string());
    return result;
}

// Loads a record's stacked input tensor (1, k, h, w): stored maps first,
// the 0.5 fill for unbound channels.
inline Tensor load_record_input(const Manifest& m, const SampleRecord& rec,
                                const std::string& base_dir) {
    namespace fs = std::filesystem;
    std::vector<FeatureMap> maps;
    for (const std::string& rel : rec.maps) {
        const FmapData data = read_fmap((fs::path(base_dir) / rel).string());
        if (data.c != 1) throw format_error("map " + rel + " must have one channel");
        FeatureMap fm(data.h, data.w, 0.0f, "");
        fm.values = data.values;
        maps.push_back(std::move(fm));
    }
    return stack_maps(maps, m.k);
}

inline Tensor load_record_target(const SampleRecord& rec, const std::string& base_dir) {
    namespace fs = std::filesystem;
    const GrayImage mask = read_pgm((fs::path(base_dir) / rec.mask).string());
    Tensor target(1, 1, mask.h, mask.w);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        target.data[i] = mask.data[i] >= 128 ? 1.0f : 0.0f;
    return target;
}

}  // namespace owafuse

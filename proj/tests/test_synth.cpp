#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "owafuse/dataset.hpp"
#include "owafuse/synth.hpp"

using namespace owafuse;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "owafuse_synth_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double region_luma_variance(const RgbImage& img, const Region& region) {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t n = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (!region.contains(y, x)) continue;
            const double l =
                0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
            sum += l;
            sumsq += l * l;
            ++n;
        }
    const double mean = sum / n;
    return sumsq / n - mean * mean;
}

}  // namespace

TEST(GenBaseImage, DeterministicPerSeed) {
    RgbImage a = gen_base_image(42, 96, 80);
    RgbImage b = gen_base_image(42, 96, 80);
    EXPECT_EQ(a.data, b.data);
}

TEST(GenBaseImage, DifferentSeedsDiffer) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        RgbImage a = gen_base_image(1000 + s, 64, 64);
        RgbImage b = gen_base_image(2000 + s, 64, 64);
        std::int64_t diff = 0;
        for (std::size_t i = 0; i < a.data.size(); i += 3)
            if (a.data[i] != b.data[i] || a.data[i + 1] != b.data[i + 1] ||
                a.data[i + 2] != b.data[i + 2])
                ++diff;
        EXPECT_GT(static_cast<double>(diff) / (64.0 * 64.0), 0.5);
    }
}

TEST(GenBaseImage, SizeBounds) {
    EXPECT_THROW(gen_base_image(1, 32, 128), config_error);
    EXPECT_THROW(gen_base_image(1, 128, 600), config_error);
    EXPECT_NO_THROW(gen_base_image(1, 64, 512));
}

TEST(MakeForgery, RectMaskAreaIsExact) {
    const RgbImage host = gen_base_image(10, 128, 128);
    const RgbImage donor = gen_base_image(11, 128, 128);
    ForgerySpec spec;
    spec.kind = ForgeryKind::splicing;
    spec.region = {RegionShape::rect, 64, 64, 20, 15};
    spec.host_quality = 70;
    spec.final_quality = 90;
    auto [image, mask] = make_forgery(host, donor, spec);
    std::int64_t count = 0;
    for (std::uint8_t v : mask.data) {
        EXPECT_TRUE(v == 0 || v == 255);
        if (v == 255) ++count;
    }
    EXPECT_EQ(count, (2 * 20 + 1) * (2 * 15 + 1));
    EXPECT_EQ(image.h, 128);
    EXPECT_EQ(image.w, 128);
}

TEST(MakeForgery, SpecValidation) {
    const RgbImage host = gen_base_image(12, 128, 128);
    ForgerySpec spec;
    spec.region = {RegionShape::rect, 64, 64, 3, 3};  // under 2% area
    spec.host_quality = 70;
    spec.final_quality = 90;
    EXPECT_THROW(make_forgery(host, host, spec), config_error);

    spec.region = {RegionShape::rect, 64, 64, 20, 20};
    spec.final_quality = 70;  // equal qualities
    EXPECT_THROW(make_forgery(host, host, spec), config_error);

    spec.final_quality = 90;
    spec.kind = ForgeryKind::copy_move;
    spec.src_cx = 70;  // overlaps the target
    spec.src_cy = 64;
    EXPECT_THROW(make_forgery(host, host, spec), config_error);

    spec.src_cx = 20;
    spec.src_cy = 20;
    EXPECT_NO_THROW(make_forgery(host, host, spec));
}

TEST(MakeForgery, RemovalFlattensRegion) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RgbImage host = gen_base_image(mix_seed(seed, 1), 128, 128);
        ForgerySpec spec;
        spec.kind = ForgeryKind::removal;
        spec.seed = seed;
        spec.region = {RegionShape::rect, 64, 64, 22, 22};
        spec.host_quality = 75;
        spec.final_quality = 60;
        const RgbImage before = jpeg_round_trip(host, spec.host_quality);
        auto [image, mask] = make_forgery(host, host, spec);
        if (region_luma_variance(image, spec.region) < region_luma_variance(before, spec.region))
            ++hits;
    }
    EXPECT_GE(hits, 16) << hits << "/20";
}

TEST(MakeForgery, Deterministic) {
    const RgbImage host = gen_base_image(13, 96, 96);
    const RgbImage donor = gen_base_image(14, 96, 96);
    ForgerySpec spec;
    spec.kind = ForgeryKind::removal;
    spec.seed = 77;
    spec.region = {RegionShape::ellipse, 48, 48, 18, 14};
    spec.host_quality = 60;
    spec.final_quality = 85;
    auto [a, ma] = make_forgery(host, donor, spec);
    auto [b, mb] = make_forgery(host, donor, spec);
    EXPECT_EQ(a.data, b.data);
    EXPECT_EQ(ma.data, mb.data);
}

TEST(BuildDataset, CountsFilesAndDeterminism) {
    const fs::path dir = fresh_dir("build_a");
    BuildOptions opt;
    opt.n_train = 6;
    opt.n_val = 2;
    opt.n_test = 2;
    opt.k = 5;
    opt.seed = 9;
    opt.height = 64;
    opt.width = 64;
    const BuildResult result = build_dataset(dir.string(), opt);
    EXPECT_EQ(result.failed, 0);
    const Manifest& m = result.manifest;
    EXPECT_EQ(m.records.size(), 10u);
    EXPECT_EQ(m.split_count("train"), 6);
    EXPECT_EQ(m.split_count("val"), 2);
    EXPECT_EQ(m.split_count("test"), 2);
    ASSERT_EQ(m.producers.size(), 5u);
    EXPECT_EQ(m.producers[0], "adq1");
    EXPECT_EQ(m.producers[3], "fill3");
    for (const auto& r : m.records) EXPECT_EQ(r.maps.size(), 3u);
    EXPECT_NO_THROW(validate_manifest(m, dir.string()));

    // manifest round trip
    const Manifest back = read_manifest((dir / "manifest.json").string());
    EXPECT_EQ(back.k, m.k);
    EXPECT_EQ(back.records.size(), m.records.size());
    EXPECT_EQ(back.records[3].id, m.records[3].id);
    EXPECT_EQ(back.records[3].maps, m.records[3].maps);

    // same seed reproduces byte-identical masks and manifest
    const fs::path dir2 = fresh_dir("build_b");
    build_dataset(dir2.string(), opt);
    for (const auto& r : m.records) {
        std::ifstream f1((dir / r.mask).string(), std::ios::binary);
        std::ifstream f2((dir2 / r.mask).string(), std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        EXPECT_EQ(b1, b2) << r.mask;
    }
    std::ifstream m1((dir / "manifest.json").string()), m2((dir2 / "manifest.json").string());
    const std::string s1((std::istreambuf_iterator<char>(m1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(m2)), std::istreambuf_iterator<char>());
    EXPECT_EQ(s1, s2);
}

TEST(BuildDataset, StoredMapsMatchDirectProducers) {
    const fs::path dir = fresh_dir("maps_direct");
    BuildOptions opt;
    opt.n_train = 2;
    opt.n_val = 1;
    opt.n_test = 1;
    opt.height = 64;
    opt.width = 64;
    opt.seed = 21;
    const Manifest m = build_dataset(dir.string(), opt).manifest;
    for (const auto& rec : m.records) {
        const RgbImage img = read_image((dir / rec.image).string());
        const std::vector<FeatureMap> direct = compute_builtin_maps(img);
        for (std::size_t j = 0; j < rec.maps.size(); ++j) {
            const FmapData stored = read_fmap((dir / rec.maps[j]).string());
            ASSERT_EQ(stored.values.size(), direct[j].values.size());
            EXPECT_EQ(0, std::memcmp(stored.values.data(), direct[j].values.data(),
                                     stored.values.size() * sizeof(float)))
                << rec.maps[j];
        }
    }
}

TEST(BuildDataset, ExternalMapsBoundByName) {
    const fs::path ext = fresh_dir("externals");
    // externals for the first record only
    std::vector<float> vals(64 * 64, 0.25f);
    write_fmap((ext / "000000.sb.fmap").string(), 64, 64, 1, vals.data());

    const fs::path dir = fresh_dir("build_ext");
    BuildOptions opt;
    opt.n_train = 2;
    opt.n_val = 1;
    opt.n_test = 1;
    opt.height = 64;
    opt.width = 64;
    opt.seed = 30;
    opt.external_dir = ext.string();
    const Manifest m = build_dataset(dir.string(), opt).manifest;
    EXPECT_EQ(m.records[0].maps.size(), 4u);  // 3 builtins + 1 external
    EXPECT_NE(m.records[0].maps[3].find("sb"), std::string::npos);
    EXPECT_EQ(m.records[1].maps.size(), 3u);
}

TEST(BuildDataset, RecordLoadersAndFill) {
    const fs::path dir = fresh_dir("loaders");
    BuildOptions opt;
    opt.n_train = 1;
    opt.n_val = 1;
    opt.n_test = 1;
    opt.height = 64;
    opt.width = 64;
    opt.seed = 31;
    const Manifest m = build_dataset(dir.string(), opt).manifest;
    const Tensor input = load_record_input(m, m.records[0], dir.string());
    EXPECT_EQ(input.c, 5);
    EXPECT_EQ(input.h, 64);
    for (int ch : {3, 4})
        for (std::int64_t i = 0; i < input.plane(); ++i)
            EXPECT_EQ(input.data[ch * input.plane() + i], 0.5f);
    const Tensor target = load_record_target(m.records[0], dir.string());
    EXPECT_EQ(target.c, 1);
    double frac = 0;
    for (float v : target.data) {
        EXPECT_TRUE(v == 0.0f || v == 1.0f);
        frac += v;
    }
    frac /= static_cast<double>(target.size());
    EXPECT_GT(frac, 0.015);
    EXPECT_LT(frac, 0.31);
}

TEST(BuildDataset, ValidatesConfig) {
    const fs::path dir = fresh_dir("badcfg");
    BuildOptions opt;
    opt.n_train = 0;
    EXPECT_THROW(build_dataset(dir.string(), opt), config_error);
    opt.n_train = 1;
    opt.k = 2;
    EXPECT_THROW(build_dataset(dir.string(), opt), config_error);
}

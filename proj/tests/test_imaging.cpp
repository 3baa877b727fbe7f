#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "owafuse/dct.hpp"
#include "owafuse/fmap.hpp"
#include "owafuse/jpeg.hpp"
#include "owafuse/png.hpp"
#include "owafuse/raster.hpp"
#include "owafuse/rng.hpp"
#include "owafuse/synth.hpp"

using namespace owafuse;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "owafuse_imaging_test";
    fs::create_directories(p);
    return p;
}

RgbImage noisy_image(int h, int w, std::uint64_t seed) {
    RgbImage img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace

TEST(Raster, PpmRoundTrip) {
    RgbImage img = noisy_image(13, 17, 1);
    const auto path = (temp_dir() / "rt.ppm").string();
    write_ppm(img, path);
    RgbImage back = read_ppm(path);
    ASSERT_EQ(back.h, 13);
    ASSERT_EQ(back.w, 17);
    EXPECT_EQ(img.data, back.data);
    EXPECT_THROW(read_ppm((temp_dir() / "missing.ppm").string()), io_error);
}

TEST(Raster, PgmRoundTripAndMaskThreshold) {
    GrayImage mask(4, 4);
    mask.at(0, 0) = 255;
    mask.at(1, 1) = 127;
    mask.at(2, 2) = 128;
    const auto path = (temp_dir() / "rt.pgm").string();
    write_pgm(mask, path);
    GrayImage back = read_pgm(path);
    EXPECT_EQ(mask.data, back.data);
    const auto bin = mask_to_binary(back);
    EXPECT_EQ(bin[0], 1);
    EXPECT_EQ(bin[5], 0);   // 127 < 128
    EXPECT_EQ(bin[10], 1);  // 128 thresholds to tampered
}

TEST(Raster, PnmFormatErrors) {
    const auto path = (temp_dir() / "bad.ppm").string();
    std::ofstream(path, std::ios::binary) << "P3\n2 2\n255\n";
    EXPECT_THROW(read_ppm(path), format_error);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << "P6\n2 2\n255\nab";
    EXPECT_THROW(read_ppm(path), format_error);  // truncated payload
}

TEST(Png, RoundTripRgbAndGray) {
    RgbImage img = noisy_image(21, 15, 2);
    const auto path = (temp_dir() / "rt.png").string();
    write_png(img, path);
    RgbImage back = read_png(path);
    ASSERT_EQ(back.h, img.h);
    ASSERT_EQ(back.w, img.w);
    EXPECT_EQ(img.data, back.data);

    GrayImage g(9, 7);
    Rng rng(3);
    for (auto& v : g.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto gpath = (temp_dir() / "rt_gray.png").string();
    write_png(g, gpath);
    RgbImage gb = read_png(gpath);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 7; ++x) {
            EXPECT_EQ(gb.at(y, x, 0), g.at(y, x));
            EXPECT_EQ(gb.at(y, x, 1), g.at(y, x));
        }
}

TEST(Png, ReadImageDispatchAndErrors) {
    RgbImage img = noisy_image(8, 8, 4);
    const auto ppm = (temp_dir() / "dispatch.ppm").string();
    const auto png = (temp_dir() / "dispatch.png").string();
    write_ppm(img, ppm);
    write_png(img, png);
    EXPECT_EQ(read_image(ppm).data, read_image(png).data);

    const auto bogus = (temp_dir() / "bogus.dat").string();
    std::ofstream(bogus, std::ios::binary) << "hello";
    EXPECT_THROW(read_image(bogus), format_error);
}

TEST(Dct, ConstantBlocks) {
    LumaImage flat(8, 8);
    std::fill(flat.values.begin(), flat.values.end(), 128.0f);
    BlockDct d = block_dct8(flat);
    for (float c : d.coeff) EXPECT_NEAR(c, 0.0, 1e-9);

    std::fill(flat.values.begin(), flat.values.end(), 128.0f + 5.0f);
    d = block_dct8(flat);
    EXPECT_NEAR(d.at(0, 0, 0, 0), 8.0 * 5.0, 1e-4);  // orthonormal DC gain
    for (int i = 1; i < 64; ++i) EXPECT_NEAR(d.coeff[static_cast<std::size_t>(i)], 0.0, 1e-4);
}

TEST(Dct, MatchesNaiveDoubleSumOracle) {
    LumaImage img(8, 8);
    Rng rng(10);
    double centered[64];
    for (int i = 0; i < 64; ++i) {
        img.values[static_cast<std::size_t>(i)] = static_cast<float>(rng.uniform(0, 255));
        centered[i] = static_cast<double>(img.values[static_cast<std::size_t>(i)]) - 128.0;
    }
    BlockDct d = block_dct8(img);
    double want[64];
    oracle::naive_dct8(centered, want);
    for (int i = 0; i < 64; ++i)
        EXPECT_NEAR(d.coeff[static_cast<std::size_t>(i)], want[i],
                    1e-6 * std::max(1.0, std::abs(want[i])));  // float storage: 1e-6 relative
}

TEST(Dct, RoundTripWithinTolerance) {
    LumaImage img(16, 24);
    Rng rng(11);
    for (float& v : img.values) v = static_cast<float>(rng.uniform(0, 255));
    const LumaImage back = block_idct8(block_dct8(img));
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 24; ++x) EXPECT_NEAR(back.at(y, x), img.at(y, x), 1e-3);
}

TEST(Dct, CropsAndRejectsTinyImages) {
    LumaImage img(19, 10);
    BlockDct d = block_dct8(img);
    EXPECT_EQ(d.blocks_y, 2);
    EXPECT_EQ(d.blocks_x, 1);
    EXPECT_THROW(block_dct8(LumaImage(7, 20)), contract_error);
}

TEST(Jpeg, HighQualityFidelity) {
    RgbImage img = gen_base_image(100, 96, 96);
    RgbImage back = jpeg_round_trip(img, 95);
    ASSERT_EQ(back.h, img.h);
    ASSERT_EQ(back.w, img.w);
    double mae = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        mae += std::abs(static_cast<int>(img.data[i]) - static_cast<int>(back.data[i]));
    mae /= static_cast<double>(img.data.size());
    EXPECT_LT(mae, 3.0);
}

TEST(Jpeg, ApproximateIdempotence) {
    RgbImage img = gen_base_image(101, 96, 96);
    RgbImage once = jpeg_round_trip(img, 75);
    RgbImage twice = jpeg_round_trip(once, 75);
    std::int64_t changed = 0;
    for (std::size_t i = 0; i < once.data.size(); ++i)
        if (std::abs(static_cast<int>(once.data[i]) - static_cast<int>(twice.data[i])) > 2)
            ++changed;
    EXPECT_LT(static_cast<double>(changed) / static_cast<double>(once.data.size()), 0.01);
}

TEST(Jpeg, NonMultipleOfEightSizes) {
    RgbImage img = noisy_image(67, 93, 12);
    RgbImage back = jpeg_round_trip(img, 80);
    EXPECT_EQ(back.h, 67);
    EXPECT_EQ(back.w, 93);
    EXPECT_THROW(jpeg_round_trip(img, 30), contract_error);
}

TEST(Fmap, RoundTripBitIdentical) {
    Rng rng(20);
    std::vector<float> vals(32 * 24);
    for (float& v : vals) v = static_cast<float>(rng.uniform(0, 1));
    const auto path = (temp_dir() / "rt.fmap").string();
    write_fmap(path, 24, 32, 1, vals.data());
    FmapData back = read_fmap(path);
    EXPECT_EQ(back.w, 24);
    EXPECT_EQ(back.h, 32);
    EXPECT_EQ(back.c, 1);
    EXPECT_EQ(0, std::memcmp(back.values.data(), vals.data(), vals.size() * sizeof(float)));
}

TEST(Fmap, ErrorsNameTheProblem) {
    const auto path = (temp_dir() / "bad.fmap").string();
    std::ofstream(path, std::ios::binary) << "XMAP1\n2 2 1\n";
    try {
        read_fmap(path);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("XMAP"), std::string::npos);
    }

    std::ofstream(path, std::ios::binary | std::ios::trunc) << "FMAP1\n2 2 1\nshort";
    EXPECT_THROW(read_fmap(path), format_error);
}

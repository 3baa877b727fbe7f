#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "owafuse/errors.hpp"

namespace owafuse {

struct RgbImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> data;  // h*w*3, interleaved

    RgbImage() = default;
    RgbImage(int h_, int w_) : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3, 0) {}
    std::uint8_t& at(int y, int x, int ch) {
        return data[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(ch)];
    }
    std::uint8_t at(int y, int x, int ch) const {
        return data[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(ch)];
    }
};

struct GrayImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> data;  // h*w

    GrayImage() = default;
    GrayImage(int h_, int w_) : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, 0) {}
    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

struct LumaImage {
    int h = 0, w = 0;
    std::vector<float> values;  // [0, 255]

    LumaImage() = default;
    LumaImage(int h_, int w_) : h(h_), w(w_), values(static_cast<std::size_t>(h_) * w_, 0.0f) {}
    float& at(int y, int x) { return values[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * w + x]; }
};

// BT.601 luminance, matching baseline JPEG conventions.
inline LumaImage luminance(const RgbImage& img) {
    if (img.h <= 0 || img.w <= 0) throw contract_error("luminance: empty image");
    LumaImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            out.at(y, x) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                           0.114f * img.at(y, x, 2);
    return out;
}

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comment lines.
inline std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
            return tok;
        }
    }
    return tok;
}

inline int pnm_int(std::istream& in, const std::string& path, const char* what) {
    const std::string tok = pnm_token(in);
    try {
        return std::stoi(tok);
    } catch (...) {
        throw format_error(std::string("bad ") + what + " in " + path);
    }
}

}  // namespace detail

inline void write_ppm(const RgbImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw io_error("short write: " + path);
}

inline RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    if (detail::pnm_token(in) != "P6") throw format_error("not a binary PPM (P6): " + path);
    const int w = detail::pnm_int(in, path, "width");
    const int h = detail::pnm_int(in, path, "height");
    const int maxval = detail::pnm_int(in, path, "maxval");
    if (maxval != 255) throw format_error("unsupported PPM maxval in " + path);
    in.get();  // single whitespace after maxval
    RgbImage img(h, w);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw format_error("truncated PPM payload: " + path);
    return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw io_error("short write: " + path);
}

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    if (detail::pnm_token(in) != "P5") throw format_error("not a binary PGM (P5): " + path);
    const int w = detail::pnm_int(in, path, "width");
    const int h = detail::pnm_int(in, path, "height");
    const int maxval = detail::pnm_int(in, path, "maxval");
    if (maxval != 255) throw format_error("unsupported PGM maxval in " + path);
    in.get();
    GrayImage img(h, w);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw format_error("truncated PGM payload: " + path);
    return img;
}

// Masks: 0 = pristine, 255 = tampered, thresholded at 128 on read.
inline std::vector<std::uint8_t> mask_to_binary(const GrayImage& mask) {
    std::vector<std::uint8_t> bin(mask.data.size());
    for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = mask.data[i] >= 128 ? 1 : 0;
    return bin;
}

}  // namespace owafuse

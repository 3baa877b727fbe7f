#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "owafuse/raster.hpp"

namespace owafuse {

// Minimal PNG support: 8-bit gray / RGB / RGBA (gray+alpha too), not
// interlaced. That covers everything this project writes plus common
// externally produced rasters; anything else raises format_error.

namespace detail {

inline void png_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline std::uint32_t png_read_be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void png_chunk(std::string& out, const char type[4], const std::string& payload) {
    png_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    const auto crc =
        crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start), static_cast<uInt>(out.size() - crc_start));
    png_be32(out, static_cast<std::uint32_t>(crc));
}

inline std::string zlib_deflate(const std::string& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string out(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  Z_BEST_SPEED) != Z_OK)
        throw io_error("png: deflate failed");
    out.resize(bound);
    return out;
}

inline std::string zlib_inflate(const std::string& compressed, std::size_t expected) {
    std::string out(expected, '\0');
    uLongf got = static_cast<uLongf>(expected);
    const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &got,
                              reinterpret_cast<const Bytef*>(compressed.data()),
                              static_cast<uLong>(compressed.size()));
    if (rc != Z_OK || got != expected) throw format_error("png: inflate failed");
    return out;
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
}

inline void png_write(const std::string& path, int h, int w, int channels,
                      const std::uint8_t* pixels) {
    std::string raw;
    raw.reserve(static_cast<std::size_t>(h) * (static_cast<std::size_t>(w) * channels + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back('\0');  // filter: none
        raw.append(reinterpret_cast<const char*>(pixels + static_cast<std::size_t>(y) * w * channels),
                   static_cast<std::size_t>(w) * channels);
    }
    std::string ihdr;
    png_be32(ihdr, static_cast<std::uint32_t>(w));
    png_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                               // bit depth
    ihdr.push_back(channels == 1 ? 0 : char(2));     // color type
    ihdr.push_back(0);                               // compression
    ihdr.push_back(0);                               // filter
    ihdr.push_back(0);                               // interlace

    std::string blob("\x89PNG\r\n\x1a\n", 8);
    png_chunk(blob, "IHDR", ihdr);
    png_chunk(blob, "IDAT", zlib_deflate(raw));
    png_chunk(blob, "IEND", "");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw io_error("short write: " + path);
}

}  // namespace detail

inline void write_png(const RgbImage& img, const std::string& path) {
    detail::png_write(path, img.h, img.w, 3, img.data.data());
}

inline void write_png(const GrayImage& img, const std::string& path) {
    detail::png_write(path, img.h, img.w, 1, img.data.data());
}

inline RgbImage read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data());
    if (blob.size() < 8 || std::memcmp(p, "\x89PNG\r\n\x1a\n", 8) != 0)
        throw format_error("not a PNG file: " + path);

    int w = 0, h = 0, depth = 0, color = 0, interlace = 0;
    std::string idat;
    std::size_t off = 8;
    while (off + 12 <= blob.size()) {
        const std::uint32_t len = detail::png_read_be32(p + off);
        const char* type = blob.data() + off + 4;
        if (off + 12 + len > blob.size()) throw format_error("truncated PNG chunk in " + path);
        const char* payload = blob.data() + off + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = static_cast<int>(detail::png_read_be32(reinterpret_cast<const unsigned char*>(payload)));
            h = static_cast<int>(detail::png_read_be32(reinterpret_cast<const unsigned char*>(payload) + 4));
            depth = payload[8];
            color = payload[9];
            interlace = payload[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.append(payload, len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (w <= 0 || h <= 0) throw format_error("missing PNG IHDR in " + path);
    if (depth != 8 || interlace != 0)
        throw format_error("unsupported PNG (need 8-bit, non-interlaced): " + path);
    int channels;
    switch (color) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default: throw format_error("unsupported PNG color type in " + path);
    }

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    const std::string raw = detail::zlib_inflate(idat, static_cast<std::size_t>(h) * (stride + 1));

    std::vector<std::uint8_t> pix(static_cast<std::size_t>(h) * stride);
    for (int y = 0; y < h; ++y) {
        const int filter = static_cast<std::uint8_t>(raw[static_cast<std::size_t>(y) * (stride + 1)]);
        const unsigned char* src =
            reinterpret_cast<const unsigned char*>(raw.data()) + static_cast<std::size_t>(y) * (stride + 1) + 1;
        std::uint8_t* dst = pix.data() + static_cast<std::size_t>(y) * stride;
        const std::uint8_t* prev = y > 0 ? pix.data() + static_cast<std::size_t>(y - 1) * stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= static_cast<std::size_t>(channels)) ? prev[i - channels] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, c); break;
                default: throw format_error("bad PNG filter in " + path);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    RgbImage img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* s = pix.data() + static_cast<std::size_t>(y) * stride +
                                    static_cast<std::size_t>(x) * channels;
            if (channels <= 2) {
                img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = s[0];
            } else {
                img.at(y, x, 0) = s[0];
                img.at(y, x, 1) = s[1];
                img.at(y, x, 2) = s[2];
            }
        }
    return img;
}

// Dispatch on file magic; accepts PNG and binary PPM.
inline RgbImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.close();
    if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') return read_png(path);
    throw format_error("unrecognized image format (want PNG or P6 PPM): " + path);
}

}  // namespace owafuse

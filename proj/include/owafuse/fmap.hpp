#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "owafuse/errors.hpp"

namespace owafuse {

// FMAP map file: "FMAP1\n", ASCII header "w h c\n", then w*h*c little-endian
// 32-bit floats, row-major planes in channel order.

struct FmapData {
    int w = 0, h = 0, c = 0;
    std::vector<float> values;
};

inline void write_fmap(const std::string& path, int w, int h, int c, const float* values) {
    std::string blob = "FMAP1\n" + std::to_string(w) + " " + std::to_string(h) + " " +
                       std::to_string(c) + "\n";
    blob.reserve(blob.size() + static_cast<std::size_t>(w) * h * c * 4);
    const std::int64_t count = static_cast<std::int64_t>(w) * h * c;
    for (std::int64_t i = 0; i < count; ++i) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
        blob.push_back(static_cast<char>(bits & 0xff));
        blob.push_back(static_cast<char>((bits >> 8) & 0xff));
        blob.push_back(static_cast<char>((bits >> 16) & 0xff));
        blob.push_back(static_cast<char>((bits >> 24) & 0xff));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw io_error("short write: " + path);
}

inline FmapData read_fmap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 6 || blob.compare(0, 6, "FMAP1\n") != 0) {
        const std::string got = blob.substr(0, std::min<std::size_t>(5, blob.size()));
        throw format_error("bad FMAP magic \"" + got + "\" in " + path);
    }
    const std::size_t header_end = blob.find('\n', 6);
    if (header_end == std::string::npos) throw format_error("unterminated FMAP header in " + path);

    FmapData map;
    if (std::sscanf(blob.c_str() + 6, "%d %d %d", &map.w, &map.h, &map.c) != 3 || map.w <= 0 ||
        map.h <= 0 || map.c <= 0)
        throw format_error("bad FMAP header in " + path);

    const std::size_t count = static_cast<std::size_t>(map.w) * map.h * map.c;
    const std::size_t payload = blob.size() - header_end - 1;
    if (payload != count * 4)
        throw format_error("FMAP payload is " + std::to_string(payload) + " bytes, expected " +
                           std::to_string(count * 4) + " in " + path);
    map.values.resize(count);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + header_end + 1;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                   (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) |
                                   (static_cast<std::uint32_t>(p[3]) << 24);
        map.values[i] = std::bit_cast<float>(bits);
    }
    return map;
}

}  // namespace owafuse

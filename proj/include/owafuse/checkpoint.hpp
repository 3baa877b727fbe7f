#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "owafuse/model.hpp"

namespace owafuse {

// OWAF1 checkpoint: 6-byte magic "OWAF1\n", one UTF-8 JSON header line
// (config + ordered parameter manifest), '\n', then the raw little-endian
// 32-bit float payload in manifest order.

inline constexpr char kCheckpointMagic[6] = {'O', 'W', 'A', 'F', '1', '\n'};

namespace detail {

inline nlohmann::json config_to_json(const OwaConfig& cfg) {
    nlohmann::json ops = nlohmann::json::array();
    for (OpKind k : cfg.op_set) ops.push_back(op_kind_name(k));
    return {{"in_channels", cfg.in_channels},
            {"feature_width", cfg.feature_width},
            {"num_layers", cfg.num_layers},
            {"attention_hidden", cfg.attention_hidden},
            {"residual", cfg.residual},
            {"seed", cfg.seed},
            {"op_set", ops}};
}

inline OwaConfig config_from_json(const nlohmann::json& j) {
    OwaConfig cfg;
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.feature_width = j.at("feature_width").get<int>();
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.attention_hidden = j.at("attention_hidden").get<int>();
    cfg.residual = j.at("residual").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.op_set.clear();
    for (const auto& name : j.at("op_set")) cfg.op_set.push_back(op_kind_from_name(name));
    return cfg;
}

inline void put_le32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void save_checkpoint(const OwaModel& model, const std::string& path) {
    OwaParams& params = const_cast<OwaParams&>(model.params);
    const std::vector<ParamView> views = param_views(params, model.config);

    nlohmann::json manifest = nlohmann::json::array();
    for (const ParamView& v : views)
        manifest.push_back({{"name", v.name}, {"shape", v.shape}});
    const nlohmann::json header = {{"config", detail::config_to_json(model.config)},
                                   {"params", manifest}};

    std::string blob(kCheckpointMagic, sizeof(kCheckpointMagic));
    blob += header.dump();
    blob += '\n';
    for (const ParamView& v : views)
        for (std::int64_t i = 0; i < v.size; ++i)
            detail::put_le32(blob, std::bit_cast<std::uint32_t>(v.data[i]));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw io_error("short write saving checkpoint: " + path);
}

inline OwaModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < sizeof(kCheckpointMagic) ||
        blob.compare(0, sizeof(kCheckpointMagic), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        if (blob.compare(0, 4, "OWAF", 4) == 0)
            throw checkpoint_magic_error("unsupported checkpoint version in " + path);
        throw checkpoint_magic_error("bad checkpoint magic in " + path);
    }

    const std::size_t header_start = sizeof(kCheckpointMagic);
    const std::size_t header_end = blob.find('\n', header_start);
    if (header_end == std::string::npos)
        throw checkpoint_error("unterminated checkpoint header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(header_start, header_end - header_start));
    } catch (const nlohmann::json::exception& e) {
        throw checkpoint_error("malformed checkpoint header in " + path + ": " + e.what());
    }

    OwaModel model;
    try {
        model.config = detail::config_from_json(header.at("config"));
        model.config.validate();
    } catch (const nlohmann::json::exception& e) {
        throw checkpoint_error("malformed checkpoint config in " + path + ": " + e.what());
    } catch (const config_error& e) {
        throw checkpoint_error("invalid checkpoint config in " + path + ": " + e.what());
    }
    model.params = make_params(model.config);
    const std::vector<ParamView> views = param_views(model.params, model.config);

    // The manifest must match the shapes the config implies, entry by entry.
    const auto& manifest = header.at("params");
    if (!manifest.is_array() || manifest.size() != views.size())
        throw checkpoint_shape_error("checkpoint manifest has " + std::to_string(manifest.size()) +
                                     " blocks, config implies " + std::to_string(views.size()));
    std::int64_t total = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const std::string name = manifest[i].at("name").get<std::string>();
        const std::vector<int> shape = manifest[i].at("shape").get<std::vector<int>>();
        if (name != views[i].name || shape != views[i].shape)
            throw checkpoint_shape_error("checkpoint block " + std::to_string(i) + " is " + name +
                                         ", config implies " + views[i].name);
        total += views[i].size;
    }

    const std::size_t payload_start = header_end + 1;
    const std::size_t expected = static_cast<std::size_t>(total) * 4;
    if (blob.size() - payload_start != expected)
        throw checkpoint_payload_error("checkpoint payload is " +
                                       std::to_string(blob.size() - payload_start) + " bytes, " +
                                       "expected " + std::to_string(expected) + " in " + path);

    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(blob.data()) + payload_start;
    for (const ParamView& v : views)
        for (std::int64_t i = 0; i < v.size; ++i, p += 4)
            v.data[i] = std::bit_cast<float>(detail::get_le32(p));
    return model;
}

}  // namespace owafuse

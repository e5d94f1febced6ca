#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nightcc/nn.hpp"

namespace nightcc::rl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

/// Writes `<stem>.bin` (concatenated raw float32 tensors, little-endian)
/// and `<stem>.json` (names, shapes, offsets, config hash).
inline void save_checkpoint(const std::filesystem::path& stem, const ParamList<float>& tensors,
                            const std::string& config_hash, std::uint64_t seed) {
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin)
        throw data_error("cannot write checkpoint: " + stem.string() + ".bin");
    nlohmann::json manifest;
    manifest["format"] = "nightcc-checkpoint-v1";
    manifest["config_hash"] = config_hash;
    manifest["seed"] = seed;
    manifest["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        bin.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.count * sizeof(float)));
        manifest["tensors"].push_back(
            {{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.count}});
        offset += t.count * sizeof(float);
    }
    if (!bin)
        throw data_error("short write on checkpoint: " + stem.string() + ".bin");
    std::ofstream js(stem.string() + ".json");
    if (!js)
        throw data_error("cannot write checkpoint manifest: " + stem.string() + ".json");
    js << manifest.dump(2) << "\n";
}

/// Loads a checkpoint into an existing parameter list; names and shapes
/// must match exactly.
inline nlohmann::json load_checkpoint(const std::filesystem::path& stem, ParamList<float>& tensors) {
    std::ifstream js(stem.string() + ".json");
    if (!js)
        throw data_error("cannot open checkpoint manifest: " + stem.string() + ".json");
    nlohmann::json manifest = nlohmann::json::parse(js, nullptr, /*allow_exceptions=*/false);
    if (manifest.is_discarded() || manifest.value("format", "") != "nightcc-checkpoint-v1")
        throw data_error("unrecognized checkpoint manifest: " + stem.string() + ".json");

    std::ifstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin)
        throw data_error("cannot open checkpoint: " + stem.string() + ".bin");

    const auto& entries = manifest.at("tensors");
    if (entries.size() != tensors.size())
        throw data_error("checkpoint/config shape mismatch: tensor count differs");
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = entries[i];
        if (e.at("name").get<std::string>() != tensors[i].name ||
            e.at("shape").get<std::vector<int>>() != tensors[i].shape ||
            e.at("count").get<std::size_t>() != tensors[i].count)
            throw data_error("checkpoint/config shape mismatch at tensor " + tensors[i].name);
        bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        bin.read(reinterpret_cast<char*>(tensors[i].data),
                 static_cast<std::streamsize>(tensors[i].count * sizeof(float)));
        if (!bin)
            throw data_error("short read on checkpoint tensor " + tensors[i].name);
    }
    return manifest;
}

} // namespace nightcc::rl

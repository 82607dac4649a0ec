#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "swinhaze/network.hpp"

namespace swinhaze::network {

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
    NetworkConfig config;
    std::uint64_t seed = 0;
    ParameterStore params;
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json config_to_json(const NetworkConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
NetworkConfig config_from_json(const nlohmann::json& j);

// `path` may name the .json sidecar, the .bin blob, or their common stem.
// Writes <stem>.bin and <stem>.json; returns the sidecar path.
std::filesystem::path save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                                      const NetworkConfig& cfg, std::uint64_t seed,
                                      const nlohmann::json& meta = nlohmann::json::object());

// Validates every name and shape against the config before returning.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace swinhaze::network

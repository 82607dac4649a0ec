#include "swinhaze/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "swinhaze/error.hpp"

namespace swinhaze::network {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");

namespace {

constexpr char kMagic[8] = {'S', 'W', 'H', 'Z', 'C', 'K', 'P', 'T'};

std::filesystem::path stem_of(const std::filesystem::path& path) {
    const auto ext = path.extension();
    if (ext == ".json" || ext == ".bin") return std::filesystem::path(path).replace_extension();
    return path;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        fail(ErrorCode::ConfigError, "truncated checkpoint blob " + path.string());
    }
    return v;
}

}  // namespace

nlohmann::json config_to_json(const NetworkConfig& cfg) {
    return {
        {"base_channels", cfg.base_channels},
        {"levels", cfg.levels},
        {"rrdb_per_stage", cfg.rrdb_per_stage},
        {"swin_layers", cfg.swin_layers},
        {"window", cfg.window},
        {"heads", cfg.heads},
        {"alpha_block", cfg.alpha_block},
        {"alpha_bottleneck", cfg.alpha_bottleneck},
        {"mlp_ratio", cfg.mlp_ratio},
        {"input_size", cfg.input_size},
        {"bottleneck_blocks", cfg.bottleneck_blocks},
        {"use_swinrrdb", cfg.use_swinrrdb},
    };
}

NetworkConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorCode::ConfigError, "network config must be a JSON object");
    NetworkConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "base_channels") cfg.base_channels = value.get<int>();
            else if (key == "levels") cfg.levels = value.get<int>();
            else if (key == "rrdb_per_stage") cfg.rrdb_per_stage = value.get<int>();
            else if (key == "swin_layers") cfg.swin_layers = value.get<int>();
            else if (key == "window") cfg.window = value.get<int>();
            else if (key == "heads") cfg.heads = value.get<int>();
            else if (key == "alpha_block") cfg.alpha_block = value.get<real>();
            else if (key == "alpha_bottleneck") cfg.alpha_bottleneck = value.get<real>();
            else if (key == "mlp_ratio") cfg.mlp_ratio = value.get<int>();
            else if (key == "input_size") cfg.input_size = value.get<int>();
            else if (key == "bottleneck_blocks") cfg.bottleneck_blocks = value.get<int>();
            else if (key == "use_swinrrdb") cfg.use_swinrrdb = value.get<bool>();
            else fail(ErrorCode::ConfigError, "unknown network config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("bad network config: ") + e.what());
    }
    return cfg;
}

std::filesystem::path save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                                      const NetworkConfig& cfg, std::uint64_t seed,
                                      const nlohmann::json& meta) {
    const auto stem = stem_of(path);
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    const auto bin = with_suffix(stem, ".bin");
    const auto sidecar = with_suffix(stem, ".json");

    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + bin.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, static_cast<std::uint32_t>(kCheckpointFormat));
    write_pod(out, static_cast<std::uint64_t>(params.size()));
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& e : params.entries()) {
        write_pod(out, static_cast<std::uint64_t>(e.tensor.size()));
        out.write(reinterpret_cast<const char*>(e.tensor.values().data()),
                  static_cast<std::streamsize>(e.tensor.size() * sizeof(real)));
        manifest.push_back({{"name", e.name}, {"shape", e.tensor.shape()}});
    }
    if (!out) fail(ErrorCode::IoError, "failed writing " + bin.string());

    nlohmann::json j = {
        {"format_version", kCheckpointFormat},
        {"config", config_to_json(cfg)},
        {"seed", seed},
        {"weights", bin.filename().string()},
        {"parameters", manifest},
        {"meta", meta},
    };
    std::ofstream js(sidecar, std::ios::trunc);
    if (!js) fail(ErrorCode::IoError, "cannot write " + sidecar.string());
    js << j.dump(2) << '\n';
    return sidecar;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto stem = stem_of(path);
    const auto sidecar = with_suffix(stem, ".json");
    const auto bin = with_suffix(stem, ".bin");
    std::ifstream js(sidecar);
    if (!js) fail(ErrorCode::NotFound, "checkpoint sidecar not found: " + sidecar.string());
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, "unreadable checkpoint sidecar " + sidecar.string() + ": " + e.what());
    }
    if (j.value("format_version", -1) != kCheckpointFormat) {
        fail(ErrorCode::ConfigError, "unsupported checkpoint format in " + sidecar.string());
    }

    Checkpoint ck;
    ck.config = config_from_json(j.at("config"));
    ck.seed = j.value("seed", std::uint64_t{0});
    ck.meta = j.value("meta", nlohmann::json::object());
    // A fresh store supplies the expected names and shapes.
    ck.params = init_params(ck.config, ck.seed);

    const auto& manifest = j.at("parameters");
    if (!manifest.is_array() || manifest.size() != ck.params.size()) {
        fail(ErrorCode::ConfigError, "checkpoint manifest lists " + std::to_string(manifest.size()) +
                                         " tensors, config expects " + std::to_string(ck.params.size()));
    }
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& e = ck.params.entries()[i];
        const auto name = manifest[i].at("name").get<std::string>();
        const auto shape = manifest[i].at("shape").get<nn::Shape>();
        if (name != e.name || shape != e.tensor.shape()) {
            fail(ErrorCode::ConfigError, "checkpoint tensor " + name + " " + nn::to_string(shape) +
                                             " does not match expected " + e.name + " " +
                                             nn::to_string(e.tensor.shape()));
        }
    }

    std::ifstream in(bin, std::ios::binary);
    if (!in) fail(ErrorCode::NotFound, "checkpoint weights not found: " + bin.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        fail(ErrorCode::ConfigError, bin.string() + " is not a checkpoint blob");
    }
    if (read_pod<std::uint32_t>(in, bin) != static_cast<std::uint32_t>(kCheckpointFormat) ||
        read_pod<std::uint64_t>(in, bin) != ck.params.size()) {
        fail(ErrorCode::ConfigError, "checkpoint blob header does not match " + sidecar.string());
    }
    for (const auto& e : ck.params.entries()) {
        if (read_pod<std::uint64_t>(in, bin) != e.tensor.size()) {
            fail(ErrorCode::ConfigError, "checkpoint blob size mismatch at " + e.name);
        }
        auto dst = Tensor(e.tensor).mutable_values();
        if (!in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(real)))) {
            fail(ErrorCode::ConfigError, "truncated checkpoint blob " + bin.string());
        }
    }
    return ck;
}

}  // namespace swinhaze::network

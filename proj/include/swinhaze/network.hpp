#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "swinhaze/image.hpp"
#include "swinhaze/nn/tensor.hpp"

namespace swinhaze::network {

using nn::real;
using nn::Tensor;

struct NetworkConfig {
    int base_channels = 8;
    int levels = 4;
    int rrdb_per_stage = 1;
    int swin_layers = 3;
    int window = 4;
    int heads = 0;  // 0: channels / 8, at least 1
    real alpha_block = 0.2f;
    real alpha_bottleneck = 0.1f;
    int mlp_ratio = 4;
    int input_size = 256;
    int bottleneck_blocks = 2;
    bool use_swinrrdb = true;

    static NetworkConfig desk();
    static NetworkConfig paper_preset();

    // Channels after encoder stage l (0 is the stem).
    int stage_channels(int level) const { return base_channels << level; }
    int stage_size(int level) const { return input_size >> level; }
    int heads_for(int channels) const;

    // Throws ConfigError on any violated invariant.
    void validate() const;
    // Same checks against an arbitrary input size.
    void validate_input(int height, int width) const;

    bool operator==(const NetworkConfig&) const = default;
};

class ParameterStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(const std::string& name, Tensor tensor);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t parameter_count() const;

    // Deep copy with fresh leaf tensors.
    ParameterStore clone() const;
    void zero_grad() const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

ParameterStore init_params(const NetworkConfig& cfg, std::uint64_t seed);

// Dense (1x1 conv / linear) or spatial convolution weights.
struct Affine {
    Tensor w, b;
    static Affine from(const ParameterStore& s, const std::string& prefix);
};

struct LayerNormParams {
    Tensor gamma, beta;
    static LayerNormParams from(const ParameterStore& s, const std::string& prefix);
};

struct AttentionParams {
    Affine qkv;  // [C, 3C], output channels ordered q | k | v
    Affine proj;
    static AttentionParams from(const ParameterStore& s, const std::string& prefix);
};

struct ChannelAttentionParams {
    Affine fc1, fc2;
    static ChannelAttentionParams from(const ParameterStore& s, const std::string& prefix);
};

struct MlpParams {
    Affine fc1, fc2;
    static MlpParams from(const ParameterStore& s, const std::string& prefix);
};

struct SwinLayerParams {
    Affine reduce;  // 1x1 over the dense concatenation
    LayerNormParams ln1;
    AttentionParams attn;
    Affine dw;
    ChannelAttentionParams ca;
    LayerNormParams ln2;
    MlpParams mlp;
    static SwinLayerParams from(const ParameterStore& s, const std::string& prefix);
};

// Either three Swin layers (dense) or three plain 3x3 conv layers, then a 3x3
// projection.
struct RrdbParams {
    bool swin = true;
    std::vector<SwinLayerParams> layers;
    std::vector<Affine> plain;
    Affine conv;
    static RrdbParams from(const ParameterStore& s, const std::string& prefix, bool swin,
                           int depth = 3);
};

struct BottleneckParams {
    Affine dw;
    MlpParams mlp;
    static BottleneckParams from(const ParameterStore& s, const std::string& prefix);
};

struct FusionParams {
    Affine fc1, fc2;
    static FusionParams from(const ParameterStore& s, const std::string& prefix);
};

Tensor window_attention(const Tensor& x, const AttentionParams& p, int window, int shift, int heads);
Tensor channel_attention(const Tensor& x, const ChannelAttentionParams& p);
Tensor mlp_block(const Tensor& x, const MlpParams& p);
Tensor swin_layer(const Tensor& x, const SwinLayerParams& p, int window, int shift, int heads);
Tensor swin_rrdb(const Tensor& x, const RrdbParams& p, int window, int heads, real alpha);
Tensor bottleneck_block(const Tensor& x, const BottleneckParams& p, real alpha);
Tensor channel_fusion(const Tensor& d, const Tensor& e, const FusionParams& p);

// Signed-range [N,H,W,3] in, [N,H,W,3] out in [-1, 1].
Tensor forward(const Tensor& x, const ParameterStore& params, const NetworkConfig& cfg);
// Single image; unit-range input is mapped to signed range first. Returns a
// signed-range image.
ImageBuffer forward(const ImageBuffer& img, const ParameterStore& params, const NetworkConfig& cfg);

// Images (any range tag) -> signed [N,H,W,C] tensor, and back.
Tensor to_tensor(const std::vector<ImageBuffer>& images);
std::vector<ImageBuffer> to_images(const Tensor& t);

}  // namespace swinhaze::network

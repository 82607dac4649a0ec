#include "swinhaze/network.hpp"

#include <cmath>
#include <random>

#include "swinhaze/error.hpp"
#include "swinhaze/nn/ops.hpp"

namespace swinhaze::network {

NetworkConfig NetworkConfig::desk() {
    NetworkConfig cfg;
    cfg.input_size = 64;
    return cfg;
}

NetworkConfig NetworkConfig::paper_preset() {
    NetworkConfig cfg;
    cfg.base_channels = 64;
    cfg.window = 8;
    cfg.input_size = 256;
    cfg.rrdb_per_stage = 3;
    return cfg;
}

int NetworkConfig::heads_for(int channels) const {
    if (heads > 0) return heads;
    return std::max(1, channels / 8);
}

void NetworkConfig::validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorCode::ConfigError, msg); };
    if (base_channels < 1) bad("base_channels must be positive");
    if (levels != 4) bad("levels is fixed at 4");
    if (swin_layers != 3) bad("swin_layers is fixed at 3");
    if (rrdb_per_stage < 1) bad("rrdb_per_stage must be at least 1");
    if (bottleneck_blocks < 0) bad("bottleneck_blocks must be non-negative");
    if (mlp_ratio < 1) bad("mlp_ratio must be at least 1");
    if (window < 1) bad("window must be positive");
    if (heads < 0) bad("heads must be non-negative");
    for (int l = 0; l <= levels; ++l) {
        const int c = stage_channels(l);
        if (c % heads_for(c) != 0) {
            bad(std::to_string(heads_for(c)) + " heads do not divide " + std::to_string(c) + " channels");
        }
    }
    validate_input(input_size, input_size);
}

void NetworkConfig::validate_input(int height, int width) const {
    const int step = 1 << levels;
    if (height < step || width < step || height % step != 0 || width % step != 0) {
        fail(ErrorCode::ConfigError, "input " + std::to_string(height) + "x" + std::to_string(width) +
                                         " is not divisible by " + std::to_string(step));
    }
    for (int l = 1; l <= levels; ++l) {
        if ((height >> l) % window != 0 || (width >> l) % window != 0) {
            fail(ErrorCode::ConfigError, "window " + std::to_string(window) + " does not divide the " +
                                             std::to_string(height >> l) + "x" +
                                             std::to_string(width >> l) + " map of level " +
                                             std::to_string(l));
        }
    }
}

void ParameterStore::add(const std::string& name, Tensor tensor) {
    if (contains(name)) fail(ErrorCode::InvalidParameter, "duplicate parameter " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, std::move(tensor)});
}

const Tensor& ParameterStore::get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::NotFound, "no parameter named " + name);
    return entries_[it->second].tensor;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.tensor.size();
    return n;
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const Entry& e : entries_) out.add(e.name, e.tensor.clone());
    return out;
}

void ParameterStore::zero_grad() const {
    for (const Entry& e : entries_) e.tensor.zero_grad();
}

namespace {

class Initializer {
public:
    Initializer(ParameterStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

    void uniform(const std::string& name, nn::Shape shape, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<real> v(nn::element_count(shape));
        for (real& x : v) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            x = static_cast<real>(bound * (2.0 * u - 1.0));
        }
        store_.add(name, Tensor(std::move(shape), std::move(v), true));
    }
    void constant(const std::string& name, nn::Shape shape, real value) {
        store_.add(name, Tensor::full(std::move(shape), value, true));
    }

    void dense(const std::string& p, int cin, int cout, bool zero = false) {
        if (zero) {
            constant(p + ".w", {cin, cout}, 0);
            constant(p + ".b", {cout}, 0);
            return;
        }
        uniform(p + ".w", {cin, cout}, cin);
        uniform(p + ".b", {cout}, cin);
    }
    void conv(const std::string& p, int k, int cin, int cout, bool zero = false) {
        dense(p, k * k * cin, cout, zero);
    }
    void depthwise(const std::string& p, int c) {
        uniform(p + ".w", {9, c}, 9);
        uniform(p + ".b", {c}, 9);
    }
    void transpose(const std::string& p, int cin, int cout) {
        const int fan_in = std::max(1, cin * 9 / 4);
        uniform(p + ".w", {cin, 9 * cout}, fan_in);
        uniform(p + ".b", {cout}, fan_in);
    }
    void layer_norm(const std::string& p, int c) {
        constant(p + ".gamma", {c}, 1);
        constant(p + ".beta", {c}, 0);
    }
    void mlp(const std::string& p, int c, int ratio, bool zero_out) {
        dense(p + ".fc1", c, ratio * c);
        dense(p + ".fc2", ratio * c, c, zero_out);
    }

    void rrdb(const std::string& p, int c, const NetworkConfig& cfg) {
        const int depth = cfg.swin_layers;
        if (!cfg.use_swinrrdb) {
            for (int j = 0; j < depth; ++j) conv(p + ".plain" + std::to_string(j), 3, c, c);
            conv(p + ".conv", 3, c, c, true);
            return;
        }
        for (int j = 0; j < depth; ++j) {
            const std::string q = p + ".layer" + std::to_string(j);
            dense(q + ".reduce", (j + 1) * c, c);
            layer_norm(q + ".ln1", c);
            dense(q + ".attn.qkv", c, 3 * c);
            dense(q + ".attn.proj", c, c);
            depthwise(q + ".dw", c);
            const int r = std::max(1, c / 4);
            dense(q + ".ca.fc1", c, r);
            dense(q + ".ca.fc2", r, c);
            layer_norm(q + ".ln2", c);
            mlp(q + ".mlp", c, cfg.mlp_ratio, false);
        }
        conv(p + ".conv", 3, (depth + 1) * c, c, true);
    }

private:
    ParameterStore& store_;
    std::mt19937_64 rng_;
};

std::string level_name(const char* stem, int l) { return stem + std::to_string(l); }

}  // namespace

ParameterStore init_params(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParameterStore store;
    Initializer init(store, seed);
    const int b = cfg.base_channels;
    init.conv("stem.conv", 3, 3, b);
    for (int l = 1; l <= cfg.levels; ++l) {
        const std::string p = level_name("enc", l);
        init.conv(p + ".down", 3, cfg.stage_channels(l - 1), cfg.stage_channels(l));
        for (int i = 0; i < cfg.rrdb_per_stage; ++i) {
            init.rrdb(p + ".rrdb" + std::to_string(i), cfg.stage_channels(l), cfg);
        }
    }
    const int cb = cfg.stage_channels(cfg.levels);
    for (int i = 0; i < cfg.bottleneck_blocks; ++i) {
        const std::string p = level_name("bott", i);
        init.depthwise(p + ".dw", cb);
        init.mlp(p + ".mlp", cb, cfg.mlp_ratio, true);
    }
    for (int l = cfg.levels; l >= 2; --l) {
        const std::string p = level_name("dec", l);
        const int c = cfg.stage_channels(l - 1);
        init.transpose(p + ".up", cfg.stage_channels(l), c);
        init.dense(p + ".skip", c, c);
        init.conv(p + ".merge", 3, 2 * c, c);
        init.rrdb(p + ".rrdb", c, cfg);
        init.dense(p + ".fuse.fc1", 2 * c, c);
        init.dense(p + ".fuse.fc2", c, c);
    }
    init.conv("head.conv1", 3, cfg.stage_channels(1), b);
    init.rrdb("head.rrdb", b, cfg);
    init.conv("head.conv2", 3, b, b);
    init.transpose("head.up", b, 3);
    return store;
}

Affine Affine::from(const ParameterStore& s, const std::string& prefix) {
    return {s.get(prefix + ".w"), s.get(prefix + ".b")};
}

LayerNormParams LayerNormParams::from(const ParameterStore& s, const std::string& prefix) {
    return {s.get(prefix + ".gamma"), s.get(prefix + ".beta")};
}

AttentionParams AttentionParams::from(const ParameterStore& s, const std::string& prefix) {
    return {Affine::from(s, prefix + ".qkv"), Affine::from(s, prefix + ".proj")};
}

ChannelAttentionParams ChannelAttentionParams::from(const ParameterStore& s, const std::string& prefix) {
    return {Affine::from(s, prefix + ".fc1"), Affine::from(s, prefix + ".fc2")};
}

MlpParams MlpParams::from(const ParameterStore& s, const std::string& prefix) {
    return {Affine::from(s, prefix + ".fc1"), Affine::from(s, prefix + ".fc2")};
}

SwinLayerParams SwinLayerParams::from(const ParameterStore& s, const std::string& prefix) {
    SwinLayerParams p;
    p.reduce = Affine::from(s, prefix + ".reduce");
    p.ln1 = LayerNormParams::from(s, prefix + ".ln1");
    p.attn = AttentionParams::from(s, prefix + ".attn");
    p.dw = Affine::from(s, prefix + ".dw");
    p.ca = ChannelAttentionParams::from(s, prefix + ".ca");
    p.ln2 = LayerNormParams::from(s, prefix + ".ln2");
    p.mlp = MlpParams::from(s, prefix + ".mlp");
    return p;
}

RrdbParams RrdbParams::from(const ParameterStore& s, const std::string& prefix, bool swin, int depth) {
    RrdbParams p;
    p.swin = swin;
    for (int j = 0; j < depth; ++j) {
        if (swin) {
            p.layers.push_back(SwinLayerParams::from(s, prefix + ".layer" + std::to_string(j)));
        } else {
            p.plain.push_back(Affine::from(s, prefix + ".plain" + std::to_string(j)));
        }
    }
    p.conv = Affine::from(s, prefix + ".conv");
    return p;
}

BottleneckParams BottleneckParams::from(const ParameterStore& s, const std::string& prefix) {
    return {Affine::from(s, prefix + ".dw"), MlpParams::from(s, prefix + ".mlp")};
}

FusionParams FusionParams::from(const ParameterStore& s, const std::string& prefix) {
    return {Affine::from(s, prefix + ".fc1"), Affine::from(s, prefix + ".fc2")};
}

Tensor window_attention(const Tensor& x, const AttentionParams& p, int window, int shift, int heads) {
    const Tensor qkv = nn::linear(x, p.qkv.w, p.qkv.b);
    const Tensor mixed = nn::window_attention_core(qkv, heads, window, shift);
    return nn::linear(mixed, p.proj.w, p.proj.b);
}

Tensor channel_attention(const Tensor& x, const ChannelAttentionParams& p) {
    const Tensor pooled = nn::global_avg_pool(x);
    const Tensor s = nn::sigmoid(nn::linear(nn::relu(nn::linear(pooled, p.fc1.w, p.fc1.b)), p.fc2.w, p.fc2.b));
    return nn::mul_channels(x, s);
}

Tensor mlp_block(const Tensor& x, const MlpParams& p) {
    return nn::linear(nn::gelu(nn::linear(x, p.fc1.w, p.fc1.b)), p.fc2.w, p.fc2.b);
}

Tensor swin_layer(const Tensor& x, const SwinLayerParams& p, int window, int shift, int heads) {
    const Tensor y1 = nn::add(x, window_attention(nn::layer_norm(x, p.ln1.gamma, p.ln1.beta), p.attn,
                                                  window, shift, heads));
    const Tensor y2 = nn::add(y1, nn::depthwise_conv3x3(y1, p.dw.w, p.dw.b, nn::Pad::Reflect));
    const Tensor y3 = channel_attention(y2, p.ca);
    return nn::add(y3, mlp_block(nn::layer_norm(y3, p.ln2.gamma, p.ln2.beta), p.mlp));
}

Tensor swin_rrdb(const Tensor& x, const RrdbParams& p, int window, int heads, real alpha) {
    Tensor branch;
    if (p.swin) {
        std::vector<Tensor> dense{x};
        for (std::size_t j = 0; j < p.layers.size(); ++j) {
            const int shift = (j % 2 == 1) ? window / 2 : 0;
            const SwinLayerParams& lp = p.layers[j];
            const Tensor in = nn::linear(nn::concat_channels(dense), lp.reduce.w, lp.reduce.b);
            dense.push_back(swin_layer(in, lp, window, shift, heads));
        }
        branch = nn::conv2d(nn::concat_channels(dense), p.conv.w, p.conv.b, 3, 1, 1, nn::Pad::Reflect);
    } else {
        Tensor h = x;
        for (const Affine& a : p.plain) h = nn::gelu(nn::conv2d(h, a.w, a.b, 3, 1, 1, nn::Pad::Reflect));
        branch = nn::conv2d(h, p.conv.w, p.conv.b, 3, 1, 1, nn::Pad::Reflect);
    }
    return nn::scaled_residual(x, branch, alpha);
}

Tensor bottleneck_block(const Tensor& x, const BottleneckParams& p, real alpha) {
    const Tensor branch = mlp_block(nn::depthwise_conv3x3(x, p.dw.w, p.dw.b, nn::Pad::Reflect), p.mlp);
    return nn::scaled_residual(x, branch, alpha);
}

Tensor channel_fusion(const Tensor& d, const Tensor& e, const FusionParams& p) {
    if (!d.defined() || !e.defined() || d.shape() != e.shape()) {
        fail(ErrorCode::ShapeMismatch, "channel_fusion operands differ in shape");
    }
    const Tensor z = nn::linear(nn::concat_channels({d, e}), p.fc1.w, p.fc1.b);
    const Tensor a = nn::sigmoid(nn::linear(z, p.fc2.w, p.fc2.b));
    return nn::blend(d, e, a);
}

Tensor forward(const Tensor& x, const ParameterStore& params, const NetworkConfig& cfg) {
    if (!x.defined() || x.rank() != 4 || x.dim(3) != 3) {
        fail(ErrorCode::ShapeMismatch, "forward expects an [N,H,W,3] batch");
    }
    cfg.validate_input(x.dim(1), x.dim(2));
    const bool swin = cfg.use_swinrrdb;
    const int depth = cfg.swin_layers;
    auto conv = [&](const Tensor& in, const std::string& name, int k, int stride) {
        const Affine a = Affine::from(params, name);
        return nn::conv2d(in, a.w, a.b, k, stride, k / 2, nn::Pad::Reflect);
    };
    auto rrdb = [&](const Tensor& in, const std::string& name) {
        return swin_rrdb(in, RrdbParams::from(params, name, swin, depth), cfg.window,
                         cfg.heads_for(in.dim(3)), cfg.alpha_block);
    };

    std::vector<Tensor> features;
    Tensor h = conv(x, "stem.conv", 3, 1);
    features.push_back(h);
    for (int l = 1; l <= cfg.levels; ++l) {
        const std::string p = level_name("enc", l);
        h = conv(h, p + ".down", 3, 2);
        for (int i = 0; i < cfg.rrdb_per_stage; ++i) h = rrdb(h, p + ".rrdb" + std::to_string(i));
        features.push_back(h);
    }
    for (int i = 0; i < cfg.bottleneck_blocks; ++i) {
        h = bottleneck_block(h, BottleneckParams::from(params, level_name("bott", i)), cfg.alpha_bottleneck);
    }
    for (int l = cfg.levels; l >= 2; --l) {
        const std::string p = level_name("dec", l);
        const Affine up = Affine::from(params, p + ".up");
        const Tensor u = nn::conv_transpose3x3_s2(h, up.w, up.b, nn::Pad::Reflect);
        const Tensor& e = features[l - 1];
        const Affine skip = Affine::from(params, p + ".skip");
        const Tensor s = nn::resize_bilinear(nn::linear(e, skip.w, skip.b), u.dim(1), u.dim(2));
        const Tensor d = rrdb(conv(nn::concat_channels({u, s}), p + ".merge", 3, 1), p + ".rrdb");
        h = channel_fusion(d, nn::resize_bilinear(e, d.dim(1), d.dim(2)), FusionParams::from(params, p + ".fuse"));
    }
    h = conv(h, "head.conv1", 3, 1);
    h = rrdb(h, "head.rrdb");
    h = conv(h, "head.conv2", 3, 1);
    const Affine up = Affine::from(params, "head.up");
    const Tensor out = nn::tanh(nn::conv_transpose3x3_s2(h, up.w, up.b, nn::Pad::Reflect));
    for (real v : out.values()) {
        if (!std::isfinite(v)) fail(ErrorCode::NumericalError, "non-finite activation in network output");
    }
    return out;
}

Tensor to_tensor(const std::vector<ImageBuffer>& images) {
    if (images.empty()) fail(ErrorCode::InvalidParameter, "no images to batch");
    const ImageBuffer& first = images.front();
    std::vector<real> values;
    values.reserve(images.size() * first.size());
    for (const ImageBuffer& img : images) {
        if (!img.same_shape(first)) fail(ErrorCode::ShapeMismatch, "batched images differ in shape");
        const bool unit = img.range() == RangeTag::Unit;
        for (double v : img.data()) values.push_back(static_cast<real>(unit ? 2.0 * v - 1.0 : v));
    }
    return Tensor({static_cast<int>(images.size()), first.height(), first.width(), first.channels()},
                  std::move(values));
}

std::vector<ImageBuffer> to_images(const Tensor& t) {
    if (!t.defined() || t.rank() != 4) fail(ErrorCode::ShapeMismatch, "expected an NHWC tensor");
    const std::size_t per = t.size() / t.dim(0);
    std::vector<ImageBuffer> out;
    for (int b = 0; b < t.dim(0); ++b) {
        std::vector<double> data(t.values().begin() + b * per, t.values().begin() + (b + 1) * per);
        out.emplace_back(t.dim(1), t.dim(2), t.dim(3), std::move(data), RangeTag::Signed);
    }
    return out;
}

ImageBuffer forward(const ImageBuffer& img, const ParameterStore& params, const NetworkConfig& cfg) {
    if (img.channels() != 3) fail(ErrorCode::InvalidChannels, "the network takes 3-channel images");
    nn::NoGradGuard guard;
    return to_images(forward(to_tensor({img}), params, cfg)).front();
}

}  // namespace swinhaze::network

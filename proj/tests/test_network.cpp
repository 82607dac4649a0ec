#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "oracles.hpp"
#include "swinhaze/checkpoint.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/network.hpp"
#include "swinhaze/nn/ops.hpp"
#include "swinhaze/optim.hpp"

using namespace swinhaze;
using namespace swinhaze::network;

namespace {

NetworkConfig tiny() {
    NetworkConfig c = NetworkConfig::desk();
    c.input_size = 32;
    c.window = 2;  // the deepest map is 2x2
    return c;
}

Tensor random_input(std::uint64_t seed, int n, int size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<real> v(static_cast<std::size_t>(n) * size * size * 3);
    for (real& x : v) x = static_cast<real>(d(rng));
    return Tensor({n, size, size, 3}, std::move(v));
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::NotFound;
}

}  // namespace

TEST(Config, PresetsAndValidation) {
    const auto desk = NetworkConfig::desk();
    EXPECT_EQ(desk.input_size, 64);
    EXPECT_EQ(desk.base_channels, 8);
    EXPECT_EQ(desk.window, 4);
    const auto full = NetworkConfig::paper_preset();
    EXPECT_EQ(full.base_channels, 64);
    EXPECT_EQ(full.window, 8);
    EXPECT_EQ(full.input_size, 256);
    EXPECT_NO_THROW(full.validate());
    EXPECT_EQ(desk.heads_for(8), 1);
    EXPECT_EQ(desk.heads_for(64), 8);

    auto bad = desk;
    bad.window = 3;  // 64 / 16 = 4 at the deepest level is not a multiple of 3
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::ConfigError);
    bad = desk;
    bad.input_size = 48;
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::ConfigError);
    bad = desk;
    bad.base_channels = 0;
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { desk.validate_input(64, 60); }), ErrorCode::ConfigError);
}

TEST(Params, InitIsSeededAndNamed) {
    const auto cfg = tiny();
    const auto a = init_params(cfg, 5);
    const auto b = init_params(cfg, 5);
    const auto c = init_params(cfg, 6);
    ASSERT_EQ(a.size(), b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.entries()[i].name, b.entries()[i].name);
        const auto va = a.entries()[i].tensor.values(), vb = b.entries()[i].tensor.values();
        EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
        const auto vc = c.entries()[i].tensor.values();
        differs |= !std::equal(va.begin(), va.end(), vc.begin());
    }
    EXPECT_TRUE(differs);
    for (const char* n : {"stem.conv.w", "enc1.down.w", "enc4.rrdb0.layer0.attn.qkv.w", "bott0.mlp.fc2.w",
                          "dec2.fuse.fc1.w", "head.conv2.b", "enc2.rrdb0.conv.w"})
        EXPECT_TRUE(a.contains(n)) << n;
    EXPECT_EQ(code_of([&] { a.get("nope"); }), ErrorCode::NotFound);
    for (real v : a.get("enc1.rrdb0.conv.w").values()) EXPECT_EQ(v, 0.0f);
    for (real v : a.get("bott0.mlp.fc2.w").values()) EXPECT_EQ(v, 0.0f);
}

TEST(Params, PlainVariantHasNoAttention) {
    auto cfg = tiny();
    cfg.use_swinrrdb = false;
    const auto p = init_params(cfg, 1);
    for (const auto& e : p.entries()) EXPECT_EQ(e.name.find("attn"), std::string::npos) << e.name;
    EXPECT_TRUE(p.contains("enc1.rrdb0.plain0.w"));
}

TEST(Forward, ShapeRangeAndDeterminism) {
    const auto cfg = tiny();
    const auto params = init_params(cfg, 3);
    const auto x = random_input(1, 1, 32);
    const auto y1 = forward(x, params, cfg);
    const auto y2 = forward(x, params, cfg);
    EXPECT_EQ(y1.shape(), x.shape());
    for (std::size_t i = 0; i < y1.size(); ++i) {
        EXPECT_GE(y1.values()[i], -1.0f);
        EXPECT_LE(y1.values()[i], 1.0f);
        EXPECT_EQ(y1.values()[i], y2.values()[i]);
    }
    EXPECT_EQ(code_of([&] { forward(random_input(1, 1, 24), params, cfg); }), ErrorCode::ConfigError);
}

TEST(Forward, ZeroInitializedBlocksAreIdentity) {
    const auto cfg = tiny();
    const auto params = init_params(cfg, 4);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<real> v(16 * 16 * 16);
    for (real& t : v) t = static_cast<real>(d(rng));
    const Tensor x({1, 16, 16, 16}, v);  // enc1 works at 2 * base channels
    const auto r = swin_rrdb(x, RrdbParams::from(params, "enc1.rrdb0", true), 2, cfg.heads_for(16), 0.2f);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(r.values()[i], x.values()[i]);

    const int cb = cfg.stage_channels(cfg.levels);
    const int sb = cfg.stage_size(cfg.levels);
    std::vector<real> vb(static_cast<std::size_t>(sb) * sb * cb);
    for (real& t : vb) t = static_cast<real>(d(rng));
    const Tensor xb({1, sb, sb, cb}, vb);
    const auto yb = bottleneck_block(xb, BottleneckParams::from(params, "bott0"), 0.1f);
    for (std::size_t i = 0; i < xb.size(); ++i) EXPECT_EQ(yb.values()[i], xb.values()[i]);
}

TEST(Forward, BatchEqualsSingles) {
    const auto cfg = tiny();
    const auto params = init_params(cfg, 8);
    const auto x = random_input(3, 2, 32);
    const auto both = forward(x, params, cfg);
    const std::size_t half = x.size() / 2;
    for (int k = 0; k < 2; ++k) {
        std::vector<real> part(x.values().begin() + k * half, x.values().begin() + (k + 1) * half);
        const auto one = forward(Tensor({1, 32, 32, 3}, part), params, cfg);
        for (std::size_t i = 0; i < half; ++i) EXPECT_NEAR(one.values()[i], both.values()[k * half + i], 1e-6);
    }
}

TEST(Forward, GradientsReachEveryParameter) {
    const auto cfg = tiny();
    auto params = init_params(cfg, 9);
    const auto y = forward(random_input(4, 1, 32), params, cfg);
    y.backward(std::vector<real>(y.size(), 1.0f));
    for (const auto& e : params.entries()) EXPECT_EQ(e.tensor.grad().size(), e.tensor.size()) << e.name;
}

TEST(Forward, ImageOverloadMapsRanges) {
    const auto cfg = tiny();
    const auto params = init_params(cfg, 10);
    const auto img = ImageBuffer::filled(32, 32, 3, 0.75);
    const auto out = forward(img, params, cfg);
    EXPECT_EQ(out.range(), RangeTag::Signed);
    const auto t = forward(to_tensor({img}), params, cfg);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_FLOAT_EQ(static_cast<real>(out.data()[i]), t.values()[i]);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    const auto dir = oracle::temp_dir("ckpt");
    auto cfg = tiny();
    cfg.rrdb_per_stage = 2;
    const auto params = init_params(cfg, 77);
    const auto sidecar = save_checkpoint(dir / "run" / "final", params, cfg, 77, {{"epoch", 3}});
    EXPECT_EQ(sidecar.extension(), ".json");
    for (const auto& p : {dir / "run" / "final", dir / "run" / "final.bin", sidecar}) {
        const auto ck = load_checkpoint(p);
        EXPECT_EQ(ck.config, cfg);
        EXPECT_EQ(ck.seed, 77u);
        EXPECT_EQ(ck.meta["epoch"], 3);
        ASSERT_EQ(ck.params.size(), params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto a = params.entries()[i].tensor.values(), b = ck.params.entries()[i].tensor.values();
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << params.entries()[i].name;
        }
    }
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MismatchesAreConfigErrors) {
    const auto dir = oracle::temp_dir("ckpt_bad");
    const auto cfg = tiny();
    const auto sidecar = save_checkpoint(dir / "c", init_params(cfg, 1), cfg, 1);
    auto j = nlohmann::json::parse(std::ifstream(sidecar));
    j["config"]["base_channels"] = 16;
    std::ofstream(sidecar) << j.dump();
    EXPECT_EQ(code_of([&] { load_checkpoint(sidecar); }), ErrorCode::ConfigError);

    j["config"]["base_channels"] = 8;
    j["config"]["mystery"] = 1;
    std::ofstream(sidecar) << j.dump();
    EXPECT_EQ(code_of([&] { load_checkpoint(sidecar); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { load_checkpoint(dir / "absent"); }), ErrorCode::NotFound);
    std::filesystem::remove_all(dir);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.5, -3.0, 1e-3};
    optim::AdamState<double> st;
    optim::AdamConfig cfg;
    cfg.lr = 1e-3;
    optim::adam_update<double>(p, g, st, 1, cfg);
    EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-10);
    EXPECT_NEAR(p[1], -2.0 + 1e-3, 1e-10);
    EXPECT_NEAR(p[2], 0.5 - 1e-3, 1e-8);
}

TEST(Adam, MatchesHandRolledRecurrence) {
    std::vector<double> p{0.3};
    optim::AdamState<double> st;
    const optim::AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    double m = 0, v = 0, x = 0.3;
    for (int t = 1; t <= 5; ++t) {
        const double g = 2 * x - 1;
        const std::vector<double> gv{2 * p[0] - 1};
        optim::adam_update<double>(p, gv, st, t, cfg);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        EXPECT_NEAR(p[0], x, 1e-14);
    }
}

TEST(Adam, StoreStepSkipsTensorsWithoutGradient) {
    ParameterStore store;
    store.add("a", Tensor({2}, {1.0f, 1.0f}, true));
    store.add("b", Tensor({1}, {5.0f}, true));
    optim::Adam opt(store, {0.1, 0.9, 0.999, 1e-8});
    const auto y = nn::mul(store.get("a"), store.get("a"));
    y.backward(std::vector<real>{1.0f, 1.0f});
    opt.step();
    EXPECT_NEAR(store.get("a").values()[0], 0.9f, 1e-6);
    EXPECT_EQ(store.get("b").values()[0], 5.0f);
}

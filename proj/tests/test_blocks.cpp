#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "swinhaze/error.hpp"
#include "swinhaze/network.hpp"
#include "swinhaze/nn/ops.hpp"

using namespace swinhaze;
using namespace swinhaze::network;

namespace {

// Straight-line double evaluation of one 1xHxWxC feature map.
struct Map {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;
    double& at(int y, int x, int k) { return v[(static_cast<std::size_t>(y) * w + x) * c + k]; }
    double at(int y, int x, int k) const { return v[(static_cast<std::size_t>(y) * w + x) * c + k]; }
};

Map of(const Tensor& t) { return {t.dim(1), t.dim(2), t.dim(3), {t.values().begin(), t.values().end()}}; }
std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }
std::vector<real> copy(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Map linear(const Map& x, const Tensor& wt, const Tensor& bt) {
    const auto W = vals(wt), b = vals(bt);
    const int co = static_cast<int>(b.size());
    Map out{x.h, x.w, co, std::vector<double>(static_cast<std::size_t>(x.h) * x.w * co)};
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int o = 0; o < co; ++o) {
                double s = b[o];
                for (int i = 0; i < x.c; ++i) s += x.at(y, xx, i) * W[static_cast<std::size_t>(i) * co + o];
                out.at(y, xx, o) = s;
            }
    return out;
}

Map layer_norm(const Map& x, const Tensor& gamma, const Tensor& beta) {
    const auto g = vals(gamma), b = vals(beta);
    Map out = x;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            double m = 0, var = 0;
            for (int k = 0; k < x.c; ++k) m += x.at(y, xx, k);
            m /= x.c;
            for (int k = 0; k < x.c; ++k) var += (x.at(y, xx, k) - m) * (x.at(y, xx, k) - m);
            var /= x.c;
            for (int k = 0; k < x.c; ++k) out.at(y, xx, k) = (x.at(y, xx, k) - m) / std::sqrt(var + 1e-5) * g[k] + b[k];
        }
    return out;
}

Map add(Map a, const Map& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    return a;
}

int region(int r, int n, int ws, int shift) { return shift == 0 ? 0 : (r < n - ws ? 0 : (r < n - shift ? 1 : 2)); }

Map attention_core(const Map& qkv, int heads, int ws, int shift) {
    const int c = qkv.c / 3, dk = c / heads;
    Map out{qkv.h, qkv.w, c, std::vector<double>(static_cast<std::size_t>(qkv.h) * qkv.w * c)};
    auto roll = [](int i, int s, int n) { return ((i - s) % n + n) % n; };
    for (int y = 0; y < qkv.h; ++y)
        for (int x = 0; x < qkv.w; ++x) {
            const int ry = roll(y, shift, qkv.h), rx = roll(x, shift, qkv.w);
            std::vector<std::pair<int, int>> keys;
            for (int y2 = 0; y2 < qkv.h; ++y2)
                for (int x2 = 0; x2 < qkv.w; ++x2) {
                    const int ry2 = roll(y2, shift, qkv.h), rx2 = roll(x2, shift, qkv.w);
                    if (ry2 / ws == ry / ws && rx2 / ws == rx / ws &&
                        region(ry2, qkv.h, ws, shift) == region(ry, qkv.h, ws, shift) &&
                        region(rx2, qkv.w, ws, shift) == region(rx, qkv.w, ws, shift))
                        keys.emplace_back(y2, x2);
                }
            for (int hd = 0; hd < heads; ++hd) {
                std::vector<double> s;
                for (auto [y2, x2] : keys) {
                    double d = 0;
                    for (int k = 0; k < dk; ++k) d += qkv.at(y, x, hd * dk + k) * qkv.at(y2, x2, c + hd * dk + k);
                    s.push_back(d / std::sqrt(double(dk)));
                }
                const double mx = *std::max_element(s.begin(), s.end());
                double z = 0;
                for (double& e : s) z += e = std::exp(e - mx);
                for (int k = 0; k < dk; ++k) {
                    double acc = 0;
                    for (std::size_t j = 0; j < keys.size(); ++j)
                        acc += s[j] / z * qkv.at(keys[j].first, keys[j].second, 2 * c + hd * dk + k);
                    out.at(y, x, hd * dk + k) = acc;
                }
            }
        }
    return out;
}

Map attention(const Map& x, const AttentionParams& p, int ws, int shift, int heads) {
    return linear(attention_core(linear(x, p.qkv.w, p.qkv.b), heads, ws, shift), p.proj.w, p.proj.b);
}

Map depthwise_reflect(const Map& x, const Tensor& wt, const Tensor& bt) {
    const auto W = vals(wt), b = vals(bt);
    auto refl = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
    Map out = x;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int k = 0; k < x.c; ++k) {
                double s = b[k];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        s += W[(ky * 3 + kx) * x.c + k] * x.at(refl(y + ky - 1, x.h), refl(xx + kx - 1, x.w), k);
                out.at(y, xx, k) = s;
            }
    return out;
}

Map channel_attention(const Map& x, const ChannelAttentionParams& p) {
    Map pooled{1, 1, x.c, std::vector<double>(x.c, 0.0)};
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int k = 0; k < x.c; ++k) pooled.v[k] += x.at(y, xx, k) / (x.h * x.w);
    Map hidden = linear(pooled, p.fc1.w, p.fc1.b);
    for (double& v : hidden.v) v = std::max(v, 0.0);
    Map s = linear(hidden, p.fc2.w, p.fc2.b);
    Map out = x;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int k = 0; k < x.c; ++k) out.at(y, xx, k) *= 1.0 / (1.0 + std::exp(-s.v[k]));
    return out;
}

Map mlp(const Map& x, const MlpParams& p) {
    Map h = linear(x, p.fc1.w, p.fc1.b);
    for (double& v : h.v) v = v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    return linear(h, p.fc2.w, p.fc2.b);
}

Tensor make(nn::Shape shape, std::vector<real> v) { return Tensor(std::move(shape), std::move(v)); }

Tensor random_map(std::mt19937_64& rng, int h, int w, int c, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    std::vector<real> v(static_cast<std::size_t>(h) * w * c);
    for (real& x : v) x = static_cast<real>(d(rng));
    return Tensor({1, h, w, c}, std::move(v));
}

void expect_close(const Tensor& got, const Map& want, double tol) {
    ASSERT_EQ(got.size(), want.v.size());
    double worst = 0;
    for (std::size_t i = 0; i < want.v.size(); ++i) worst = std::max(worst, std::abs(got.values()[i] - want.v[i]));
    EXPECT_LE(worst, tol);
}

Affine affine(std::vector<real> w, nn::Shape ws, std::vector<real> b) {
    const int n = static_cast<int>(b.size());
    return {Tensor(std::move(ws), std::move(w)), make({n}, std::move(b))};
}

}  // namespace

TEST(Blocks, AttentionWithIntegerWeightsMatchesDenseSoftmax) {
    // 2x2 input, C = 2, one head, one window: a single 4x4 attention matrix.
    const Tensor x({1, 2, 2, 2}, {1, 0, 0, 1, 1, 1, -1, 2});
    AttentionParams p;
    p.qkv = affine({1, 0, 0, 1, 1, 1, 0, 1, 1, 0, 2, -1}, {2, 6}, {0, 0, 0, 0, 0, 0});
    p.proj = affine({1, 0, 0, 1}, {2, 2}, {0, 0});
    const auto got = window_attention(x, p, 2, 0, 1);

    // Rows of X are tokens; Q = X Wq, K = X Wk, V = X Wv.
    const double X[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 2}};
    const double Wq[2][2] = {{1, 0}, {0, 1}}, Wk[2][2] = {{0, 1}, {1, 0}}, Wv[2][2] = {{1, 1}, {2, -1}};
    double Q[4][2], K[4][2], V[4][2];
    for (int t = 0; t < 4; ++t)
        for (int j = 0; j < 2; ++j) {
            Q[t][j] = X[t][0] * Wq[0][j] + X[t][1] * Wq[1][j];
            K[t][j] = X[t][0] * Wk[0][j] + X[t][1] * Wk[1][j];
            V[t][j] = X[t][0] * Wv[0][j] + X[t][1] * Wv[1][j];
        }
    for (int t = 0; t < 4; ++t) {
        double s[4], z = 0;
        for (int u = 0; u < 4; ++u) z += s[u] = std::exp((Q[t][0] * K[u][0] + Q[t][1] * K[u][1]) / std::sqrt(2.0));
        for (int j = 0; j < 2; ++j) {
            double o = 0;
            for (int u = 0; u < 4; ++u) o += s[u] / z * V[u][j];
            EXPECT_NEAR(got.values()[t * 2 + j], o, 1e-6);
        }
    }
}

TEST(Blocks, AttentionWindowOneIsPointwiseValueProjection) {
    std::mt19937_64 rng(1);
    const auto x = random_map(rng, 4, 4, 4);
    AttentionParams p;
    p.qkv = {make({4, 12}, copy(random_map(rng, 1, 4, 12))), make({12}, copy(random_map(rng, 1, 1, 12)))};
    p.proj = affine({1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}, {4, 4}, {0, 0, 0, 0});
    const auto got = window_attention(x, p, 1, 0, 1);
    const auto qkv = linear(of(x), p.qkv.w, p.qkv.b);
    for (int t = 0; t < 16; ++t)
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(got.values()[t * 4 + k], qkv.v[t * 12 + 8 + k], 1e-6);
}

TEST(Blocks, ChannelAttentionMatchesScalarOracle) {
    std::mt19937_64 rng(3);
    const auto x = random_map(rng, 4, 4, 4);
    ChannelAttentionParams p;
    p.fc1 = {make({4, 1}, {0.3f, -0.2f, 0.5f, 0.1f}), make({1}, {0.05f})};
    p.fc2 = {make({1, 4}, {0.4f, -0.7f, 0.2f, 1.1f}), make({4}, {0.0f, 0.1f, -0.1f, 0.2f})};
    expect_close(channel_attention(x, p), channel_attention(of(x), p), 1e-6);

    ChannelAttentionParams zero{{Tensor::full({4, 1}, 0), Tensor::full({1}, 0)}, {Tensor::full({1, 4}, 0), Tensor::full({4}, 0)}};
    const auto half = channel_attention(x, zero);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(half.values()[i], 0.5f * x.values()[i]);
}

TEST(Blocks, MlpMatchesErfOracleAndAsymptote) {
    std::mt19937_64 rng(4);
    const auto params = init_params(NetworkConfig::desk(), 5);
    const auto p = MlpParams::from(params, "enc1.rrdb0.layer0.mlp");
    const auto x16 = random_map(rng, 3, 3, 16, 0.5);
    expect_close(mlp_block(x16, p), mlp(of(x16), p), 1e-6);

    MlpParams id{{make({1, 1}, {1.0f}), make({1}, {0.0f})}, {make({1, 1}, {1.0f}), make({1}, {0.0f})}};
    const auto y = mlp_block(make({1, 1, 1, 1}, {6.0f}), id);
    EXPECT_NEAR(y.values()[0], 6.0, 1e-4);
    EXPECT_EQ(mlp_block(Tensor::full({1, 1, 1, 1}, 0.0f), id).values()[0], 0.0f);
}

TEST(Blocks, SwinLayerMatchesStraightLineEvaluation) {
    auto cfg = NetworkConfig::desk();
    const auto params = init_params(cfg, 12);
    std::mt19937_64 rng(6);
    for (int shift : {0, 2}) {
        const auto p = SwinLayerParams::from(params, "enc1.rrdb0.layer1");
        const auto x = random_map(rng, 8, 8, 16);
        const int heads = cfg.heads_for(16);
        const auto got = swin_layer(x, p, 4, shift, heads);

        const Map in = of(x);
        const Map y1 = add(in, attention(layer_norm(in, p.ln1.gamma, p.ln1.beta), p.attn, 4, shift, heads));
        const Map y2 = add(y1, depthwise_reflect(y1, p.dw.w, p.dw.b));
        const Map y3 = channel_attention(y2, p.ca);
        const Map want = add(y3, mlp(layer_norm(y3, p.ln2.gamma, p.ln2.beta), p.mlp));
        expect_close(got, want, 1e-5);
    }
}

TEST(Blocks, SwinLayerWithOnlyChannelAttentionHalvesInput) {
    // Zero the attention projection, depthwise and MLP output: only s = 0.5 remains.
    const auto params = init_params(NetworkConfig::desk(), 13);
    auto p = SwinLayerParams::from(params, "enc1.rrdb0.layer0");
    auto zero_like = [](const Tensor& t) { return Tensor::full(t.shape(), 0.0f); };
    p.attn.proj = {zero_like(p.attn.proj.w), zero_like(p.attn.proj.b)};
    p.dw = {zero_like(p.dw.w), zero_like(p.dw.b)};
    p.ca.fc2 = {zero_like(p.ca.fc2.w), zero_like(p.ca.fc2.b)};
    p.mlp.fc2 = {zero_like(p.mlp.fc2.w), zero_like(p.mlp.fc2.b)};
    std::mt19937_64 rng(7);
    const auto x = random_map(rng, 8, 8, 16);
    const auto y = swin_layer(x, p, 4, 0, 2);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(y.values()[i], 0.5f * x.values()[i]);
}

TEST(Blocks, ChannelFusionIsConvexBlend) {
    const auto params = init_params(NetworkConfig::desk(), 14);
    const auto p = FusionParams::from(params, "dec2.fuse");
    std::mt19937_64 rng(8);
    const int c = params.get("dec2.fuse.fc1.w").dim(0) / 2;
    const auto d = random_map(rng, 8, 8, c);
    const auto e = random_map(rng, 8, 8, c);
    const auto f = channel_fusion(d, e, p);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const real lo = std::min(d.values()[i], e.values()[i]), hi = std::max(d.values()[i], e.values()[i]);
        EXPECT_GE(f.values()[i], lo - 1e-6f);
        EXPECT_LE(f.values()[i], hi + 1e-6f);
    }
}

TEST(Blocks, DivisibilityViolationsAreShapeMismatch) {
    std::mt19937_64 rng(9);
    const auto params = init_params(NetworkConfig::desk(), 15);
    const auto p = AttentionParams::from(params, "enc1.rrdb0.layer0.attn");
    try {
        window_attention(random_map(rng, 6, 8, 16), p, 4, 0, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
    try {
        window_attention(random_map(rng, 8, 8, 16), p, 4, 0, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "swinhaze/error.hpp"
#include "swinhaze/nn/ops.hpp"

namespace swinhaze::nn {

namespace {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geometry {
    int n, h, w, c, heads, dk, window, shift, tokens, windows;
};

Geometry check_geometry(const Tensor& qkv, int heads, int window, int shift) {
    if (!qkv.defined() || qkv.rank() != 4 || qkv.dim(3) % 3 != 0) {
        fail(ErrorCode::ShapeMismatch, "attention expects qkv of shape [N,H,W,3C]");
    }
    Geometry g{};
    g.n = qkv.dim(0);
    g.h = qkv.dim(1);
    g.w = qkv.dim(2);
    g.c = qkv.dim(3) / 3;
    if (window < 1 || g.h % window != 0 || g.w % window != 0) {
        fail(ErrorCode::ShapeMismatch, "window " + std::to_string(window) + " does not tile a " +
                                              std::to_string(g.h) + "x" + std::to_string(g.w) + " map");
    }
    if (heads < 1 || g.c % heads != 0) {
        fail(ErrorCode::ShapeMismatch, std::to_string(heads) + " heads do not divide " +
                                              std::to_string(g.c) + " channels");
    }
    if (shift < 0 || shift >= window) fail(ErrorCode::InvalidParameter, "shift must lie in [0, window)");
    g.heads = heads;
    g.dk = g.c / heads;
    g.window = window;
    g.shift = shift;
    g.tokens = window * window;
    g.windows = (g.h / window) * (g.w / window);
    return g;
}

int region(int r, int extent, int window, int shift) {
    if (r < extent - window) return 0;
    if (r < extent - shift) return 1;
    return 2;
}

// Per-window token regions on the rolled grid; equal ids may attend.
std::vector<int> token_regions(const Geometry& g) {
    std::vector<int> ids(static_cast<std::size_t>(g.windows) * g.tokens, 0);
    if (g.shift == 0) return ids;
    const int per_row = g.w / g.window;
    for (int wi = 0; wi < g.windows; ++wi) {
        const int wy = wi / per_row;
        const int wx = wi % per_row;
        for (int t = 0; t < g.tokens; ++t) {
            const int ry = wy * g.window + t / g.window;
            const int rx = wx * g.window + t % g.window;
            ids[wi * g.tokens + t] =
                region(ry, g.h, g.window, g.shift) * 3 + region(rx, g.w, g.window, g.shift);
        }
    }
    return ids;
}

struct Gathered {
    Mat q, k, v;
};

Gathered gather(const std::vector<real>& src, const Geometry& g, const int* idx, int b, int head) {
    Gathered out{Mat(g.tokens, g.dk), Mat(g.tokens, g.dk), Mat(g.tokens, g.dk)};
    const std::size_t stride = 3 * static_cast<std::size_t>(g.c);
    for (int t = 0; t < g.tokens; ++t) {
        const real* px = &src[(static_cast<std::size_t>(b) * g.h * g.w + idx[t]) * stride + head * g.dk];
        for (int d = 0; d < g.dk; ++d) {
            out.q(t, d) = px[d];
            out.k(t, d) = px[g.c + d];
            out.v(t, d) = px[2 * g.c + d];
        }
    }
    return out;
}

// Returns outputs in the original layout; fills probs ordered [n][window][head][q][k].
std::vector<real> attention_forward(const std::vector<real>& qkv, const Geometry& g,
                                    const std::vector<int>& index, const std::vector<int>& regions,
                                    std::vector<real>& probs) {
    const real scale = static_cast<real>(1.0 / std::sqrt(static_cast<double>(g.dk)));
    const std::size_t tt = static_cast<std::size_t>(g.tokens) * g.tokens;
    probs.assign(static_cast<std::size_t>(g.n) * g.windows * g.heads * tt, real{0});
    std::vector<real> out(static_cast<std::size_t>(g.n) * g.h * g.w * g.c);
    for (int b = 0; b < g.n; ++b) {
        for (int wi = 0; wi < g.windows; ++wi) {
            const int* idx = &index[static_cast<std::size_t>(wi) * g.tokens];
            const int* reg = &regions[static_cast<std::size_t>(wi) * g.tokens];
            for (int hd = 0; hd < g.heads; ++hd) {
                const Gathered m = gather(qkv, g, idx, b, hd);
                Mat s = (m.q * m.k.transpose()) * scale;
                real* p = &probs[((static_cast<std::size_t>(b) * g.windows + wi) * g.heads + hd) * tt];
                for (int i = 0; i < g.tokens; ++i) {
                    real mx = -std::numeric_limits<real>::infinity();
                    for (int j = 0; j < g.tokens; ++j) {
                        if (reg[i] == reg[j]) mx = std::max(mx, s(i, j));
                    }
                    double sum = 0.0;
                    for (int j = 0; j < g.tokens; ++j) {
                        const real e = reg[i] == reg[j] ? std::exp(s(i, j) - mx) : real{0};
                        p[i * g.tokens + j] = e;
                        sum += e;
                    }
                    for (int j = 0; j < g.tokens; ++j) {
                        p[i * g.tokens + j] = static_cast<real>(p[i * g.tokens + j] / sum);
                    }
                }
                const Mat o = Eigen::Map<const Mat>(p, g.tokens, g.tokens) * m.v;
                for (int t = 0; t < g.tokens; ++t) {
                    real* dst = &out[(static_cast<std::size_t>(b) * g.h * g.w + idx[t]) * g.c + hd * g.dk];
                    for (int d = 0; d < g.dk; ++d) dst[d] = o(t, d);
                }
            }
        }
    }
    return out;
}

}  // namespace

std::vector<int> window_token_index(int height, int width, int window, int shift) {
    if (window < 1 || height % window != 0 || width % window != 0) {
        fail(ErrorCode::ShapeMismatch, "window does not tile the grid");
    }
    const int per_row = width / window;
    const int windows = (height / window) * per_row;
    const int tokens = window * window;
    std::vector<int> index(static_cast<std::size_t>(windows) * tokens);
    for (int wi = 0; wi < windows; ++wi) {
        for (int t = 0; t < tokens; ++t) {
            const int ry = (wi / per_row) * window + t / window;
            const int rx = (wi % per_row) * window + t % window;
            const int y = (ry + shift) % height;
            const int x = (rx + shift) % width;
            index[static_cast<std::size_t>(wi) * tokens + t] = y * width + x;
        }
    }
    return index;
}

Tensor partition_windows(const Tensor& x, int window, int shift) {
    if (!x.defined() || x.rank() != 4) fail(ErrorCode::ShapeMismatch, "partition_windows expects NHWC");
    const int n = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int c = x.dim(3);
    const auto index = window_token_index(h, w, window, shift);
    const int windows = static_cast<int>(index.size()) / (window * window);
    std::vector<real> out(x.size());
    const auto v = x.values();
    for (int b = 0; b < n; ++b) {
        for (std::size_t k = 0; k < index.size(); ++k) {
            std::copy_n(v.begin() + (static_cast<std::size_t>(b) * h * w + index[k]) * c, c,
                        out.begin() + (static_cast<std::size_t>(b) * index.size() + k) * c);
        }
    }
    return Tensor({n * windows, window, window, c}, std::move(out));
}

Tensor merge_windows(const Tensor& windows, int height, int width, int window, int shift) {
    const auto index = window_token_index(height, width, window, shift);
    if (!windows.defined() || windows.rank() != 4 || windows.dim(1) != window ||
        windows.dim(2) != window || windows.size() % (index.size() * windows.dim(3)) != 0) {
        fail(ErrorCode::ShapeMismatch, "merge_windows: window tensor does not match the grid");
    }
    const int c = windows.dim(3);
    const int n = static_cast<int>(windows.size() / (index.size() * c));
    std::vector<real> out(windows.size());
    const auto v = windows.values();
    for (int b = 0; b < n; ++b) {
        for (std::size_t k = 0; k < index.size(); ++k) {
            std::copy_n(v.begin() + (static_cast<std::size_t>(b) * index.size() + k) * c, c,
                        out.begin() + (static_cast<std::size_t>(b) * height * width + index[k]) * c);
        }
    }
    return Tensor({n, height, width, c}, std::move(out));
}

std::vector<real> window_attention_probs(const Tensor& qkv, int heads, int window, int shift) {
    const Geometry g = check_geometry(qkv, heads, window, shift);
    const auto index = window_token_index(g.h, g.w, window, shift);
    std::vector<real> probs;
    const std::vector<real> values(qkv.values().begin(), qkv.values().end());
    attention_forward(values, g, index, token_regions(g), probs);
    return probs;
}

Tensor window_attention_core(const Tensor& qkv, int heads, int window, int shift) {
    const Geometry g = check_geometry(qkv, heads, window, shift);
    auto index = std::make_shared<std::vector<int>>(window_token_index(g.h, g.w, window, shift));
    auto probs = std::make_shared<std::vector<real>>();
    const Node& in = *qkv.node();
    std::vector<real> out = attention_forward(in.value, g, *index, token_regions(g), *probs);

    return Tensor::make_result({g.n, g.h, g.w, g.c}, std::move(out), {qkv}, [=](Node& self) {
        Node& px = *self.parents[0];
        if (!px.requires_grad) return;
        real* gx = px.grad_data();
        const real scale = static_cast<real>(1.0 / std::sqrt(static_cast<double>(g.dk)));
        const std::size_t tt = static_cast<std::size_t>(g.tokens) * g.tokens;
        const std::size_t stride = 3 * static_cast<std::size_t>(g.c);
        Mat dout(g.tokens, g.dk);
        for (int b = 0; b < g.n; ++b) {
            for (int wi = 0; wi < g.windows; ++wi) {
                const int* idx = &(*index)[static_cast<std::size_t>(wi) * g.tokens];
                for (int hd = 0; hd < g.heads; ++hd) {
                    const Gathered m = gather(px.value, g, idx, b, hd);
                    for (int t = 0; t < g.tokens; ++t) {
                        const real* src =
                            &self.grad[(static_cast<std::size_t>(b) * g.h * g.w + idx[t]) * g.c + hd * g.dk];
                        for (int d = 0; d < g.dk; ++d) dout(t, d) = src[d];
                    }
                    const Eigen::Map<const Mat> p(
                        &(*probs)[((static_cast<std::size_t>(b) * g.windows + wi) * g.heads + hd) * tt],
                        g.tokens, g.tokens);
                    const Mat dv = p.transpose() * dout;
                    const Mat dp = dout * m.v.transpose();
                    Mat ds = p.cwiseProduct(dp);
                    const Eigen::Matrix<real, Eigen::Dynamic, 1> rows = ds.rowwise().sum();
                    ds -= (p.array().colwise() * rows.array()).matrix();
                    const Mat dq = (ds * m.k) * scale;
                    const Mat dk = (ds.transpose() * m.q) * scale;
                    for (int t = 0; t < g.tokens; ++t) {
                        real* dst = gx + (static_cast<std::size_t>(b) * g.h * g.w + idx[t]) * stride + hd * g.dk;
                        for (int d = 0; d < g.dk; ++d) {
                            dst[d] += dq(t, d);
                            dst[g.c + d] += dk(t, d);
                            dst[2 * g.c + d] += dv(t, d);
                        }
                    }
                }
            }
        }
    });
}

}  // namespace swinhaze::nn

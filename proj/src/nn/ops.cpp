#include "swinhaze/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "swinhaze/error.hpp"

namespace swinhaze::nn {

namespace {

using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::Matrix<real, 1, Eigen::Dynamic>>;
using MapVec = Eigen::Map<Eigen::Matrix<real, 1, Eigen::Dynamic>>;

void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    require(a.defined() && b.defined() && a.shape() == b.shape(),
            std::string(op) + ": operand shapes differ");
}

void require_nhwc(const Tensor& x, const char* op) {
    require(x.defined() && x.rank() == 4, std::string(op) + ": expected an NHWC tensor");
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Source index for a possibly out-of-range tap, or -1 when it reads a zero.
int tap_index(int i, int n, Pad pad) {
    if (i >= 0 && i < n) return i;
    if (pad == Pad::Zero || n == 1) return -1;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
    std::vector<real> out(x.size());
    const auto in = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
    return Tensor::make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
        Node& xp = parent(self, 0);
        if (!xp.requires_grad) return;
        real* gx = xp.grad_data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            gx[i] += self.grad[i] * df(xp.value[i], self.value[i]);
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    std::vector<real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& in = parent(self, p);
            if (!in.requires_grad) continue;
            real* g = in.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    std::vector<real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const real sign[2] = {1, -1};
        for (std::size_t p = 0; p < 2; ++p) {
            Node& in = parent(self, p);
            if (!in.requires_grad) continue;
            real* g = in.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += sign[p] * self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    std::vector<real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            real* g = pa.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            real* g = pb.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.value[i];
        }
    });
}

Tensor scale(const Tensor& a, real s) {
    return unary(a, [s](real v) { return s * v; }, [s](real, real) { return s; });
}

Tensor scaled_residual(const Tensor& x, const Tensor& branch, real alpha) {
    require_same(x, branch, "scaled_residual");
    std::vector<real> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] + alpha * branch.values()[i];
    return Tensor::make_result(x.shape(), std::move(out), {x, branch}, [alpha](Node& self) {
        Node& px = parent(self, 0);
        Node& pb = parent(self, 1);
        if (px.requires_grad) {
            real* g = px.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            real* g = pb.grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += alpha * self.grad[i];
        }
    });
}

Tensor blend(const Tensor& d, const Tensor& e, const Tensor& weights) {
    require_same(d, e, "blend");
    require_same(d, weights, "blend");
    std::vector<real> out(d.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const real w = weights.values()[i];
        out[i] = d.values()[i] * w + e.values()[i] * (real{1} - w);
    }
    return Tensor::make_result(d.shape(), std::move(out), {d, e, weights}, [](Node& self) {
        Node& pd = parent(self, 0);
        Node& pe = parent(self, 1);
        Node& pw = parent(self, 2);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const real g = self.grad[i];
            const real w = pw.value[i];
            if (pd.requires_grad) pd.grad_data()[i] += g * w;
            if (pe.requires_grad) pe.grad_data()[i] += g * (real{1} - w);
            if (pw.requires_grad) pw.grad_data()[i] += g * (pd.value[i] - pe.value[i]);
        }
    });
}

Tensor mul_channels(const Tensor& x, const Tensor& s) {
    require_nhwc(x, "mul_channels");
    const int n = x.dim(0);
    const int c = x.dim(3);
    require(s.defined() && s.shape() == Shape({n, 1, 1, c}), "mul_channels: scale must be [N,1,1,C]");
    const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
    std::vector<real> out(x.size());
    for (int b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t i = (b * hw + p) * c + ch;
                out[i] = x.values()[i] * s.values()[b * c + ch];
            }
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, s}, [n, c, hw](Node& self) {
        Node& px = parent(self, 0);
        Node& ps = parent(self, 1);
        real* gx = px.requires_grad ? px.grad_data() : nullptr;
        real* gs = ps.requires_grad ? ps.grad_data() : nullptr;
        for (int b = 0; b < n; ++b) {
            for (std::size_t p = 0; p < hw; ++p) {
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t i = (b * hw + p) * c + ch;
                    if (gx) gx[i] += self.grad[i] * ps.value[b * c + ch];
                    if (gs) gs[b * c + ch] += self.grad[i] * px.value[i];
                }
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](real v) { return v > 0 ? v : real{0}; },
                 [](real v, real) { return v > 0 ? real{1} : real{0}; });
}

Tensor gelu(const Tensor& x) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary(
        x,
        [=](real v) {
            const double z = v;
            return static_cast<real>(z * 0.5 * (1.0 + std::erf(z * kInvSqrt2)));
        },
        [=](real v, real) {
            const double z = v;
            const double cdf = 0.5 * (1.0 + std::erf(z * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
            return static_cast<real>(cdf + z * pdf);
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, [](real v) { return static_cast<real>(1.0 / (1.0 + std::exp(-double{v}))); },
                 [](real, real y) { return y * (real{1} - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](real v) { return std::tanh(v); },
                 [](real, real y) { return real{1} - y * y; });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_channels: nothing to concatenate");
    for (const Tensor& p : parts) require_nhwc(p, "concat_channels");
    const Shape& first = parts.front().shape();
    std::vector<int> widths;
    int total = 0;
    for (const Tensor& p : parts) {
        require(p.dim(0) == first[0] && p.dim(1) == first[1] && p.dim(2) == first[2],
                "concat_channels: spatial shapes differ");
        widths.push_back(p.dim(3));
        total += p.dim(3);
    }
    const std::size_t positions = static_cast<std::size_t>(first[0]) * first[1] * first[2];
    std::vector<real> out(positions * total);
    int offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].values();
        const int c = widths[k];
        for (std::size_t p = 0; p < positions; ++p) {
            std::copy_n(src.begin() + p * c, c, out.begin() + p * total + offset);
        }
        offset += c;
    }
    return Tensor::make_result({first[0], first[1], first[2], total}, std::move(out), parts,
                               [widths, total, positions](Node& self) {
                                   int off = 0;
                                   for (std::size_t k = 0; k < widths.size(); ++k) {
                                       Node& in = parent(self, k);
                                       const int c = widths[k];
                                       if (in.requires_grad) {
                                           real* g = in.grad_data();
                                           for (std::size_t p = 0; p < positions; ++p) {
                                               for (int ch = 0; ch < c; ++ch) {
                                                   g[p * c + ch] += self.grad[p * total + off + ch];
                                               }
                                           }
                                       }
                                       off += c;
                                   }
                               });
}

Tensor global_avg_pool(const Tensor& x) {
    require_nhwc(x, "global_avg_pool");
    const int n = x.dim(0);
    const int c = x.dim(3);
    const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
    std::vector<real> out(static_cast<std::size_t>(n) * c, real{0});
    for (int b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
            for (int ch = 0; ch < c; ++ch) out[b * c + ch] += x.values()[(b * hw + p) * c + ch];
        }
    }
    for (real& v : out) v /= static_cast<real>(hw);
    return Tensor::make_result({n, 1, 1, c}, std::move(out), {x}, [n, c, hw](Node& self) {
        Node& px = parent(self, 0);
        if (!px.requires_grad) return;
        real* g = px.grad_data();
        const real inv = real{1} / static_cast<real>(hw);
        for (int b = 0; b < n; ++b) {
            for (std::size_t p = 0; p < hw; ++p) {
                for (int ch = 0; ch < c; ++ch) g[(b * hw + p) * c + ch] += self.grad[b * c + ch] * inv;
            }
        }
    });
}

Tensor resize_bilinear(const Tensor& x, int out_height, int out_width) {
    require_nhwc(x, "resize_bilinear");
    if (out_height < 1 || out_width < 1) {
        fail(ErrorCode::InvalidParameter, "resize target must be positive");
    }
    const int n = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int c = x.dim(3);
    if (h == out_height && w == out_width) return x;

    struct Tap {
        int i0, i1;
        real w0, w1;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(out);
        const double s = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            const double f = std::clamp((o + 0.5) * s - 0.5, 0.0, in - 1.0);
            const int i0 = static_cast<int>(f);
            const int i1 = std::min(i0 + 1, in - 1);
            const real frac = static_cast<real>(f - i0);
            t[o] = {i0, i1, real{1} - frac, frac};
        }
        return t;
    };
    auto ty = std::make_shared<std::vector<Tap>>(taps(h, out_height));
    auto tx = std::make_shared<std::vector<Tap>>(taps(w, out_width));
    auto src = [&](int b, int y, int xx) { return (static_cast<std::size_t>(b * h + y) * w + xx) * c; };

    std::vector<real> out(static_cast<std::size_t>(n) * out_height * out_width * c);
    for (int b = 0; b < n; ++b) {
        for (int oy = 0; oy < out_height; ++oy) {
            const Tap& vy = (*ty)[oy];
            for (int ox = 0; ox < out_width; ++ox) {
                const Tap& vx = (*tx)[ox];
                real* dst = &out[(static_cast<std::size_t>(b * out_height + oy) * out_width + ox) * c];
                for (int ch = 0; ch < c; ++ch) {
                    const auto v = x.values();
                    const real top = vx.w0 * v[src(b, vy.i0, vx.i0) + ch] + vx.w1 * v[src(b, vy.i0, vx.i1) + ch];
                    const real bot = vx.w0 * v[src(b, vy.i1, vx.i0) + ch] + vx.w1 * v[src(b, vy.i1, vx.i1) + ch];
                    dst[ch] = vy.w0 * top + vy.w1 * bot;
                }
            }
        }
    }
    return Tensor::make_result(
        {n, out_height, out_width, c}, std::move(out), {x},
        [=](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            real* g = px.grad_data();
            auto at = [&](int b, int y, int xx) { return (static_cast<std::size_t>(b * h + y) * w + xx) * c; };
            for (int b = 0; b < n; ++b) {
                for (int oy = 0; oy < out_height; ++oy) {
                    const Tap& vy = (*ty)[oy];
                    for (int ox = 0; ox < out_width; ++ox) {
                        const Tap& vx = (*tx)[ox];
                        const real* up = &self.grad[(static_cast<std::size_t>(b * out_height + oy) * out_width + ox) * c];
                        for (int ch = 0; ch < c; ++ch) {
                            g[at(b, vy.i0, vx.i0) + ch] += up[ch] * vy.w0 * vx.w0;
                            g[at(b, vy.i0, vx.i1) + ch] += up[ch] * vy.w0 * vx.w1;
                            g[at(b, vy.i1, vx.i0) + ch] += up[ch] * vy.w1 * vx.w0;
                            g[at(b, vy.i1, vx.i1) + ch] += up[ch] * vy.w1 * vx.w1;
                        }
                    }
                }
            }
        });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require(x.defined() && weight.defined() && bias.defined() && weight.rank() == 2,
            "linear: missing operand");
    const int cin = weight.dim(0);
    const int cout = weight.dim(1);
    require(x.dim(-1) == cin, "linear: input has " + std::to_string(x.dim(-1)) +
                                  " channels, weight expects " + std::to_string(cin));
    require(bias.size() == static_cast<std::size_t>(cout), "linear: bias size mismatch");
    const Eigen::Index m = static_cast<Eigen::Index>(x.size() / cin);

    std::vector<real> out(static_cast<std::size_t>(m) * cout);
    MapMat y(out.data(), m, cout);
    y.noalias() = ConstMapMat(x.values().data(), m, cin) * ConstMapMat(weight.values().data(), cin, cout);
    y.rowwise() += ConstMapVec(bias.values().data(), cout);

    Shape shape = x.shape();
    shape.back() = cout;
    return Tensor::make_result(std::move(shape), std::move(out), {x, weight, bias},
                               [m, cin, cout](Node& self) {
                                   Node& px = parent(self, 0);
                                   Node& pw = parent(self, 1);
                                   Node& pb = parent(self, 2);
                                   ConstMapMat dy(self.grad.data(), m, cout);
                                   if (px.requires_grad) {
                                       MapMat(px.grad_data(), m, cin).noalias() +=
                                           dy * ConstMapMat(pw.value.data(), cin, cout).transpose();
                                   }
                                   if (pw.requires_grad) {
                                       MapMat(pw.grad_data(), cin, cout).noalias() +=
                                           ConstMapMat(px.value.data(), m, cin).transpose() * dy;
                                   }
                                   if (pb.requires_grad) {
                                       MapVec(pb.grad_data(), cout) += dy.colwise().sum();
                                   }
                               });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int kernel, int stride,
              int padding, Pad pad) {
    require_nhwc(x, "conv2d");
    require(weight.defined() && bias.defined() && weight.rank() == 2, "conv2d: missing operand");
    const int n = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int cin = x.dim(3);
    const int cout = weight.dim(1);
    const int kk = kernel * kernel * cin;
    require(weight.dim(0) == kk, "conv2d: weight rows " + std::to_string(weight.dim(0)) +
                                     " do not match k*k*Cin = " + std::to_string(kk));
    require(bias.size() == static_cast<std::size_t>(cout), "conv2d: bias size mismatch");
    const int ho = (h + 2 * padding - kernel) / stride + 1;
    const int wo = (w + 2 * padding - kernel) / stride + 1;
    require(ho >= 1 && wo >= 1, "conv2d: input smaller than kernel");
    const Eigen::Index m = static_cast<Eigen::Index>(n) * ho * wo;

    auto cols = std::make_shared<std::vector<real>>(static_cast<std::size_t>(m) * kk, real{0});
    const auto xv = x.values();
    for (int b = 0; b < n; ++b) {
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                real* row = cols->data() + (static_cast<std::size_t>(b * ho + oy) * wo + ox) * kk;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = tap_index(oy * stride - padding + ky, h, pad);
                    if (iy < 0) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = tap_index(ox * stride - padding + kx, w, pad);
                        if (ix < 0) continue;
                        std::copy_n(xv.begin() + (static_cast<std::size_t>(b * h + iy) * w + ix) * cin, cin,
                                    row + (ky * kernel + kx) * cin);
                    }
                }
            }
        }
    }
    std::vector<real> out(static_cast<std::size_t>(m) * cout);
    MapMat y(out.data(), m, cout);
    y.noalias() = ConstMapMat(cols->data(), m, kk) * ConstMapMat(weight.values().data(), kk, cout);
    y.rowwise() += ConstMapVec(bias.values().data(), cout);

    return Tensor::make_result(
        {n, ho, wo, cout}, std::move(out), {x, weight, bias},
        [=](Node& self) {
            Node& px = parent(self, 0);
            Node& pw = parent(self, 1);
            Node& pb = parent(self, 2);
            ConstMapMat dy(self.grad.data(), m, cout);
            if (pw.requires_grad) {
                MapMat(pw.grad_data(), kk, cout).noalias() += ConstMapMat(cols->data(), m, kk).transpose() * dy;
            }
            if (pb.requires_grad) MapVec(pb.grad_data(), cout) += dy.colwise().sum();
            if (!px.requires_grad) return;
            RowMat dcols = dy * ConstMapMat(pw.value.data(), kk, cout).transpose();
            real* gx = px.grad_data();
            for (int b = 0; b < n; ++b) {
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox) {
                        const real* row = dcols.data() + (static_cast<std::size_t>(b * ho + oy) * wo + ox) * kk;
                        for (int ky = 0; ky < kernel; ++ky) {
                            const int iy = tap_index(oy * stride - padding + ky, h, pad);
                            if (iy < 0) continue;
                            for (int kx = 0; kx < kernel; ++kx) {
                                const int ix = tap_index(ox * stride - padding + kx, w, pad);
                                if (ix < 0) continue;
                                real* dst = gx + (static_cast<std::size_t>(b * h + iy) * w + ix) * cin;
                                const real* src = row + (ky * kernel + kx) * cin;
                                for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci];
                            }
                        }
                    }
                }
            }
        });
}

Tensor depthwise_conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias, Pad pad) {
    require_nhwc(x, "depthwise_conv3x3");
    const int n = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int c = x.dim(3);
    require(weight.defined() && weight.shape() == Shape({9, c}), "depthwise_conv3x3: weight must be [9, C]");
    require(bias.defined() && bias.size() == static_cast<std::size_t>(c), "depthwise_conv3x3: bias size mismatch");
    auto at = [=](int b, int y, int xx) { return (static_cast<std::size_t>(b * h + y) * w + xx) * c; };
    std::vector<real> out(x.size());
    const auto xv = x.values();
    const auto wv = weight.values();
    for (int b = 0; b < n; ++b) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                real* dst = &out[at(b, y, xx)];
                for (int ch = 0; ch < c; ++ch) dst[ch] = bias.values()[ch];
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = tap_index(y + ky - 1, h, pad);
                    if (iy < 0) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = tap_index(xx + kx - 1, w, pad);
                        if (ix < 0) continue;
                        const real* src = &xv[at(b, iy, ix)];
                        const real* k = &wv[(ky * 3 + kx) * c];
                        for (int ch = 0; ch < c; ++ch) dst[ch] += k[ch] * src[ch];
                    }
                }
            }
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, weight, bias}, [=](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        Node& pb = parent(self, 2);
        real* gx = px.requires_grad ? px.grad_data() : nullptr;
        real* gw = pw.requires_grad ? pw.grad_data() : nullptr;
        real* gb = pb.requires_grad ? pb.grad_data() : nullptr;
        for (int b = 0; b < n; ++b) {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) {
                    const real* up = &self.grad[at(b, y, xx)];
                    if (gb) {
                        for (int ch = 0; ch < c; ++ch) gb[ch] += up[ch];
                    }
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = tap_index(y + ky - 1, h, pad);
                        if (iy < 0) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = tap_index(xx + kx - 1, w, pad);
                            if (ix < 0) continue;
                            const std::size_t s = at(b, iy, ix);
                            const int k = (ky * 3 + kx) * c;
                            for (int ch = 0; ch < c; ++ch) {
                                if (gx) gx[s + ch] += up[ch] * pw.value[k + ch];
                                if (gw) gw[k + ch] += up[ch] * px.value[s + ch];
                            }
                        }
                    }
                }
            }
        }
    });
}

Tensor conv_transpose3x3_s2(const Tensor& x, const Tensor& weight, const Tensor& bias, Pad pad) {
    require_nhwc(x, "conv_transpose3x3_s2");
    const int n = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int cin = x.dim(3);
    require(weight.defined() && weight.rank() == 2 && weight.dim(0) == cin && weight.dim(1) % 9 == 0,
            "conv_transpose3x3_s2: weight must be [Cin, 9 * Cout]");
    const int cout = weight.dim(1) / 9;
    require(bias.defined() && bias.size() == static_cast<std::size_t>(cout),
            "conv_transpose3x3_s2: bias size mismatch");
    const int ho = 2 * h;
    const int wo = 2 * w;
    const Eigen::Index m = static_cast<Eigen::Index>(n) * h * w;
    const int kc = 9 * cout;
    // Virtual input rows/columns h and w (edge copies) only exist with Reflect.
    const int extra = pad == Pad::Reflect ? 1 : 0;

    // Visits every (input position, tap, output position) triple.
    auto for_each_tap = [=](auto&& fn) {
        for (int b = 0; b < n; ++b) {
            for (int vy = 0; vy < h + extra; ++vy) {
                const int iy = std::min(vy, h - 1);
                for (int vx = 0; vx < w + extra; ++vx) {
                    const int ix = std::min(vx, w - 1);
                    const std::size_t in = static_cast<std::size_t>(b * h + iy) * w + ix;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int oy = 2 * vy - 1 + ky;
                        if (oy < 0 || oy >= ho) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ox = 2 * vx - 1 + kx;
                            if (ox < 0 || ox >= wo) continue;
                            fn(in, ky * 3 + kx, (static_cast<std::size_t>(b * ho + oy) * wo + ox) * cout);
                        }
                    }
                }
            }
        }
    };

    RowMat cols = ConstMapMat(x.values().data(), m, cin) * ConstMapMat(weight.values().data(), cin, kc);
    std::vector<real> out(static_cast<std::size_t>(n) * ho * wo * cout);
    for (std::size_t p = 0; p < out.size(); p += cout) {
        for (int co = 0; co < cout; ++co) out[p + co] = bias.values()[co];
    }
    for_each_tap([&](std::size_t in, int k, std::size_t o) {
        const real* src = cols.data() + in * kc + k * cout;
        for (int co = 0; co < cout; ++co) out[o + co] += src[co];
    });
    return Tensor::make_result(
        {n, ho, wo, cout}, std::move(out), {x, weight, bias},
        [=](Node& self) {
            Node& px = parent(self, 0);
            Node& pw = parent(self, 1);
            Node& pb = parent(self, 2);
            if (pb.requires_grad) {
                real* gb = pb.grad_data();
                for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % cout] += self.grad[i];
            }
            if (!px.requires_grad && !pw.requires_grad) return;
            RowMat dcols = RowMat::Zero(m, kc);
            for_each_tap([&](std::size_t in, int k, std::size_t o) {
                real* dst = dcols.data() + in * kc + k * cout;
                for (int co = 0; co < cout; ++co) dst[co] += self.grad[o + co];
            });
            if (px.requires_grad) {
                MapMat(px.grad_data(), m, cin).noalias() +=
                    dcols * ConstMapMat(pw.value.data(), cin, kc).transpose();
            }
            if (pw.requires_grad) {
                MapMat(pw.grad_data(), cin, kc).noalias() +=
                    ConstMapMat(px.value.data(), m, cin).transpose() * dcols;
            }
        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
    const int c = x.dim(-1);
    require(gamma.defined() && beta.defined() && gamma.size() == static_cast<std::size_t>(c) &&
                beta.size() == static_cast<std::size_t>(c),
            "layer_norm: affine parameters must have C entries");
    const std::size_t rows = x.size() / c;
    auto xhat = std::make_shared<std::vector<real>>(x.size());
    auto rstd = std::make_shared<std::vector<real>>(rows);
    std::vector<real> out(x.size());
    const auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const real* src = &xv[r * c];
        double mean = 0.0;
        for (int i = 0; i < c; ++i) mean += src[i];
        mean /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*rstd)[r] = static_cast<real>(inv);
        for (int i = 0; i < c; ++i) {
            const real nh = static_cast<real>((src[i] - mean) * inv);
            (*xhat)[r * c + i] = nh;
            out[r * c + i] = gamma.values()[i] * nh + beta.values()[i];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, gamma, beta}, [=](Node& self) {
        Node& px = parent(self, 0);
        Node& pg = parent(self, 1);
        Node& pb = parent(self, 2);
        real* gg = pg.requires_grad ? pg.grad_data() : nullptr;
        real* gb = pb.requires_grad ? pb.grad_data() : nullptr;
        real* gx = px.requires_grad ? px.grad_data() : nullptr;
        std::vector<real> dxhat(c);
        for (std::size_t r = 0; r < rows; ++r) {
            const real* up = &self.grad[r * c];
            const real* nh = &(*xhat)[r * c];
            double sum_d = 0.0;
            double sum_dx = 0.0;
            for (int i = 0; i < c; ++i) {
                if (gg) gg[i] += up[i] * nh[i];
                if (gb) gb[i] += up[i];
                dxhat[i] = up[i] * pg.value[i];
                sum_d += dxhat[i];
                sum_dx += dxhat[i] * nh[i];
            }
            if (!gx) continue;
            const double inv = (*rstd)[r];
            for (int i = 0; i < c; ++i) {
                gx[r * c + i] += static_cast<real>(inv * (dxhat[i] - sum_d / c - nh[i] * sum_dx / c));
            }
        }
    });
}

Tensor weighted_sum(const Tensor& x, const std::vector<real>& weights) {
    require(weights.size() == x.size(), "weighted_sum: weight count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += double{weights[i]} * x.values()[i];
    return Tensor::make_result({1}, {static_cast<real>(acc)}, {x}, [weights](Node& self) {
        Node& px = parent(self, 0);
        if (!px.requires_grad) return;
        real* g = px.grad_data();
        for (std::size_t i = 0; i < weights.size(); ++i) g[i] += self.grad[0] * weights[i];
    });
}

}  // namespace swinhaze::nn

#include "swinhaze/guided_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"

namespace swinhaze::guided {

namespace {

// 1 where every sample of the (2r + 1)^2 reflect-padded window equals the centre
// window's first sample, i.e. the local variance is exactly zero.
std::vector<std::uint8_t> constant_windows(const ImageBuffer& img, int radius) {
    const int h = img.height();
    const int w = img.width();
    const int c = img.channels();
    std::vector<double> lo(img.size());
    std::vector<double> hi(img.size());
    std::vector<double> row_lo(img.size());
    std::vector<double> row_hi(img.size());
    auto idx = [&](int y, int x, int ch) { return (static_cast<std::size_t>(y) * w + x) * c + ch; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double mn = img.at(y, x, ch);
                double mx = mn;
                for (int k = -radius; k <= radius; ++k) {
                    const double v = img.at(y, imaging::reflect_index(x + k, w), ch);
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                }
                row_lo[idx(y, x, ch)] = mn;
                row_hi[idx(y, x, ch)] = mx;
            }
        }
    }
    std::vector<std::uint8_t> flat(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double mn = row_lo[idx(y, x, ch)];
                double mx = row_hi[idx(y, x, ch)];
                for (int k = -radius; k <= radius; ++k) {
                    const int yy = imaging::reflect_index(y + k, h);
                    mn = std::min(mn, row_lo[idx(yy, x, ch)]);
                    mx = std::max(mx, row_hi[idx(yy, x, ch)]);
                }
                flat[idx(y, x, ch)] = mn == mx ? 1 : 0;
            }
        }
    }
    return flat;
}

}  // namespace

int default_radius(int height) {
    return std::max(1, static_cast<int>(std::lround(4.0 * height / 256.0)));
}

GuidedCoefficients guided_coefficients(const ImageBuffer& guide, const ImageBuffer& reference,
                                       int radius, double eps) {
    if (!guide.same_shape(reference)) {
        fail(ErrorCode::ShapeMismatch, "guide and reference differ in shape");
    }
    if (!(eps > 0.0)) fail(ErrorCode::InvalidParameter, "guided eps must be positive");

    ImageBuffer guide_sq = guide;
    ImageBuffer cross = guide;
    auto g = guide.data();
    auto r = reference.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        guide_sq.data()[i] = g[i] * g[i];
        cross.data()[i] = g[i] * r[i];
    }
    const ImageBuffer mu_t = imaging::box_mean(guide, radius);
    const ImageBuffer mu_ref = imaging::box_mean(reference, radius);
    const ImageBuffer mean_cross = imaging::box_mean(cross, radius);
    const ImageBuffer mean_sq = imaging::box_mean(guide_sq, radius);

    GuidedCoefficients coefs{ImageBuffer(guide.height(), guide.width(), guide.channels()),
                             ImageBuffer(guide.height(), guide.width(), guide.channels()),
                             radius, eps};
    const std::vector<std::uint8_t> flat = constant_windows(guide, radius);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double mt = mu_t.data()[i];
        const double mr = mu_ref.data()[i];
        if (flat[i]) {
            // Zero variance and zero covariance: the exact limit of the ratio.
            coefs.a.data()[i] = 0.0;
            coefs.b.data()[i] = mr;
            continue;
        }
        const double var = std::max(mean_sq.data()[i] - mt * mt, 0.0);
        const double a = (mean_cross.data()[i] - mt * mr) / (var + eps);
        coefs.a.data()[i] = a;
        coefs.b.data()[i] = mr - a * mt;
    }
    return coefs;
}

ImageBuffer guided_filter_apply(const ImageBuffer& guide, const GuidedCoefficients& coefs,
                                bool coef_smoothing) {
    if (!guide.same_shape(coefs.a) || !guide.same_shape(coefs.b)) {
        fail(ErrorCode::ShapeMismatch, "coefficients do not match the guide shape");
    }
    const ImageBuffer a = coef_smoothing ? imaging::box_mean(coefs.a, coefs.radius) : coefs.a;
    const ImageBuffer b = coef_smoothing ? imaging::box_mean(coefs.b, coefs.radius) : coefs.b;
    ImageBuffer out(guide.height(), guide.width(), guide.channels(), guide.range());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = a.data()[i] * guide.data()[i] + b.data()[i];
    }
    return out;
}

}  // namespace swinhaze::guided

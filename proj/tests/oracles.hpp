#pragma once

// Independent, deliberately naive reference implementations. Nothing here
// calls into the library except for the ImageBuffer container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "swinhaze/image.hpp"

namespace oracle {

using swinhaze::ImageBuffer;

inline ImageBuffer random_image(std::mt19937_64& rng, int h, int w, int c, double lo = 0.0,
                                double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    ImageBuffer img(h, w, c);
    for (double& v : img.data()) v = dist(rng);
    return img;
}

// Reflect-101 by repeated folding.
inline int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

inline ImageBuffer box_mean(const ImageBuffer& img, int r) {
    ImageBuffer out(img.height(), img.width(), img.channels(), img.range());
    const double n = (2.0 * r + 1) * (2.0 * r + 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) {
                double s = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        s += img.at(mirror(y + dy, img.height()), mirror(x + dx, img.width()), c);
                out.at(y, x, c) = s / n;
            }
    return out;
}

// Window statistics computed two-pass per pixel; returns (a, b).
inline std::pair<ImageBuffer, ImageBuffer> guided_coefficients(const ImageBuffer& guide,
                                                               const ImageBuffer& ref, int r,
                                                               double eps) {
    const int h = guide.height(), w = guide.width(), ch = guide.channels();
    ImageBuffer a(h, w, ch), b(h, w, ch);
    const double n = (2.0 * r + 1) * (2.0 * r + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                std::vector<double> gi, pi;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        gi.push_back(guide.at(mirror(y + dy, h), mirror(x + dx, w), c));
                        pi.push_back(ref.at(mirror(y + dy, h), mirror(x + dx, w), c));
                    }
                double mg = 0, mp = 0;
                for (std::size_t k = 0; k < gi.size(); ++k) mg += gi[k], mp += pi[k];
                mg /= n;
                mp /= n;
                double var = 0, cov = 0;
                for (std::size_t k = 0; k < gi.size(); ++k) {
                    var += (gi[k] - mg) * (gi[k] - mg);
                    cov += (gi[k] - mg) * (pi[k] - mp);
                }
                var /= n;
                cov /= n;
                a.at(y, x, c) = cov / (var + eps);
                b.at(y, x, c) = mp - a.at(y, x, c) * mg;
            }
    return {a, b};
}

inline ImageBuffer guided_filter(const ImageBuffer& guide, const ImageBuffer& ref, int r, double eps,
                                 bool smooth = false) {
    auto [a, b] = guided_coefficients(guide, ref, r, eps);
    if (smooth) {
        a = box_mean(a, r);
        b = box_mean(b, r);
    }
    ImageBuffer out(guide.height(), guide.width(), guide.channels());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * guide.data()[i] + b.data()[i];
    return out;
}

inline double guided_loss(const ImageBuffer& pred, const ImageBuffer& gt, int r, double eps) {
    const ImageBuffer g = guided_filter(gt, gt, r, eps);
    const ImageBuffer p = guided_filter(pred, gt, r, eps);
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += std::abs(g.data()[i] - p.data()[i]);
    return s / static_cast<double>(g.size());
}

// ---- watershed -------------------------------------------------------------

inline const int kDy[4] = {-1, 0, 0, 1};
inline const int kDx[4] = {0, -1, 1, 0};

// Plateaus found by repeated 4-connected flood; a plateau is a minimum when no
// member touches a strictly lower value. Numbered in raster order of first pixel.
inline std::vector<int> minima(const std::vector<double>& v, int h, int w) {
    std::vector<int> plateau(v.size(), -1);
    std::vector<int> out(v.size(), 0);
    int next = 1;
    for (int start = 0; start < h * w; ++start) {
        if (plateau[start] != -1) continue;
        std::vector<int> members{start};
        plateau[start] = start;
        bool is_min = true;
        for (std::size_t k = 0; k < members.size(); ++k) {
            const int p = members[k];
            const int y = p / w, x = p % w;
            for (int d = 0; d < 4; ++d) {
                const int ny = y + kDy[d], nx = x + kDx[d];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const int q = ny * w + nx;
                if (v[q] < v[p]) is_min = false;
                if (v[q] == v[p] && plateau[q] == -1) {
                    plateau[q] = start;
                    members.push_back(q);
                }
            }
        }
        if (is_min) {
            for (int p : members) out[p] = next;
            ++next;
        }
    }
    return out;
}

// Sequential global-minimum flooding: every step scans the whole frontier and
// commits the lexicographically smallest (cost, pixel, label).
inline std::vector<int> flood(const std::vector<double>& v, int h, int w, std::vector<int> labels) {
    for (;;) {
        bool found = false;
        std::tuple<double, int, int> best{};
        for (int p = 0; p < h * w; ++p) {
            if (labels[p] != 0) continue;
            const int y = p / w, x = p % w;
            for (int d = 0; d < 4; ++d) {
                const int ny = y + kDy[d], nx = x + kDx[d];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const int q = ny * w + nx;
                if (labels[q] == 0) continue;
                const std::tuple<double, int, int> cand{std::abs(v[p] - v[q]), p, labels[q]};
                if (!found || cand < best) best = cand;
                found = true;
            }
        }
        if (!found) return labels;
        labels[std::get<1>(best)] = std::get<2>(best);
    }
}

// ---- metrics ---------------------------------------------------------------

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double mse = 0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(a.data()[i] - b.data()[i], 2);
    mse /= static_cast<double>(a.size());
    return mse == 0 ? 100.0 : std::min(100.0, 10 * std::log10(1.0 / mse));
}

// Moments from E[x^2] - E[x]^2 with the 2-D window built as an outer product of
// normalized 1-D Gaussians.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    const int k = 11, r = 5;
    std::vector<double> g(k);
    double s = 0;
    for (int i = 0; i < k; ++i) s += g[i] = std::exp(-(i - r) * (i - r) / (2 * 1.5 * 1.5));
    for (double& v : g) v /= s;
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0;
        int count = 0;
        for (int y = 0; y + k <= a.height(); ++y)
            for (int x = 0; x + k <= a.width(); ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const double wt = g[i] * g[j];
                        const double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
                        ma += wt * va, mb += wt * vb;
                        aa += wt * va * va, bb += wt * vb * vb, ab += wt * va * vb;
                    }
                const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
                acc += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / a.channels();
}

// Product form: correlation * luminance * contrast, unbiased moments.
inline double uqi(const ImageBuffer& a, const ImageBuffer& b) {
    const int k = 8;
    const double n = k * k;
    double total = 0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0;
        int count = 0;
        for (int y = 0; y + k <= a.height(); ++y)
            for (int x = 0; x + k <= a.width(); ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
                        sa += va, sb += vb, saa += va * va, sbb += vb * vb, sab += va * vb;
                    }
                const double ma = sa / n, mb = sb / n;
                const double va = (saa - n * ma * ma) / (n - 1), vb = (sbb - n * mb * mb) / (n - 1);
                const double cab = (sab - n * ma * mb) / (n - 1);
                const double da = std::sqrt(va), db = std::sqrt(vb);
                acc += (cab / (da * db)) * (2 * ma * mb / (ma * ma + mb * mb)) * (2 * da * db / (va + vb));
                ++count;
            }
        total += acc / count;
    }
    return total / a.channels();
}

// ---- resampling ------------------------------------------------------------

inline ImageBuffer resize_bilinear(const ImageBuffer& img, int oh, int ow) {
    ImageBuffer out(oh, ow, img.channels(), img.range());
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const double sy = std::clamp((y + 0.5) * img.height() / oh - 0.5, 0.0, img.height() - 1.0);
            const double sx = std::clamp((x + 0.5) * img.width() / ow - 0.5, 0.0, img.width() - 1.0);
            const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            const int y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
            const double fy = sy - y0, fx = sx - x0;
            for (int c = 0; c < img.channels(); ++c) {
                out.at(y, x, c) = (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
                                  fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
            }
        }
    return out;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = std::filesystem::temp_directory_path() / ("swinhaze_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace oracle

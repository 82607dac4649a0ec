#include "swinhaze/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "swinhaze/error.hpp"

namespace swinhaze::metrics {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);
constexpr int kUqiWindow = 8;

void require_pair(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, "metric inputs differ in shape");
}

std::array<double, kSsimWindow * kSsimWindow> ssim_weights() {
    std::array<double, kSsimWindow * kSsimWindow> w{};
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double v = std::exp(-(x * x + y * y) / (2.0 * kSsimSigma * kSsimSigma));
            w[(y + r) * kSsimWindow + (x + r)] = v;
            sum += v;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require_pair(a, b);
    const ImageBuffer ua = to_unit_range(a);
    const ImageBuffer ub = to_unit_range(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < ua.size(); ++i) {
        const double d = ua.data()[i] - ub.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ua.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_pair(a, b);
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
        fail(ErrorCode::TooSmall, "SSIM needs images of at least 11x11");
    }
    const ImageBuffer ua = to_unit_range(a);
    const ImageBuffer ub = to_unit_range(b);
    static const auto weights = ssim_weights();
    const int out_h = a.height() - kSsimWindow + 1;
    const int out_w = a.width() - kSsimWindow + 1;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double channel_sum = 0.0;
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                double mu_a = 0.0;
                double mu_b = 0.0;
                for (int dy = 0; dy < kSsimWindow; ++dy) {
                    for (int dx = 0; dx < kSsimWindow; ++dx) {
                        const double w = weights[dy * kSsimWindow + dx];
                        mu_a += w * ua.at(y + dy, x + dx, c);
                        mu_b += w * ub.at(y + dy, x + dx, c);
                    }
                }
                double var_a = 0.0;
                double var_b = 0.0;
                double cov = 0.0;
                for (int dy = 0; dy < kSsimWindow; ++dy) {
                    for (int dx = 0; dx < kSsimWindow; ++dx) {
                        const double w = weights[dy * kSsimWindow + dx];
                        const double da = ua.at(y + dy, x + dx, c) - mu_a;
                        const double db = ub.at(y + dy, x + dx, c) - mu_b;
                        var_a += w * da * da;
                        var_b += w * db * db;
                        cov += w * da * db;
                    }
                }
                channel_sum += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
            }
        }
        total += channel_sum / (static_cast<double>(out_h) * out_w);
    }
    return total / a.channels();
}

double uqi(const ImageBuffer& a, const ImageBuffer& b) {
    require_pair(a, b);
    if (a.height() < kUqiWindow || a.width() < kUqiWindow) {
        fail(ErrorCode::TooSmall, "UQI needs images of at least 8x8");
    }
    const int out_h = a.height() - kUqiWindow + 1;
    const int out_w = a.width() - kUqiWindow + 1;
    constexpr double n = kUqiWindow * kUqiWindow;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double channel_sum = 0.0;
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                double mean_a = 0.0;
                double mean_b = 0.0;
                for (int dy = 0; dy < kUqiWindow; ++dy) {
                    for (int dx = 0; dx < kUqiWindow; ++dx) {
                        mean_a += a.at(y + dy, x + dx, c);
                        mean_b += b.at(y + dy, x + dx, c);
                    }
                }
                mean_a /= n;
                mean_b /= n;
                double var_a = 0.0;
                double var_b = 0.0;
                double cov = 0.0;
                for (int dy = 0; dy < kUqiWindow; ++dy) {
                    for (int dx = 0; dx < kUqiWindow; ++dx) {
                        const double da = a.at(y + dy, x + dx, c) - mean_a;
                        const double db = b.at(y + dy, x + dx, c) - mean_b;
                        var_a += da * da;
                        var_b += db * db;
                        cov += da * db;
                    }
                }
                var_a /= n - 1.0;
                var_b /= n - 1.0;
                cov /= n - 1.0;
                const double spread = var_a + var_b;
                const double level = mean_a * mean_a + mean_b * mean_b;
                double q = 1.0;
                if (spread != 0.0 && level != 0.0) {
                    q = 4.0 * cov * mean_a * mean_b / (spread * level);
                } else if (spread == 0.0 && level != 0.0) {
                    q = 2.0 * mean_a * mean_b / level;
                } else if (spread != 0.0) {
                    q = 2.0 * cov / spread;
                }
                channel_sum += q;
            }
        }
        total += channel_sum / (static_cast<double>(out_h) * out_w);
    }
    return total / a.channels();
}

MetricReport evaluate_pair(const ImageBuffer& output, const ImageBuffer& reference) {
    const ImageBuffer out = to_unit_range(output);
    const ImageBuffer ref = to_unit_range(reference);
    return {psnr(out, ref), ssim(out, ref), uqi(out, ref)};
}

std::string format_psnr(double db) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", db);
    return buf;
}

std::string format_index(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

}  // namespace swinhaze::metrics

#pragma once

#include <string>

#include "swinhaze/image.hpp"

namespace swinhaze::metrics {

inline constexpr double kPsnrCap = 100.0;

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double uqi = 0.0;
};

// 10 log10(1 / MSE) over all samples of unit-range images; identical images give kPsnrCap.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1) averaged over all
// fully contained window positions and over channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

// Wang-Bovik universal quality index over all 8x8 sliding windows, averaged over
// windows and channels.
double uqi(const ImageBuffer& a, const ImageBuffer& b);

MetricReport evaluate_pair(const ImageBuffer& output, const ImageBuffer& reference);

// Two decimals for dB, three for the unitless indices.
std::string format_psnr(double db);
std::string format_index(double value);

}  // namespace swinhaze::metrics

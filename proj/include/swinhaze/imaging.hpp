#pragma once

#include <filesystem>
#include <vector>

#include "swinhaze/image.hpp"

namespace swinhaze::imaging {

// 8-bit grayscale or RGB PNG without alpha. Samples are byte / 255, unit range.
ImageBuffer load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG. Signed images are mapped to unit first; bytes are
// round-half-up of x * 255 clamped to [0, 255].
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

// Writes {0, 255} grayscale.
void save_edge_map(const EdgeMap& edges, const std::filesystem::path& path);

std::uint8_t quantize(double unit_value);

// BT.601 luma.
ImageBuffer to_grayscale(const ImageBuffer& img);

// Mirror index without edge duplication (… 2 1 | 0 1 2 … n-1 | n-2 …).
int reflect_index(int i, int n) noexcept;

// Normalized 1-D Gaussian taps of length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

// Separable correlation with a centered odd-length kernel along both axes,
// reflect padding, applied per channel.
ImageBuffer separable_filter(const ImageBuffer& img, const std::vector<double>& taps);
// Exact adjoint (transpose) of separable_filter for the same shape.
ImageBuffer separable_filter_adjoint(const ImageBuffer& img, const std::vector<double>& taps);

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);
ImageBuffer gaussian_blur_adjoint(const ImageBuffer& img, double sigma);

// Mean over the (2r + 1)^2 window, reflect padding.
ImageBuffer box_mean(const ImageBuffer& img, int radius);
ImageBuffer box_mean_adjoint(const ImageBuffer& img, int radius);

// Pixel-center bilinear resampling: src = (dst + 0.5) * in / out - 0.5, clamped.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_height, int out_width);

struct CannyOptions {
    double low = 100.0;   // on the 0..255 gradient-magnitude scale
    double high = 200.0;
    double sigma = 1.4;
};

// Gaussian pre-smooth, Sobel, non-maximum suppression, double threshold and
// 8-connected hysteresis. Three-channel input goes through to_grayscale first.
EdgeMap canny_edges(const ImageBuffer& img, const CannyOptions& options = {});

}  // namespace swinhaze::imaging

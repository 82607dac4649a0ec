#pragma once

#include "swinhaze/image.hpp"

namespace swinhaze::guided {

// Per-pixel linear model out = a * guide + b fitted to local window statistics.
struct GuidedCoefficients {
    ImageBuffer a;
    ImageBuffer b;
    int radius = 0;
    double eps = 0.0;
};

// Default radius at a given resolution: max(1, round(4 * height / 256)).
int default_radius(int height);

// With mu_t = box(guide), mu_ref = box(reference), cross = box(guide * reference),
// var = max(box(guide^2) - mu_t^2, 0):
//   a = (cross - mu_t * mu_ref) / (var + eps),  b = mu_ref - a * mu_t.
// Three-channel inputs are handled per channel.
GuidedCoefficients guided_coefficients(const ImageBuffer& guide, const ImageBuffer& reference,
                                       int radius, double eps);

// out = a * guide + b. With coef_smoothing, a and b are box-averaged first.
ImageBuffer guided_filter_apply(const ImageBuffer& guide, const GuidedCoefficients& coefs,
                                bool coef_smoothing = false);

inline ImageBuffer guided_filter(const ImageBuffer& guide, const ImageBuffer& reference,
                                 int radius, double eps, bool coef_smoothing = false) {
    return guided_filter_apply(guide, guided_coefficients(guide, reference, radius, eps),
                               coef_smoothing);
}

}  // namespace swinhaze::guided

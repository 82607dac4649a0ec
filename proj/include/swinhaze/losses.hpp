#pragma once

#include <vector>

#include "swinhaze/image.hpp"
#include "swinhaze/watershed.hpp"

namespace swinhaze::losses {

// dL/dpred, one value per sample of the prediction.
struct GradientField {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    static GradientField zeros_like(const ImageBuffer& img);
    GradientField& axpy(double scale, const GradientField& other);
};

struct LossTerm {
    double value = 0.0;
    GradientField grad;
};

struct LossWeights {
    double l2 = 5.0;
    double guided = 1.0;
    double water = 0.5;
};

enum class WaterGrad { None, StraightThrough };
enum class WaterMetric { L1, L2 };

struct LossConfig {
    LossWeights weights;
    int guided_radius = 0;  // 0 selects guided::default_radius(height)
    double guided_eps = 1e-4;
    bool coef_smoothing = false;
    watershed::WatershedConfig water;
    WaterGrad water_grad = WaterGrad::None;
    WaterMetric water_metric = WaterMetric::L2;
};

struct LossReport {
    double l2 = 0.0;
    double guided = 0.0;
    double water = 0.0;
    double total = 0.0;
    LossWeights weights;
};

struct TotalLoss {
    LossReport report;
    GradientField grad;
};

// Mean squared error over all samples; grad = 2 (pred - gt) / N.
LossTerm l2_loss(const ImageBuffer& pred, const ImageBuffer& gt);

// Mean |G(gt; gt) - G(pred; gt)| where G(t; gt) = a(t) * t + b(t) is the guided
// filter with guide t and statistics target gt. The gradient is exact except at
// samples whose residual is exactly zero (subgradient 0 there).
LossTerm guided_loss(const ImageBuffer& pred, const ImageBuffer& gt, int radius, double eps,
                     bool coef_smoothing = false);

// Mean squared (or absolute) difference of the normalized watershed maps. The
// label map is piecewise constant, so the default gradient is zero; the
// straight-through mode treats the map as the smoothed intensity.
LossTerm water_loss(const ImageBuffer& pred, const ImageBuffer& gt,
                    const watershed::WatershedConfig& cfg, WaterGrad grad_mode = WaterGrad::None,
                    WaterMetric metric = WaterMetric::L2);

// Weighted sum of the three terms, evaluated in unit range. The gradient is with
// respect to `pred` in its own range convention.
TotalLoss total_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossConfig& cfg);

}  // namespace swinhaze::losses

#include "swinhaze/losses.hpp"

#include <cmath>

#include "swinhaze/error.hpp"
#include "swinhaze/guided_filter.hpp"
#include "swinhaze/imaging.hpp"

namespace swinhaze::losses {

namespace {

void require_same_shape(const ImageBuffer& pred, const ImageBuffer& gt) {
    if (!pred.same_shape(gt)) {
        fail(ErrorCode::ShapeMismatch, "prediction and ground truth differ in shape");
    }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

ImageBuffer mul(const ImageBuffer& a, const ImageBuffer& b) {
    ImageBuffer out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

}  // namespace

GradientField GradientField::zeros_like(const ImageBuffer& img) {
    return {img.height(), img.width(), img.channels(), std::vector<double>(img.size(), 0.0)};
}

GradientField& GradientField::axpy(double scale, const GradientField& other) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += scale * other.data[i];
    return *this;
}

LossTerm l2_loss(const ImageBuffer& pred, const ImageBuffer& gt) {
    require_same_shape(pred, gt);
    if (pred.range() != gt.range()) {
        fail(ErrorCode::InvalidParameter, "l2_loss inputs use different range conventions");
    }
    const double n = static_cast<double>(pred.size());
    LossTerm term{0.0, GradientField::zeros_like(pred)};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - gt.data()[i];
        term.value += d * d;
        term.grad.data[i] = 2.0 * d / n;
    }
    term.value /= n;
    return term;
}

LossTerm guided_loss(const ImageBuffer& pred, const ImageBuffer& gt, int radius, double eps,
                     bool coef_smoothing) {
    require_same_shape(pred, gt);
    const ImageBuffer out_gt = guided::guided_filter(gt, gt, radius, eps, coef_smoothing);
    const guided::GuidedCoefficients coefs = guided::guided_coefficients(pred, gt, radius, eps);
    const ImageBuffer out_pred = guided::guided_filter_apply(pred, coefs, coef_smoothing);

    const std::size_t n = pred.size();
    LossTerm term{0.0, GradientField::zeros_like(pred)};
    ImageBuffer upstream(pred.height(), pred.width(), pred.channels());
    for (std::size_t i = 0; i < n; ++i) {
        const double r = out_gt.data()[i] - out_pred.data()[i];
        term.value += std::abs(r);
        upstream.data()[i] = -sign(r) / static_cast<double>(n);
    }
    term.value /= static_cast<double>(n);

    // Backward through out = a * p + b (optionally with box-averaged a and b).
    ImageBuffer d_pred(pred.height(), pred.width(), pred.channels());
    ImageBuffer d_a;
    ImageBuffer d_b;
    if (coef_smoothing) {
        const ImageBuffer a_bar = imaging::box_mean(coefs.a, radius);
        d_pred = mul(upstream, a_bar);
        d_a = imaging::box_mean_adjoint(mul(upstream, pred), radius);
        d_b = imaging::box_mean_adjoint(upstream, radius);
    } else {
        d_pred = mul(upstream, coefs.a);
        d_a = mul(upstream, pred);
        d_b = upstream;
    }

    ImageBuffer pred_sq = pred;
    for (double& v : pred_sq.data()) v *= v;
    const ImageBuffer mu_p = imaging::box_mean(pred, radius);
    const ImageBuffer mu_g = imaging::box_mean(gt, radius);
    const ImageBuffer mean_sq = imaging::box_mean(pred_sq, radius);

    ImageBuffer d_mu_p(pred.height(), pred.width(), pred.channels());
    ImageBuffer d_cross(pred.height(), pred.width(), pred.channels());
    ImageBuffer d_mean_sq(pred.height(), pred.width(), pred.channels());
    for (std::size_t i = 0; i < n; ++i) {
        const double a = coefs.a.data()[i];
        const double mp = mu_p.data()[i];
        const double mg = mu_g.data()[i];
        const double raw_var = mean_sq.data()[i] - mp * mp;
        const double v = std::max(raw_var, 0.0) + eps;
        // b = mu_g - a * mu_p
        double da = d_a.data()[i] - d_b.data()[i] * mp;
        double dmp = -d_b.data()[i] * a;
        // a = (cross - mu_p * mu_g) / v
        d_cross.data()[i] = da / v;
        dmp -= da * mg / v;
        const double dv = -da * a / v;
        if (raw_var > 0.0) {
            d_mean_sq.data()[i] = dv;
            dmp -= 2.0 * mp * dv;
        }
        d_mu_p.data()[i] = dmp;
    }
    const ImageBuffer back_cross = imaging::box_mean_adjoint(d_cross, radius);
    const ImageBuffer back_sq = imaging::box_mean_adjoint(d_mean_sq, radius);
    const ImageBuffer back_mu = imaging::box_mean_adjoint(d_mu_p, radius);
    for (std::size_t i = 0; i < n; ++i) {
        term.grad.data[i] = d_pred.data()[i] + gt.data()[i] * back_cross.data()[i] +
                            2.0 * pred.data()[i] * back_sq.data()[i] + back_mu.data()[i];
    }
    return term;
}

LossTerm water_loss(const ImageBuffer& pred, const ImageBuffer& gt,
                    const watershed::WatershedConfig& cfg, WaterGrad grad_mode,
                    WaterMetric metric) {
    require_same_shape(pred, gt);
    const watershed::NormalizedMap map_pred = watershed::watershed_map(pred, cfg);
    const watershed::NormalizedMap map_gt = watershed::watershed_map(gt, cfg);
    const std::size_t n = map_pred.values.size();

    LossTerm term{0.0, GradientField::zeros_like(pred)};
    ImageBuffer d_map(pred.height(), pred.width(), 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = map_pred.values[i] - map_gt.values[i];
        if (metric == WaterMetric::L2) {
            term.value += d * d;
            d_map.data()[i] = 2.0 * d / static_cast<double>(n);
        } else {
            term.value += std::abs(d);
            d_map.data()[i] = sign(d) / static_cast<double>(n);
        }
    }
    term.value /= static_cast<double>(n);

    if (grad_mode == WaterGrad::StraightThrough) {
        const ImageBuffer d_gray = imaging::gaussian_blur_adjoint(d_map, cfg.sigma);
        const double range_scale = pred.range() == RangeTag::Signed ? 0.5 : 1.0;
        constexpr double kLuma[3] = {0.299, 0.587, 0.114};
        const int c = pred.channels();
        for (std::size_t p = 0; p < n; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                const double w = c == 3 ? kLuma[ch] : 1.0;
                term.grad.data[p * c + ch] = range_scale * w * d_gray.data()[p];
            }
        }
    }
    return term;
}

TotalLoss total_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossConfig& cfg) {
    require_same_shape(pred, gt);
    const LossWeights& w = cfg.weights;
    if (w.l2 < 0.0 || w.guided < 0.0 || w.water < 0.0) {
        fail(ErrorCode::InvalidParameter, "loss weights must be non-negative");
    }
    const ImageBuffer p = to_unit_range(pred);
    const ImageBuffer g = to_unit_range(gt);
    const int radius = cfg.guided_radius > 0 ? cfg.guided_radius : guided::default_radius(p.height());

    const LossTerm l2 = l2_loss(p, g);
    const LossTerm gd = guided_loss(p, g, radius, cfg.guided_eps, cfg.coef_smoothing);
    const LossTerm wt = water_loss(p, g, cfg.water, cfg.water_grad, cfg.water_metric);

    TotalLoss result;
    result.report = {l2.value, gd.value, wt.value,
                     w.l2 * l2.value + w.guided * gd.value + w.water * wt.value, w};
    result.grad = GradientField::zeros_like(pred);
    const double range_scale = pred.range() == RangeTag::Signed ? 0.5 : 1.0;
    result.grad.axpy(range_scale * w.l2, l2.grad)
        .axpy(range_scale * w.guided, gd.grad)
        .axpy(range_scale * w.water, wt.grad);
    return result;
}

}  // namespace swinhaze::losses

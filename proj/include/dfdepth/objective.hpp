#pragma once

#include <span>
#include <string>

#include "dfdepth/decoder.hpp"
#include "dfdepth/tensor.hpp"

namespace dfdepth {

/// Composite-loss configuration. C1/C2 default to the standard SSIM
/// stabilizers (0.01*L)^2 and (0.03*L)^2 for dynamic range L.
struct LossConfig {
    double alpha = 0.8;
    double dynamic_range = 1.0;  // L
    double c1 = 1e-4;
    double c2 = 9e-4;

    static LossConfig with_alpha(double alpha, double dynamic_range = 1.0);
    void validate() const;
};

// Mean of squared differences over all elements. Differentiable.
Tensor mse(const Tensor& pred, const Tensor& target);

// Global-statistics structural similarity: one mean/variance/covariance per
// image, value in [-1,1]. Differentiable.
Tensor ssim(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

// (1-alpha)*MSE + alpha*(1-SSIM). Differentiable.
Tensor composite_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

inline Tensor mse(const DepthMap& pred, const DepthMap& target) { return mse(pred.values, target.values); }
inline Tensor ssim(const DepthMap& pred, const DepthMap& target, const LossConfig& cfg) {
    return ssim(pred.values, target.values, cfg);
}
inline Tensor composite_loss(const DepthMap& pred, const DepthMap& target, const LossConfig& cfg) {
    return composite_loss(pred.values, target.values, cfg);
}

/// The four depth-benchmark error metrics over valid pixels.
struct MetricsReport {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double rmse_log = 0.0;
    std::size_t n_valid = 0;

    static const char* csv_header();  // alpha,rmse,abs_rel,sq_rel,rmse_log
    std::string csv_row(double alpha) const;
};

// Metrics over metric-depth pixel pairs (meters); valid where target > min_valid.
MetricsReport depth_metrics_pixels(std::span<const double> pred_m, std::span<const double> target_m,
                                   double min_valid);

// Converts normalized maps to metric depth via depth_scale, then evaluates.
MetricsReport depth_metrics(const DepthMap& pred, const DepthMap& target, double min_valid);

}  // namespace dfdepth

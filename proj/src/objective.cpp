#include "dfdepth/objective.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dfdepth/ops.hpp"

namespace dfdepth {

LossConfig LossConfig::with_alpha(double alpha, double dynamic_range) {
    LossConfig cfg;
    cfg.alpha = alpha;
    cfg.dynamic_range = dynamic_range;
    cfg.c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    cfg.c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    cfg.validate();
    return cfg;
}

void LossConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("loss: alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (!(c1 > 0.0 && c2 > 0.0)) throw std::invalid_argument("loss: C1 and C2 must be positive");
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    }
    Tensor diff = sub(pred, target);
    return mean(mul(diff, diff));
}

Tensor ssim(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("ssim: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    }
    if (pred.size() < 2) throw std::invalid_argument("ssim: needs at least 2 pixels");
    cfg.validate();

    Tensor mu_p = mean(pred);
    Tensor mu_t = mean(target);
    Tensor var_p = sub(mean(mul(pred, pred)), mul(mu_p, mu_p));
    Tensor var_t = sub(mean(mul(target, target)), mul(mu_t, mu_t));
    Tensor cov = sub(mean(mul(pred, target)), mul(mu_p, mu_t));

    Tensor num = mul(add_scalar(scale(mul(mu_p, mu_t), 2.0), cfg.c1),
                     add_scalar(scale(cov, 2.0), cfg.c2));
    Tensor den = mul(add_scalar(add(mul(mu_p, mu_p), mul(mu_t, mu_t)), cfg.c1),
                     add_scalar(add(var_p, var_t), cfg.c2));
    return divide(num, den);
}

Tensor composite_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
    cfg.validate();
    Tensor pixel_term = mse(pred, target);
    Tensor structure_term = add_scalar(scale(ssim(pred, target, cfg), -1.0), 1.0);  // 1 - SSIM
    return add(scale(pixel_term, 1.0 - cfg.alpha), scale(structure_term, cfg.alpha));
}

const char* MetricsReport::csv_header() { return "alpha,rmse,abs_rel,sq_rel,rmse_log"; }

std::string MetricsReport::csv_row(double alpha) const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f", alpha, rmse, abs_rel, sq_rel, rmse_log);
    return buf;
}

MetricsReport depth_metrics_pixels(std::span<const double> pred_m, std::span<const double> target_m,
                                   double min_valid) {
    if (pred_m.size() != target_m.size()) {
        throw std::invalid_argument("depth_metrics: pixel counts differ");
    }
    // Keeps the log finite even when min_valid is 0 on synthetic data.
    const double log_floor = std::max(min_valid, 1e-300);
    MetricsReport r;
    double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
    for (std::size_t i = 0; i < pred_m.size(); ++i) {
        const double d = target_m[i];
        if (!(d > min_valid)) continue;
        const double dh = pred_m[i];
        const double err = dh - d;
        abs_rel += std::abs(err) / d;
        sq_rel += err * err / d;
        sq += err * err;
        const double le = std::log(std::max(dh, log_floor)) - std::log(d);
        sq_log += le * le;
        ++r.n_valid;
    }
    if (r.n_valid == 0) throw std::invalid_argument("depth_metrics: no valid pixels (target > min_valid)");
    const double n = static_cast<double>(r.n_valid);
    r.abs_rel = abs_rel / n;
    r.sq_rel = sq_rel / n;
    r.rmse = std::sqrt(sq / n);
    r.rmse_log = std::sqrt(sq_log / n);
    return r;
}

MetricsReport depth_metrics(const DepthMap& pred, const DepthMap& target, double min_valid) {
    if (pred.values.shape() != target.values.shape()) {
        throw std::invalid_argument("depth_metrics: shape mismatch " + shape_str(pred.values.shape()) +
                                    " vs " + shape_str(target.values.shape()));
    }
    if (pred.depth_scale != target.depth_scale) {
        throw std::invalid_argument("depth_metrics: depth scales differ");
    }
    std::vector<double> p(pred.values.size()), t(target.values.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = pred.values.data()[i] * pred.depth_scale;
        t[i] = target.values.data()[i] * target.depth_scale;
    }
    return depth_metrics_pixels(p, t, min_valid);
}

}  // namespace dfdepth

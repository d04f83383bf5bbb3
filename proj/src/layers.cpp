#include "dfdepth/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "dfdepth/feature.hpp"

namespace dfdepth {

Tensor kaiming_uniform(Shape shape, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw std::invalid_argument("kaiming_uniform: fan_in must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> data(numel(shape));
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
}

const char* tag_name(FeatureTag tag) {
    switch (tag) {
        case FeatureTag::spatial: return "spatial";
        case FeatureTag::frequency: return "frequency";
        case FeatureTag::fused: return "fused";
    }
    return "?";
}

BatchNormLayer::BatchNormLayer(int channels, double eps_)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(static_cast<std::size_t>(channels), 0.0),
      running_var(static_cast<std::size_t>(channels), 1.0),
      eps(eps_) {}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
    if (training) {
        std::vector<double> mu, var;
        Tensor y = batch_norm_train(x, gamma, beta, eps, &mu, &var);
        for (std::size_t c = 0; c < running_mean.size(); ++c) {
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu[c];
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var[c];
        }
        return y;
    }
    return batch_norm_eval(x, gamma, beta, running_mean, running_var, eps);
}

}  // namespace dfdepth

#pragma once

#include <vector>

#include "dfdepth/ops.hpp"
#include "dfdepth/rng.hpp"
#include "dfdepth/tensor.hpp"

namespace dfdepth {

// Kaiming-uniform leaf parameter: U(-b, b) with b = sqrt(6 / fan_in).
Tensor kaiming_uniform(Shape shape, int fan_in, Rng& rng);

/// Batch normalization with learned affine and running statistics
/// (momentum 0.1). Training mode normalizes with batch statistics and
/// updates the running buffers; eval mode applies the stored ones.
struct BatchNormLayer {
    Tensor gamma, beta;
    std::vector<double> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    BatchNormLayer() = default;
    explicit BatchNormLayer(int channels, double eps_ = 1e-5);

    Tensor forward(const Tensor& x, bool training);
};

}  // namespace dfdepth

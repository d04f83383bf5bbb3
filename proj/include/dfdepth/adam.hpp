#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfdepth/tensor.hpp"

namespace dfdepth {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter, in parameter order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t t = 0;

    void init_like(const std::vector<std::pair<std::string, Tensor>>& params);
    bool empty() const { return m.empty(); }
};

// One bias-corrected Adam update (step index t >= 1) over the parameter
// gradients; mutates parameter data and the state in place.
void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               const AdamConfig& cfg, std::int64_t t);

}  // namespace dfdepth

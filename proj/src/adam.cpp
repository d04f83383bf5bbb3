#include "dfdepth/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dfdepth {

void AdamState::init_like(const std::vector<std::pair<std::string, Tensor>>& params) {
    m.clear();
    v.clear();
    for (const auto& [name, p] : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
    t = 0;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               const AdamConfig& cfg, std::int64_t t) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: state size does not match parameter count");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k].second;
        auto g = p.grad();
        auto& mk = state.m[k];
        auto& vk = state.v[k];
        if (mk.size() != p.size() || vk.size() != p.size()) {
            throw std::invalid_argument("adam_step: moment shape mismatch for " + params[k].first);
        }
        auto data = p.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            mk[i] = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * g[i];
            vk[i] = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mk[i] / bc1;
            const double vhat = vk[i] / bc2;
            data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        if (current_precision() == Precision::f32) {
            for (double& x : data) x = static_cast<double>(static_cast<float>(x));
        }
    }
    state.t = t;
}

}  // namespace dfdepth

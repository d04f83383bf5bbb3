#include "dfdepth/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dfdepth/ops.hpp"

namespace dfdepth {

namespace {

void check_fusable(const FeatureMatrix& f_freq, const FeatureMatrix& f_orig) {
    if (f_freq.values.shape() != f_orig.values.shape()) {
        throw std::invalid_argument("fuse: feature shapes differ, " + shape_str(f_freq.values.shape()) +
                                    " vs " + shape_str(f_orig.values.shape()));
    }
    if (f_freq.tag != FeatureTag::frequency || f_orig.tag != FeatureTag::spatial) {
        throw std::invalid_argument(std::string("fuse: expected frequency+spatial inputs, got ") +
                                    tag_name(f_freq.tag) + "+" + tag_name(f_orig.tag));
    }
}

// [C,h,w] -> [N,C] with tokens = spatial positions in row-major order.
Tensor to_tokens(const FeatureMatrix& f) {
    return transpose2d(reshape(f.values, {f.channels(), f.height() * f.width()}));
}

}  // namespace

Tensor fusion_weights(const FeatureMatrix& f_freq, const FeatureMatrix& f_orig, bool scale_similarity) {
    check_fusable(f_freq, f_orig);
    Tensor sim = matmul(to_tokens(f_freq), transpose2d(to_tokens(f_orig)));
    if (scale_similarity) sim = scale(sim, 1.0 / std::sqrt(static_cast<double>(f_freq.channels())));
    return softmax(sim, 1);
}

FeatureMatrix fuse(const FeatureMatrix& f_freq, const FeatureMatrix& f_orig, bool scale_similarity) {
    Tensor weights = fusion_weights(f_freq, f_orig, scale_similarity);
    Tensor fused_tokens = matmul(weights, to_tokens(f_orig));  // [N,C]
    Tensor values = reshape(transpose2d(fused_tokens), f_orig.values.shape());
    return FeatureMatrix{values, FeatureTag::fused};
}

}  // namespace dfdepth

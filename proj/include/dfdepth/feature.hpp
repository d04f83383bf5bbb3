#pragma once

#include "dfdepth/tensor.hpp"

namespace dfdepth {

enum class FeatureTag { spatial, frequency, fused };

const char* tag_name(FeatureTag tag);

/// Channel x height x width activation map with branch provenance.
struct FeatureMatrix {
    Tensor values;  // [C,h,w]
    FeatureTag tag = FeatureTag::spatial;

    int channels() const { return values.dim(0); }
    int height() const { return values.dim(1); }
    int width() const { return values.dim(2); }
};

}  // namespace dfdepth

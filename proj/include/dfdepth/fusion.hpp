#pragma once

#include "dfdepth/feature.hpp"

namespace dfdepth {

// Attention weights between the two branches: rows of
// softmax(F_freq . F_orig^T) over spatial tokens (N = h*w, features = C).
// The similarity product is unscaled by default; scale_similarity divides
// by sqrt(C).
Tensor fusion_weights(const FeatureMatrix& f_freq, const FeatureMatrix& f_orig,
                      bool scale_similarity = false);

// F_fused = A . F_orig, reshaped back to [C,h,w] and tagged fused.
FeatureMatrix fuse(const FeatureMatrix& f_freq, const FeatureMatrix& f_orig,
                   bool scale_similarity = false);

}  // namespace dfdepth

#pragma once

#include <cstdint>
#include <vector>

#include "dfdepth/feature.hpp"
#include "dfdepth/layers.hpp"

namespace dfdepth {

/// Normalized depth prediction: values in [0,1], with the metric depth that
/// 1.0 represents.
struct DepthMap {
    Tensor values;  // [1,H,W]
    double depth_scale = 10.0;

    int height() const { return values.dim(1); }
    int width() const { return values.dim(2); }
};

/// transpose_conv(2x2, stride 2) -> BN -> ReLU; doubles the spatial dims.
struct UpsampleBlockParams {
    Tensor tconv;  // [Cin,Cout,2,2]
    BatchNormLayer bn;
    int in_channels = 0;
    int out_channels = 0;

    UpsampleBlockParams() = default;
    UpsampleBlockParams(int c_in, int c_out, Rng& rng, double bn_eps = 1e-5);
};

/// Upsampling decoder: B blocks with channel plan D -> D/2 -> D/4, then a
/// 3x3 refinement conv to one channel and a sigmoid.
struct DecoderParams {
    std::vector<UpsampleBlockParams> blocks;
    Tensor refine;       // [1,C_last,3,3]
    Tensor refine_bias;  // [1]

    DecoderParams() = default;
    DecoderParams(int embed_dim, int num_blocks, Rng& rng, double bn_eps = 1e-5);

    int upsample_factor() const { return 1 << blocks.size(); }
};

Tensor upsample_block(const Tensor& x, UpsampleBlockParams& p, bool training);

// Batched forward: [B,D,h,w] -> [B,1,h*2^B,w*2^B], sigmoid range.
Tensor decode_batch(const Tensor& fused, DecoderParams& p, bool training, int expect_h, int expect_w);

// Single fused feature map -> DepthMap at the recorded input resolution.
DepthMap decode(const FeatureMatrix& fused, DecoderParams& p, double depth_scale, int expect_h,
                int expect_w, bool training = true);

// PNG export convention: round(normalized_depth * 65535).
std::vector<std::uint16_t> depth_to_u16(const DepthMap& depth);

}  // namespace dfdepth

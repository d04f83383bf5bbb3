#pragma once

#include <vector>

#include "dfdepth/feature.hpp"
#include "dfdepth/layers.hpp"

namespace dfdepth {

/// One pre-activation residual downsampling block. The transform path is
/// BN -> ReLU -> conv(3x3, stride 2) -> BN -> ReLU -> conv(3x3, stride 1);
/// the shortcut is a learned 1x1 stride-2 projection. Output is
/// shortcut(x) + F(x).
struct ResidualBlockParams {
    BatchNormLayer bn1, bn2;
    Tensor conv1;     // [Cout,Cin,3,3]
    Tensor conv2;     // [Cout,Cout,3,3]
    Tensor shortcut;  // [Cout,Cin,1,1]
    int in_channels = 0;
    int out_channels = 0;

    ResidualBlockParams() = default;
    ResidualBlockParams(int c_in, int c_out, Rng& rng, double bn_eps = 1e-5);
};

Tensor residual_down_block(const Tensor& x, ResidualBlockParams& p, bool training);

/// Residual downsampling encoder for one branch; blocks follow the channel
/// plan C0 -> D/2 -> D and each halves the spatial dims.
struct EncoderParams {
    std::vector<ResidualBlockParams> blocks;
    FeatureTag branch = FeatureTag::spatial;
    int in_channels = 0;
    int embed_dim = 0;

    EncoderParams() = default;
    EncoderParams(int in_channels, int embed_dim, int num_blocks, FeatureTag branch, Rng& rng,
                  double bn_eps = 1e-5);

    int downsample_factor() const { return 1 << blocks.size(); }
    // Input dims must be divisible by this (downsampling plus the 4x4
    // patch grid applied afterwards).
    int required_divisor() const { return downsample_factor() * 4; }
};

// Batched forward: [B,C0,H,W] -> [B,D,H/2^B,W/2^B].
Tensor encode_batch(const Tensor& x, EncoderParams& p, bool training);

// Single-sample forward: [C0,H,W] -> FeatureMatrix tagged with the branch.
FeatureMatrix encode(const Tensor& x, EncoderParams& p, bool training = true);

}  // namespace dfdepth

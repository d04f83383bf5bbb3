#include "dfdepth/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dfdepth {

UpsampleBlockParams::UpsampleBlockParams(int c_in, int c_out, Rng& rng, double bn_eps)
    : tconv(kaiming_uniform({c_in, c_out, 2, 2}, c_in * 4, rng)),
      bn(c_out, bn_eps),
      in_channels(c_in),
      out_channels(c_out) {}

DecoderParams::DecoderParams(int embed_dim, int num_blocks, Rng& rng, double bn_eps) {
    if (num_blocks < 1) throw std::invalid_argument("decoder: need at least one block");
    if (embed_dim % (1 << num_blocks) != 0) {
        throw std::invalid_argument("decoder: embed_dim must be divisible by 2^blocks");
    }
    int c_in = embed_dim;
    for (int b = 0; b < num_blocks; ++b) {
        const int c_out = c_in / 2;
        blocks.emplace_back(c_in, c_out, rng, bn_eps);
        c_in = c_out;
    }
    refine = kaiming_uniform({1, c_in, 3, 3}, c_in * 9, rng);
    refine_bias = Tensor::zeros({1}, true);
}

Tensor upsample_block(const Tensor& x, UpsampleBlockParams& p, bool training) {
    const int ndim = x.ndim();
    if (ndim != 3 && ndim != 4) {
        throw std::invalid_argument("upsample_block: expected [(B,)C,h,w], got " + shape_str(x.shape()));
    }
    if (x.dim(ndim - 3) != p.in_channels) {
        throw std::invalid_argument("upsample_block: input channels " + std::to_string(x.dim(ndim - 3)) +
                                    " do not match block (" + std::to_string(p.in_channels) + ")");
    }
    Tensor t = transpose_conv2d(x, p.tconv, /*stride=*/2);
    t = p.bn.forward(t, training);
    return relu(t);
}

Tensor decode_batch(const Tensor& fused, DecoderParams& p, bool training, int expect_h, int expect_w) {
    const int ndim = fused.ndim();
    if (ndim != 3 && ndim != 4) {
        throw std::invalid_argument("decode: expected [(B,)D,h,w], got " + shape_str(fused.shape()));
    }
    const int h = fused.dim(ndim - 2), w = fused.dim(ndim - 1);
    const int factor = p.upsample_factor();
    if (h * factor != expect_h || w * factor != expect_w) {
        throw std::invalid_argument("decode: " + shape_str(fused.shape()) + " upsamples to " +
                                    std::to_string(h * factor) + "x" + std::to_string(w * factor) +
                                    ", expected " + std::to_string(expect_h) + "x" + std::to_string(expect_w));
    }
    Tensor t = fused;
    for (auto& block : p.blocks) t = upsample_block(t, block, training);
    t = conv2d(t, p.refine, /*stride=*/1, /*padding=*/1);
    t = add_channel_bias(t, p.refine_bias);
    return sigmoid(t);
}

DepthMap decode(const FeatureMatrix& fused, DecoderParams& p, double depth_scale, int expect_h,
                int expect_w, bool training) {
    if (fused.tag != FeatureTag::fused) {
        throw std::invalid_argument(std::string("decode: expected a fused feature matrix, got tag ") +
                                    tag_name(fused.tag));
    }
    Tensor out = decode_batch(fused.values, p, training, expect_h, expect_w);
    return DepthMap{out, depth_scale};
}

std::vector<std::uint16_t> depth_to_u16(const DepthMap& depth) {
    std::vector<std::uint16_t> out(depth.values.size());
    const auto v = depth.values.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double clamped = std::min(1.0, std::max(0.0, v[i]));
        out[i] = static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
    }
    return out;
}

}  // namespace dfdepth

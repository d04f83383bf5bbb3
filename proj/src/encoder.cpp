#include "dfdepth/encoder.hpp"

#include <stdexcept>
#include <string>

namespace dfdepth {

ResidualBlockParams::ResidualBlockParams(int c_in, int c_out, Rng& rng, double bn_eps)
    : bn1(c_in, bn_eps),
      bn2(c_out, bn_eps),
      conv1(kaiming_uniform({c_out, c_in, 3, 3}, c_in * 9, rng)),
      conv2(kaiming_uniform({c_out, c_out, 3, 3}, c_out * 9, rng)),
      shortcut(kaiming_uniform({c_out, c_in, 1, 1}, c_in, rng)),
      in_channels(c_in),
      out_channels(c_out) {}

Tensor residual_down_block(const Tensor& x, ResidualBlockParams& p, bool training) {
    const int ndim = x.ndim();
    if (ndim != 3 && ndim != 4) {
        throw std::invalid_argument("residual_down_block: expected [(B,)C,H,W], got " + shape_str(x.shape()));
    }
    const int C = x.dim(ndim - 3), H = x.dim(ndim - 2), W = x.dim(ndim - 1);
    if (C != p.in_channels) {
        throw std::invalid_argument("residual_down_block: input channels " + std::to_string(C) +
                                    " do not match block (" + std::to_string(p.in_channels) + ")");
    }
    if (H % 2 != 0 || W % 2 != 0) {
        throw std::invalid_argument("residual_down_block: spatial dims must be even, got " +
                                    shape_str(x.shape()));
    }
    Tensor t = p.bn1.forward(x, training);
    t = relu(t);
    t = conv2d(t, p.conv1, /*stride=*/2, /*padding=*/1);
    t = p.bn2.forward(t, training);
    t = relu(t);
    t = conv2d(t, p.conv2, /*stride=*/1, /*padding=*/1);
    Tensor sc = conv2d(x, p.shortcut, /*stride=*/2, /*padding=*/0);
    return add(sc, t);
}

EncoderParams::EncoderParams(int in_channels_, int embed_dim_, int num_blocks, FeatureTag branch_,
                             Rng& rng, double bn_eps)
    : branch(branch_), in_channels(in_channels_), embed_dim(embed_dim_) {
    if (num_blocks < 1) throw std::invalid_argument("encoder: need at least one block");
    if (embed_dim_ % (1 << (num_blocks - 1)) != 0) {
        throw std::invalid_argument("encoder: embed_dim must be divisible by 2^(blocks-1)");
    }
    int c_in = in_channels_;
    for (int b = 0; b < num_blocks; ++b) {
        const int c_out = embed_dim_ >> (num_blocks - 1 - b);
        blocks.emplace_back(c_in, c_out, rng, bn_eps);
        c_in = c_out;
    }
}

Tensor encode_batch(const Tensor& x, EncoderParams& p, bool training) {
    const int ndim = x.ndim();
    if (ndim != 3 && ndim != 4) {
        throw std::invalid_argument("encode: expected [(B,)C,H,W], got " + shape_str(x.shape()));
    }
    const int C = x.dim(ndim - 3), H = x.dim(ndim - 2), W = x.dim(ndim - 1);
    if (C != p.in_channels) {
        throw std::invalid_argument("encode: input has " + std::to_string(C) + " channels, encoder expects " +
                                    std::to_string(p.in_channels));
    }
    const int div = p.required_divisor();
    if (H % div != 0 || W % div != 0) {
        throw std::invalid_argument("encode: input dims " + shape_str(x.shape()) +
                                    " must be divisible by " + std::to_string(div));
    }
    Tensor t = x;
    for (auto& block : p.blocks) t = residual_down_block(t, block, training);
    return t;
}

FeatureMatrix encode(const Tensor& x, EncoderParams& p, bool training) {
    if (x.ndim() != 3) {
        throw std::invalid_argument("encode: expected [C,H,W], got " + shape_str(x.shape()));
    }
    return FeatureMatrix{encode_batch(x, p, training), p.branch};
}

}  // namespace dfdepth

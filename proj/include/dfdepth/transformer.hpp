#pragma once

#include <vector>

#include "dfdepth/feature.hpp"
#include "dfdepth/layers.hpp"

namespace dfdepth {

inline constexpr int kNumPatches = 16;  // fixed 4x4 grid
inline constexpr int kPatchGrid = 4;

/// 16 patch tokens of width D, row-major over the 4x4 grid.
struct TokenSequence {
    Tensor tokens;  // [16,D]
    FeatureTag tag = FeatureTag::spatial;
};

/// Patch embedding: flatten each grid cell to a vector of length
/// P = C*(h/4)*(w/4), project to D, add the learned positional embedding.
struct PatchifyParams {
    Tensor proj;  // [P,D]
    Tensor bias;  // [D]
    Tensor pos;   // [16,D], zero-initialized

    PatchifyParams() = default;
    PatchifyParams(int patch_volume, int embed_dim, Rng& rng);
};

/// Weights of one pre-norm transformer block with h attention heads of
/// width d_k (h*d_k == D) and a 4x expansion feed-forward.
struct AttentionParams {
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;  // [D]
    std::vector<Tensor> wq, wk, wv;                   // h x [D,d_k]
    Tensor wo;                                        // [h*d_k,D]
    Tensor ff1, ff1_bias;                             // [D,4D],[4D]
    Tensor ff2, ff2_bias;                             // [4D,D],[D]
    int heads = 1;
    int head_dim = 0;
    double ln_eps = 1e-5;

    AttentionParams() = default;
    AttentionParams(int embed_dim, int heads, Rng& rng, double ln_eps = 1e-5);
};

/// One branch's full patch-transformer: embed, blocks, inverse projection.
struct TransformerParams {
    PatchifyParams patch;
    std::vector<AttentionParams> blocks;
    Tensor unproj;       // [D,P]
    Tensor unproj_bias;  // [P]

    TransformerParams() = default;
    TransformerParams(int patch_volume, int embed_dim, int num_blocks, int heads, Rng& rng,
                      double ln_eps = 1e-5);
};

TokenSequence patchify(const FeatureMatrix& f, const PatchifyParams& p);

// softmax(Q K^T / sqrt(d_k)), rows are queries.
Tensor attention_weights(const Tensor& q, const Tensor& k);
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

Tensor multi_head(const Tensor& tokens, const AttentionParams& p);

TokenSequence transformer_block(const TokenSequence& x, const AttentionParams& p);

FeatureMatrix unpatchify(const TokenSequence& t, int channels, int height, int width,
                         const Tensor& unproj, const Tensor& unproj_bias);

// encode-side feature -> tokens -> blocks -> feature, same shape and tag.
FeatureMatrix run_transformer(const FeatureMatrix& f, const TransformerParams& p);

}  // namespace dfdepth

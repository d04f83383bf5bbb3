#include "dfdepth/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dfdepth {

namespace {

void check_patch_grid(const char* op, int h, int w) {
    if (h % kPatchGrid != 0 || w % kPatchGrid != 0) {
        throw std::invalid_argument(std::string(op) + ": feature dims " + std::to_string(h) + "x" +
                                    std::to_string(w) + " not divisible by " + std::to_string(kPatchGrid));
    }
}

// Flat index map from [C,h,w] to the [16,P] patch matrix, row-major tokens.
std::vector<std::size_t> patch_index_map(int c, int h, int w) {
    const int ph = h / kPatchGrid, pw = w / kPatchGrid;
    const std::size_t volume = static_cast<std::size_t>(c) * ph * pw;
    std::vector<std::size_t> map(static_cast<std::size_t>(kNumPatches) * volume);
    std::size_t out = 0;
    for (int gy = 0; gy < kPatchGrid; ++gy) {
        for (int gx = 0; gx < kPatchGrid; ++gx) {
            for (int ci = 0; ci < c; ++ci) {
                for (int py = 0; py < ph; ++py) {
                    for (int px = 0; px < pw; ++px) {
                        const std::size_t src = static_cast<std::size_t>(ci) * h * w +
                                                static_cast<std::size_t>(gy * ph + py) * w +
                                                static_cast<std::size_t>(gx * pw + px);
                        map[out++] = src;
                    }
                }
            }
        }
    }
    return map;
}

std::vector<std::size_t> invert_map(const std::vector<std::size_t>& map) {
    std::vector<std::size_t> inv(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) inv[map[i]] = i;
    return inv;
}

}  // namespace

PatchifyParams::PatchifyParams(int patch_volume, int embed_dim, Rng& rng)
    : proj(kaiming_uniform({patch_volume, embed_dim}, patch_volume, rng)),
      bias(Tensor::zeros({embed_dim}, true)),
      pos(Tensor::zeros({kNumPatches, embed_dim}, true)) {}

AttentionParams::AttentionParams(int embed_dim, int heads_, Rng& rng, double ln_eps_)
    : ln1_gamma(Tensor::full({embed_dim}, 1.0, true)),
      ln1_beta(Tensor::zeros({embed_dim}, true)),
      ln2_gamma(Tensor::full({embed_dim}, 1.0, true)),
      ln2_beta(Tensor::zeros({embed_dim}, true)),
      heads(heads_),
      ln_eps(ln_eps_) {
    if (heads_ < 1 || embed_dim % heads_ != 0) {
        throw std::invalid_argument("attention: heads must divide embed_dim (" +
                                    std::to_string(heads_) + " vs " + std::to_string(embed_dim) + ")");
    }
    head_dim = embed_dim / heads_;
    for (int i = 0; i < heads_; ++i) {
        wq.push_back(kaiming_uniform({embed_dim, head_dim}, embed_dim, rng));
        wk.push_back(kaiming_uniform({embed_dim, head_dim}, embed_dim, rng));
        wv.push_back(kaiming_uniform({embed_dim, head_dim}, embed_dim, rng));
    }
    wo = kaiming_uniform({embed_dim, embed_dim}, embed_dim, rng);
    const int hidden = 4 * embed_dim;
    ff1 = kaiming_uniform({embed_dim, hidden}, embed_dim, rng);
    ff1_bias = Tensor::zeros({hidden}, true);
    ff2 = kaiming_uniform({hidden, embed_dim}, hidden, rng);
    ff2_bias = Tensor::zeros({embed_dim}, true);
}

TransformerParams::TransformerParams(int patch_volume, int embed_dim, int num_blocks, int heads,
                                     Rng& rng, double ln_eps)
    : patch(patch_volume, embed_dim, rng) {
    for (int b = 0; b < num_blocks; ++b) blocks.emplace_back(embed_dim, heads, rng, ln_eps);
    unproj = kaiming_uniform({embed_dim, patch_volume}, embed_dim, rng);
    unproj_bias = Tensor::zeros({patch_volume}, true);
}

TokenSequence patchify(const FeatureMatrix& f, const PatchifyParams& p) {
    const int c = f.channels(), h = f.height(), w = f.width();
    check_patch_grid("patchify", h, w);
    const int volume = c * (h / kPatchGrid) * (w / kPatchGrid);
    if (p.proj.dim(0) != volume) {
        throw std::invalid_argument("patchify: projection expects patch volume " +
                                    std::to_string(p.proj.dim(0)) + ", feature gives " +
                                    std::to_string(volume));
    }
    Tensor patches = gather(f.values, patch_index_map(c, h, w), {kNumPatches, volume});
    Tensor tokens = add_row_broadcast(matmul(patches, p.proj), p.bias);
    tokens = add(tokens, p.pos);
    return TokenSequence{tokens, f.tag};
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
    if (q.ndim() != 2 || k.ndim() != 2 || q.dim(1) != k.dim(1)) {
        throw std::invalid_argument("attention: query/key widths differ, " + shape_str(q.shape()) +
                                    " vs " + shape_str(k.shape()));
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor scores = scale(matmul(q, transpose2d(k)), inv_sqrt_dk);
    return softmax(scores, 1);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (k.ndim() != 2 || v.ndim() != 2 || k.dim(0) != v.dim(0)) {
        throw std::invalid_argument("attention: key/value row counts differ, " + shape_str(k.shape()) +
                                    " vs " + shape_str(v.shape()));
    }
    return matmul(attention_weights(q, k), v);
}

Tensor multi_head(const Tensor& tokens, const AttentionParams& p) {
    if (tokens.ndim() != 2) {
        throw std::invalid_argument("multi_head: expected [N,D] tokens, got " + shape_str(tokens.shape()));
    }
    const int d = tokens.dim(1);
    if (p.heads * p.head_dim != d) {
        throw std::invalid_argument("multi_head: heads*head_dim != D (" + std::to_string(p.heads) + "*" +
                                    std::to_string(p.head_dim) + " vs " + std::to_string(d) + ")");
    }
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(p.heads));
    for (int i = 0; i < p.heads; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        heads.push_back(attention(matmul(tokens, p.wq[idx]), matmul(tokens, p.wk[idx]),
                                  matmul(tokens, p.wv[idx])));
    }
    return matmul(concat_cols(heads), p.wo);
}

TokenSequence transformer_block(const TokenSequence& x, const AttentionParams& p) {
    Tensor attended = multi_head(layer_norm(x.tokens, p.ln1_gamma, p.ln1_beta, p.ln_eps), p);
    Tensor mid = add(x.tokens, attended);
    Tensor t = layer_norm(mid, p.ln2_gamma, p.ln2_beta, p.ln_eps);
    t = add_row_broadcast(matmul(t, p.ff1), p.ff1_bias);
    t = relu(t);
    t = add_row_broadcast(matmul(t, p.ff2), p.ff2_bias);
    return TokenSequence{add(mid, t), x.tag};
}

FeatureMatrix unpatchify(const TokenSequence& t, int channels, int height, int width,
                         const Tensor& unproj, const Tensor& unproj_bias) {
    if (t.tokens.dim(0) != kNumPatches) {
        throw std::invalid_argument("unpatchify: expected " + std::to_string(kNumPatches) + " tokens, got " +
                                    std::to_string(t.tokens.dim(0)));
    }
    check_patch_grid("unpatchify", height, width);
    const int volume = channels * (height / kPatchGrid) * (width / kPatchGrid);
    if (unproj.dim(1) != volume) {
        throw std::invalid_argument("unpatchify: projection emits volume " + std::to_string(unproj.dim(1)) +
                                    ", target needs " + std::to_string(volume));
    }
    Tensor patches = add_row_broadcast(matmul(t.tokens, unproj), unproj_bias);
    Tensor values = gather(patches, invert_map(patch_index_map(channels, height, width)),
                           {channels, height, width});
    return FeatureMatrix{values, t.tag};
}

FeatureMatrix run_transformer(const FeatureMatrix& f, const TransformerParams& p) {
    TokenSequence seq = patchify(f, p.patch);
    for (const auto& block : p.blocks) seq = transformer_block(seq, block);
    return unpatchify(seq, f.channels(), f.height(), f.width(), p.unproj, p.unproj_bias);
}

}  // namespace dfdepth

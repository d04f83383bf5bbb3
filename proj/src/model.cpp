#include "dfdepth/model.hpp"

#include <stdexcept>

#include "dfdepth/spectral.hpp"

namespace dfdepth {

void ModelConfig::validate() const {
    if (encoder_blocks < 1) throw std::invalid_argument("model: encoder_blocks must be >= 1");
    if (transformer_blocks < 0) throw std::invalid_argument("model: transformer_blocks must be >= 0");
    const int div = (1 << encoder_blocks) * kPatchGrid;
    if (image_size < div || image_size % div != 0) {
        throw std::invalid_argument("model: image_size " + std::to_string(image_size) +
                                    " must be a positive multiple of " + std::to_string(div));
    }
    if (heads < 1 || embed_dim % heads != 0) {
        throw std::invalid_argument("model: heads must divide embed_dim");
    }
    if (embed_dim % (1 << encoder_blocks) != 0) {
        throw std::invalid_argument("model: embed_dim must be divisible by 2^encoder_blocks");
    }
    if (depth_scale <= 0.0) throw std::invalid_argument("model: depth_scale must be positive");
}

DepthModel::DepthModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    enc_spatial_ = EncoderParams(3, cfg_.embed_dim, cfg_.encoder_blocks, FeatureTag::spatial, rng, cfg_.bn_eps);
    enc_freq_ = EncoderParams(2, cfg_.embed_dim, cfg_.encoder_blocks, FeatureTag::frequency, rng, cfg_.bn_eps);
    tr_spatial_ = TransformerParams(cfg_.patch_volume(), cfg_.embed_dim, cfg_.transformer_blocks,
                                    cfg_.heads, rng, cfg_.ln_eps);
    tr_freq_ = TransformerParams(cfg_.patch_volume(), cfg_.embed_dim, cfg_.transformer_blocks,
                                 cfg_.heads, rng, cfg_.ln_eps);
    dec_ = DecoderParams(cfg_.embed_dim, cfg_.encoder_blocks, rng, cfg_.bn_eps);
    register_params();
}

Tensor DepthModel::forward(const Tensor& rgb, const Tensor& freq, bool training) {
    Tensor rgb_b = rgb.ndim() == 3 ? stack0({rgb}) : rgb;
    Tensor freq_b = freq.ndim() == 3 ? stack0({freq}) : freq;
    if (rgb_b.ndim() != 4 || freq_b.ndim() != 4 || rgb_b.dim(0) != freq_b.dim(0)) {
        throw std::invalid_argument("model: rgb and frequency batches disagree, " +
                                    shape_str(rgb.shape()) + " vs " + shape_str(freq.shape()));
    }
    const int batch = rgb_b.dim(0);
    Tensor sp = encode_batch(rgb_b, enc_spatial_, training);  // [B,D,s,s]
    Tensor fr = encode_batch(freq_b, enc_freq_, training);

    std::vector<Tensor> fused;
    fused.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        FeatureMatrix f_sp{select0(sp, b), FeatureTag::spatial};
        FeatureMatrix f_fr{select0(fr, b), FeatureTag::frequency};
        f_sp = run_transformer(f_sp, tr_spatial_);
        f_fr = run_transformer(f_fr, tr_freq_);
        fused.push_back(fuse(f_fr, f_sp, cfg_.scale_fusion).values);
    }
    Tensor merged = stack0(fused);  // [B,D,s,s]
    return decode_batch(merged, dec_, training, cfg_.image_size, cfg_.image_size);
}

DepthMap DepthModel::predict(const Tensor& rgb) {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3) {
        throw std::invalid_argument("predict: expected [3,H,W] image, got " + shape_str(rgb.shape()));
    }
    Tensor out = forward(rgb, frequency_input(rgb), /*training=*/false);
    return DepthMap{select0(out, 0), cfg_.depth_scale};
}

void DepthModel::zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
}

namespace {

void register_encoder(const std::string& prefix, EncoderParams& e,
                      std::vector<std::pair<std::string, Tensor>>& out) {
    for (std::size_t i = 0; i < e.blocks.size(); ++i) {
        auto& b = e.blocks[i];
        const std::string p = prefix + ".block" + std::to_string(i);
        out.emplace_back(p + ".bn1.gamma", b.bn1.gamma);
        out.emplace_back(p + ".bn1.beta", b.bn1.beta);
        out.emplace_back(p + ".conv1", b.conv1);
        out.emplace_back(p + ".bn2.gamma", b.bn2.gamma);
        out.emplace_back(p + ".bn2.beta", b.bn2.beta);
        out.emplace_back(p + ".conv2", b.conv2);
        out.emplace_back(p + ".shortcut", b.shortcut);
    }
}

void register_transformer(const std::string& prefix, TransformerParams& t,
                          std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".patch.proj", t.patch.proj);
    out.emplace_back(prefix + ".patch.bias", t.patch.bias);
    out.emplace_back(prefix + ".patch.pos", t.patch.pos);
    for (std::size_t i = 0; i < t.blocks.size(); ++i) {
        auto& b = t.blocks[i];
        const std::string p = prefix + ".block" + std::to_string(i);
        out.emplace_back(p + ".ln1.gamma", b.ln1_gamma);
        out.emplace_back(p + ".ln1.beta", b.ln1_beta);
        for (int h = 0; h < b.heads; ++h) {
            const std::string hp = p + ".head" + std::to_string(h);
            out.emplace_back(hp + ".wq", b.wq[static_cast<std::size_t>(h)]);
            out.emplace_back(hp + ".wk", b.wk[static_cast<std::size_t>(h)]);
            out.emplace_back(hp + ".wv", b.wv[static_cast<std::size_t>(h)]);
        }
        out.emplace_back(p + ".wo", b.wo);
        out.emplace_back(p + ".ln2.gamma", b.ln2_gamma);
        out.emplace_back(p + ".ln2.beta", b.ln2_beta);
        out.emplace_back(p + ".ff1", b.ff1);
        out.emplace_back(p + ".ff1_bias", b.ff1_bias);
        out.emplace_back(p + ".ff2", b.ff2);
        out.emplace_back(p + ".ff2_bias", b.ff2_bias);
    }
    out.emplace_back(prefix + ".unproj", t.unproj);
    out.emplace_back(prefix + ".unproj_bias", t.unproj_bias);
}

}  // namespace

void DepthModel::register_params() {
    params_.clear();
    register_encoder("spatial_encoder", enc_spatial_, params_);
    register_encoder("frequency_encoder", enc_freq_, params_);
    register_transformer("spatial_transformer", tr_spatial_, params_);
    register_transformer("frequency_transformer", tr_freq_, params_);
    for (std::size_t i = 0; i < dec_.blocks.size(); ++i) {
        auto& b = dec_.blocks[i];
        const std::string p = "decoder.block" + std::to_string(i);
        params_.emplace_back(p + ".tconv", b.tconv);
        params_.emplace_back(p + ".bn.gamma", b.bn.gamma);
        params_.emplace_back(p + ".bn.beta", b.bn.beta);
    }
    params_.emplace_back("decoder.refine", dec_.refine);
    params_.emplace_back("decoder.refine_bias", dec_.refine_bias);
}

std::vector<std::pair<std::string, std::vector<double>*>> DepthModel::buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    auto add_bn = [&out](const std::string& prefix, BatchNormLayer& bn) {
        out.emplace_back(prefix + ".running_mean", &bn.running_mean);
        out.emplace_back(prefix + ".running_var", &bn.running_var);
    };
    auto add_encoder = [&](const std::string& prefix, EncoderParams& e) {
        for (std::size_t i = 0; i < e.blocks.size(); ++i) {
            const std::string p = prefix + ".block" + std::to_string(i);
            add_bn(p + ".bn1", e.blocks[i].bn1);
            add_bn(p + ".bn2", e.blocks[i].bn2);
        }
    };
    add_encoder("spatial_encoder", enc_spatial_);
    add_encoder("frequency_encoder", enc_freq_);
    for (std::size_t i = 0; i < dec_.blocks.size(); ++i) {
        add_bn("decoder.block" + std::to_string(i) + ".bn", dec_.blocks[i].bn);
    }
    return out;
}

}  // namespace dfdepth

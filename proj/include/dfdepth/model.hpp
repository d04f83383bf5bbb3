#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfdepth/decoder.hpp"
#include "dfdepth/encoder.hpp"
#include "dfdepth/fusion.hpp"
#include "dfdepth/transformer.hpp"

namespace dfdepth {

struct ModelConfig {
    int image_size = 64;
    int embed_dim = 64;        // D
    int encoder_blocks = 2;    // B, matched by the decoder
    int transformer_blocks = 2;
    int heads = 4;
    double depth_scale = 10.0;
    double bn_eps = 1e-5;
    double ln_eps = 1e-5;
    bool scale_fusion = false;

    void validate() const;
    int feature_size() const { return image_size >> encoder_blocks; }
    int patch_volume() const {
        const int p = feature_size() / kPatchGrid;
        return embed_dim * p * p;
    }
};

/// The dual-branch depth estimator: untied spatial (RGB) and frequency
/// encoders and transformer stacks, attention fusion, shared decoder.
class DepthModel {
public:
    DepthModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // rgb [B,3,S,S] (or [3,S,S]), freq [B,2,S,S] (or [2,S,S]) -> [B,1,S,S].
    Tensor forward(const Tensor& rgb, const Tensor& freq, bool training);

    // Eval-mode single image; computes the frequency branch input internally.
    DepthMap predict(const Tensor& rgb);

    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    std::vector<std::pair<std::string, std::vector<double>*>> buffers();
    void zero_grad();

    EncoderParams& spatial_encoder() { return enc_spatial_; }
    EncoderParams& frequency_encoder() { return enc_freq_; }
    TransformerParams& spatial_transformer() { return tr_spatial_; }
    TransformerParams& frequency_transformer() { return tr_freq_; }
    DecoderParams& decoder() { return dec_; }

private:
    void register_params();

    ModelConfig cfg_;
    EncoderParams enc_spatial_, enc_freq_;
    TransformerParams tr_spatial_, tr_freq_;
    DecoderParams dec_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace dfdepth

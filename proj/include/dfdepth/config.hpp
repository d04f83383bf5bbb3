#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dfdepth/model.hpp"

namespace dfdepth {

/// Flat training configuration; file form is one `key = value` per line
/// with `#` comments, keys named exactly like the fields.
struct TrainConfig {
    double alpha = 0.8;
    double learning_rate = 1e-4;
    int batch_size = 4;
    int epochs = 20;
    std::uint64_t seed = 0;
    int image_size = 64;
    int embed_dim = 64;
    int encoder_blocks = 2;
    int transformer_blocks = 2;
    int heads = 4;
    std::string data = "synth:32:0";  // directory or synth:COUNT:SEED
    double depth_scale = 10.0;
    double min_valid = 1e-3;  // meters; defaults to 0 for synthetic data
    std::string precision = "f64";
    int crop_offset_x = -1;  // -1 = centered
    int crop_offset_y = -1;

    void validate() const;
    ModelConfig model_config() const;
    std::string to_text() const;

    static TrainConfig parse_text(const std::string& text);
    static TrainConfig load(const std::string& path);
};

struct SynthSpec {
    int count = 0;
    std::uint64_t seed = 0;
};

// Parses "synth:COUNT:SEED"; empty for anything else.
std::optional<SynthSpec> parse_synth_spec(const std::string& data);

void apply_precision(const TrainConfig& cfg);

}  // namespace dfdepth

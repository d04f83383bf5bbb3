#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dfdepth/png_io.hpp"
#include "dfdepth/spectral.hpp"
#include "dfdepth/train.hpp"

namespace {

using namespace dfdepth;

std::vector<double> parse_alpha_list(const std::string& csv) {
    std::vector<double> alphas;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        alphas.push_back(std::stod(item));
    }
    return alphas;
}

std::vector<ImageSample> samples_for_eval(const Checkpoint& ckpt, const std::string& data) {
    TrainConfig cfg = ckpt.config;
    cfg.data = data;
    return load_samples(cfg);
}

int run_train(const std::string& config_path, const std::string& out_path) {
    const TrainConfig cfg = TrainConfig::load(config_path);
    TrainResult result = train(cfg, &std::cout);
    save_checkpoint(result.checkpoint, out_path);
    std::cout << "checkpoint " << out_path << "\n";
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const MetricsReport report = evaluate(ckpt, samples_for_eval(ckpt, data));
    std::cout << MetricsReport::csv_header() << "\n" << report.csv_row(ckpt.config.alpha) << "\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::string& alphas_csv, const std::string& out_path) {
    const TrainConfig cfg = TrainConfig::load(config_path);
    const std::string csv = alpha_sweep(cfg, parse_alpha_list(alphas_csv));
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("sweep: cannot open " + out_path + " for writing");
    out << csv;
    std::cout << csv;
    return 0;
}

int run_synth(const std::string& out_dir, int count, std::uint64_t seed, int size, double depth_scale) {
    if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
    std::vector<ImageSample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        samples.push_back(synth_scene(seed + static_cast<std::uint64_t>(i), size, depth_scale));
    }
    write_dataset(out_dir, samples);
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    apply_precision(ckpt.config);
    DepthModel model(ckpt.config.model_config(), ckpt.config.seed);
    restore_model(ckpt, model);

    const ImageU8 png = read_png_rgb8(image_path);
    const int s = ckpt.config.image_size;
    if (png.width < s || png.height < s) {
        throw std::runtime_error("infer: image " + image_path + " smaller than model input " +
                                 std::to_string(s));
    }
    const int x0 = ckpt.config.crop_offset_x >= 0 ? ckpt.config.crop_offset_x : (png.width - s) / 2;
    const int y0 = ckpt.config.crop_offset_y >= 0 ? ckpt.config.crop_offset_y : (png.height - s) / 2;
    const std::size_t hw = static_cast<std::size_t>(s) * s;
    std::vector<double> rgb(3 * hw);
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            const std::size_t src = (static_cast<std::size_t>(y + y0) * png.width + (x + x0)) * 3;
            const std::size_t dst = static_cast<std::size_t>(y) * s + x;
            rgb[dst] = png.rgb[src] / 255.0;
            rgb[hw + dst] = png.rgb[src + 1] / 255.0;
            rgb[2 * hw + dst] = png.rgb[src + 2] / 255.0;
        }
    }
    const DepthMap depth = model.predict(Tensor::from_data({3, s, s}, std::move(rgb)));

    ImageU16 out;
    out.width = s;
    out.height = s;
    out.gray = depth_to_u16(depth);
    write_png_gray16(out_path, out);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-branch frequency/spatial transformer depth estimation"};
    app.require_subcommand(1);

    std::string config_path, out_path, ckpt_path, data, image_path;
    std::string alphas = "0.3,0.4,0.5,0.6,0.7,0.8";
    int count = 0, size = 64;
    std::uint64_t seed = 0;
    double depth_scale = 10.0;

    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    train_cmd->add_option("--config", config_path, "config file")->required();
    train_cmd->add_option("--out", out_path, "output checkpoint")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data, "dataset dir or synth:N:seed")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "Train/evaluate across alpha values");
    sweep_cmd->add_option("--config", config_path, "config file")->required();
    sweep_cmd->add_option("--alphas", alphas, "comma-separated alpha list");
    sweep_cmd->add_option("--out", out_path, "output CSV")->required();

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--out", out_path, "output directory")->required();
    synth_cmd->add_option("--count", count, "number of samples")->required();
    synth_cmd->add_option("--seed", seed, "base seed");
    synth_cmd->add_option("--size", size, "image size");
    synth_cmd->add_option("--depth-scale", depth_scale, "meters at depth 1.0");

    auto* infer_cmd = app.add_subcommand("infer", "Predict a depth map for one image");
    infer_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    infer_cmd->add_option("--image", image_path, "input PNG")->required();
    infer_cmd->add_option("--out", out_path, "output 16-bit depth PNG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return run_train(config_path, out_path);
        if (eval_cmd->parsed()) return run_eval(ckpt_path, data);
        if (sweep_cmd->parsed()) return run_sweep(config_path, alphas, out_path);
        if (synth_cmd->parsed()) return run_synth(out_path, count, seed, size, depth_scale);
        if (infer_cmd->parsed()) return run_infer(ckpt_path, image_path, out_path);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}

#include "dfdepth/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dfdepth/spectral.hpp"

namespace dfdepth {

namespace {

// Per-epoch permutation from a counter-based stream over (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, int epoch, std::size_t n) {
    std::uint64_t x = seed;
    Rng::splitmix64(x);
    x ^= 0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(epoch + 1);
    Rng rng(Rng::splitmix64(x));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

// DFT preprocessing dominates ingestion cost; cache per sample id.
class FrequencyCache {
public:
    const Tensor& get(const ImageSample& sample) {
        auto it = cache_.find(sample.id);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(sample.id, frequency_input(sample.image)).first->second;
    }

private:
    std::unordered_map<std::string, Tensor> cache_;
};

}  // namespace

std::vector<ImageSample> load_samples(const TrainConfig& cfg) {
    if (const auto spec = parse_synth_spec(cfg.data)) {
        std::vector<ImageSample> samples;
        samples.reserve(static_cast<std::size_t>(spec->count));
        for (int i = 0; i < spec->count; ++i) {
            samples.push_back(synth_scene(spec->seed + static_cast<std::uint64_t>(i), cfg.image_size,
                                          cfg.depth_scale));
        }
        return samples;
    }
    return load_dataset(cfg.data, cfg.image_size, cfg.crop_offset_x, cfg.crop_offset_y);
}

TrainResult train(const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    apply_precision(cfg);

    const std::vector<ImageSample> samples = load_samples(cfg);
    DepthModel model(cfg.model_config(), cfg.seed);
    AdamState adam;
    adam.init_like(model.params());
    const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};
    const LossConfig loss_cfg = LossConfig::with_alpha(cfg.alpha);

    FrequencyCache freq_cache;
    TrainResult result;
    std::int64_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto perm = epoch_permutation(cfg.seed, epoch, samples.size());
        double epoch_loss = 0.0;
        std::size_t epoch_steps = 0;

        for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor> images, freqs, depths;
            for (std::size_t i = start; i < end; ++i) {
                const ImageSample& s = samples[perm[i]];
                images.push_back(s.image);
                freqs.push_back(freq_cache.get(s));
                depths.push_back(s.depth);
            }
            ++step;
            try {
                Tensor rgb = stack0(images);
                Tensor freq = stack0(freqs);
                Tensor pred = model.forward(rgb, freq, /*training=*/true);

                const int batch = static_cast<int>(images.size());
                Tensor loss;
                for (int b = 0; b < batch; ++b) {
                    Tensor sample_loss = composite_loss(select0(pred, b), depths[static_cast<std::size_t>(b)], loss_cfg);
                    loss = b == 0 ? sample_loss : add(loss, sample_loss);
                }
                loss = scale(loss, 1.0 / static_cast<double>(batch));

                model.zero_grad();
                backward(loss);
                adam_step(model.params(), adam, adam_cfg, adam.t + 1);

                const double loss_value = loss.item();
                result.step_losses.push_back(loss_value);
                epoch_loss += loss_value;
                ++epoch_steps;
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train: aborted at step " + std::to_string(step) + ": " + e.what());
            }
        }

        const double mean_loss = epoch_loss / static_cast<double>(epoch_steps);
        result.epoch_losses.push_back(mean_loss);
        if (log) {
            std::ostringstream line;
            line.precision(17);
            line << "epoch " << epoch << " loss " << mean_loss << "\n";
            *log << line.str() << std::flush;
        }
    }

    result.checkpoint = make_checkpoint(cfg, model, &adam);
    return result;
}

MetricsReport evaluate(const Checkpoint& ckpt, const std::vector<ImageSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    apply_precision(ckpt.config);
    DepthModel model(ckpt.config.model_config(), ckpt.config.seed);
    restore_model(ckpt, model);

    std::vector<double> pred_m, target_m;
    for (const ImageSample& s : samples) {
        if (s.image.dim(1) != ckpt.config.image_size || s.image.dim(2) != ckpt.config.image_size) {
            throw std::invalid_argument("evaluate: sample " + s.id + " is " + shape_str(s.image.shape()) +
                                        ", checkpoint expects " + std::to_string(ckpt.config.image_size));
        }
        DepthMap pred = model.predict(s.image);
        const auto pv = pred.values.data();
        const auto tv = s.depth.data();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            pred_m.push_back(pv[i] * s.depth_scale);
            target_m.push_back(tv[i] * s.depth_scale);
        }
    }
    return depth_metrics_pixels(pred_m, target_m, ckpt.config.min_valid);
}

std::string alpha_sweep(const TrainConfig& cfg, std::vector<double> alphas, std::ostream* log) {
    if (alphas.empty()) throw std::invalid_argument("sweep: alpha list is empty");
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw std::invalid_argument("sweep: alpha " + std::to_string(a) + " outside [0,1]");
        }
    }
    std::sort(alphas.begin(), alphas.end());

    std::ostringstream csv;
    csv << MetricsReport::csv_header() << "\n";
    for (double a : alphas) {
        try {
            TrainConfig run_cfg = cfg;
            run_cfg.alpha = a;
            if (log) *log << "# alpha " << a << "\n";
            TrainResult result = train(run_cfg, log);
            const MetricsReport report = evaluate(result.checkpoint, load_samples(run_cfg));
            csv << report.csv_row(a) << "\n";
        } catch (const std::exception& e) {
            throw std::runtime_error("sweep: alpha " + std::to_string(a) + ": " + e.what());
        }
    }
    return csv.str();
}

}  // namespace dfdepth

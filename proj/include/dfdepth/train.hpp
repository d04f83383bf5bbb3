#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dfdepth/checkpoint.hpp"
#include "dfdepth/dataset.hpp"
#include "dfdepth/objective.hpp"

namespace dfdepth {

struct TrainResult {
    std::vector<double> epoch_losses;
    std::vector<double> step_losses;
    Checkpoint checkpoint;
};

// Resolves cfg.data into samples (synthetic spec or dataset directory).
std::vector<ImageSample> load_samples(const TrainConfig& cfg);

// Full training loop: Adam, per-epoch shuffling, composite loss at
// cfg.alpha. Deterministic for a fixed (config, seed). Writes one
// "epoch N loss L" line per epoch to log when given.
TrainResult train(const TrainConfig& cfg, std::ostream* log = nullptr);

// Eval-mode forward over the dataset; metrics aggregated over the
// concatenated valid pixels of every sample.
MetricsReport evaluate(const Checkpoint& ckpt, const std::vector<ImageSample>& samples);

// Trains one model per alpha (shared seed and data), evaluates each, and
// returns the CSV report ordered by ascending alpha.
std::string alpha_sweep(const TrainConfig& cfg, std::vector<double> alphas, std::ostream* log = nullptr);

}  // namespace dfdepth

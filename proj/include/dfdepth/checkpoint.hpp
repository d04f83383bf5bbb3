#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfdepth/adam.hpp"
#include "dfdepth/config.hpp"
#include "dfdepth/model.hpp"

namespace dfdepth {

struct NamedTensorData {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Serialized training state: config snapshot, every model parameter and
/// batch-norm buffer, the optimizer moments and step counter.
///
/// Binary layout ("DFCK" format, version 1):
///   magic "DFCK" | u32 version | u8 value width (4 or 8) | u32 tensor count
///   per tensor: u16 name length | name bytes | u8 ndim | ndim x u32 dims |
///               numel x width little-endian IEEE-754 values
struct Checkpoint {
    TrainConfig config;
    std::int64_t step = 0;
    std::vector<NamedTensorData> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot of the live model (+ optimizer state when present).
Checkpoint make_checkpoint(const TrainConfig& cfg, DepthModel& model, const AdamState* adam);

// Restores parameters and buffers into a model built from ckpt.config.
void restore_model(const Checkpoint& ckpt, DepthModel& model);

// Restores Adam moments; returns false if the checkpoint has none.
bool restore_adam(const Checkpoint& ckpt, DepthModel& model, AdamState& state);

}  // namespace dfdepth

#pragma once

#include "rlld/denoiser.hpp"
#include "rlld/task.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace rlld {

/// A checkpoint directory holds `manifest.json` (architecture, tensor names,
/// shapes and byte offsets, seed and config hash) and `tensors.bin`
/// (little-endian float64, row-major, tensors back to back).
struct Checkpoint {
    DenoiserParams denoiser;
    TaskParams task;
    std::uint64_t seed = 0;
    std::string config_hash;
    int epoch = 0;
    double validation_score = 0.0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace rlld

#pragma once

#include "rlld/data.hpp"
#include "rlld/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rlld {

/// Everything needed to reproduce a run: how the data was generated and how
/// the models were trained.
struct RunConfig {
    SyntheticConfig data;
    TrainConfig train;
};

/// Canonical JSON (sorted keys, two-space indent).
std::string to_json(const RunConfig& config);

/// Missing keys keep their defaults; unknown keys throw Error(invalid_config).
RunConfig run_config_from_json(const std::string& text);

RunConfig load_run_config(const std::filesystem::path& file);
void save_run_config(const RunConfig& config, const std::filesystem::path& file);

/// Applies `section.key=value` (e.g. `train.batch_size=64`, `data.noise.seed=3`).
/// The value is parsed as JSON when possible and as a string otherwise.
/// Throws Error(invalid_config) when the key does not exist.
void apply_override(RunConfig& config, std::string_view assignment);
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

/// 64-bit FNV-1a of the canonical JSON.
std::uint64_t config_hash(const RunConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace rlld

#pragma once

#include <filesystem>
#include <optional>

#include "perfgat/config.hpp"
#include "perfgat/trainer.hpp"

namespace perfgat::io {

// Checkpoints carry the deployable parameters, the generating config and
// (when present) the full optimizer state for exact resume.
void write_checkpoint(const std::filesystem::path& path, const model::ModelParams& deploy,
                      const train::TrainState* state, const RunConfig& cfg);

struct LoadedCheckpoint {
  model::ModelParams model;
  std::optional<train::TrainState> state;
  RunConfig config;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path);

// Dim compatibility between a checkpoint and a cohort; mismatches throw
// DataError naming the fields.
void check_compatible(const LoadedCheckpoint& ckpt, std::size_t n_timepoints,
                      std::size_t patch_size);

}  // namespace perfgat::io

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "perfgat/model.hpp"
#include "perfgat/synthdata.hpp"
#include "perfgat/trainer.hpp"

namespace perfgat::io {

// Every tunable of the pipeline in one flat file, so a single (config, seed)
// pair reproduces a whole run. Unknown keys are rejected on load.
struct RunConfig {
  std::uint64_t seed = 42;
  synth::CohortConfig cohort;

  struct GraphSection {
    double tau = 0.5;
    std::size_t k = 5;
    bool use_abs_correlation = false;
  } graph;

  struct ModelSection {
    std::size_t alpha = 2;
    std::size_t beta = 2;
    std::size_t max_layer = 2;
    std::size_t hidden_dim = 16;
    std::size_t embed_dim = 16;
    std::size_t spatial_layers = 2;
    std::size_t local_hidden = 16;
    double leaky_slope = 0.2;
    double init_scale = 1.0;
  } model;

  train::TrainConfig train;

  // Pushes the top-level seed into the cohort and trainer sections.
  void set_seed(std::uint64_t s);

  void validate() const;  // throws ConfigError naming the key

  model::ModelConfig model_config() const;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json_text() const;  // canonical (sorted keys)
};

}  // namespace perfgat::io

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "perfgat/config.hpp"
#include "perfgat/synthdata.hpp"

namespace perfgat::io {

// One container file per subject plus a cohort.json manifest listing labels,
// per-subject seeds and the generating config.
void write_cohort(const std::filesystem::path& dir,
                  const std::vector<synth::LabeledVolume>& cohort, const RunConfig& cfg);

struct LoadedCohort {
  std::vector<synth::LabeledVolume> volumes;
  std::vector<int> labels;
  std::size_t n_regions = 0;
  std::size_t n_timepoints = 0;
  std::size_t patch_size = 0;
};

LoadedCohort read_cohort(const std::filesystem::path& dir);

}  // namespace perfgat::io

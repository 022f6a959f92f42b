#include <benchmark/benchmark.h>

#include "perfgat/graphgen.hpp"
#include "perfgat/model.hpp"
#include "perfgat/synthdata.hpp"

using namespace perfgat;

namespace {

synth::CohortConfig small_cohort() {
  synth::CohortConfig cfg;
  cfg.n_subjects = 10;
  cfg.n_regions = 8;
  cfg.n_timepoints = 16;
  cfg.minority_fraction = 0.3;
  cfg.patch_size = 4;
  cfg.seed = 7;
  cfg.kinetics.arrival_max = 8.0;
  return cfg;
}

void BM_GenerateSubjects(benchmark::State& state) {
  const synth::CohortConfig cfg = small_cohort();
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth::generate_cohort(cfg));
  }
}

void BM_BuildGraphs(benchmark::State& state) {
  const std::vector<synth::LabeledVolume> cohort = synth::generate_cohort(small_cohort());
  for (auto _ : state) {
    benchmark::DoNotOptimize(graph::build_graphs(cohort[0], 0.5, 5));
  }
}

void BM_ForwardBackwardSample(benchmark::State& state) {
  const synth::CohortConfig ccfg = small_cohort();
  const std::vector<synth::LabeledVolume> cohort = synth::generate_cohort(ccfg);
  const graph::SpatioTemporalGraph g = graph::build_graphs(cohort[0], 0.5, 5);

  model::ModelConfig mcfg;
  mcfg.n_timepoints = ccfg.n_timepoints;
  mcfg.patch_voxels = ccfg.patch_size * ccfg.patch_size * ccfg.patch_size;
  const model::ModelParams params = model::init_params(mcfg, 11);

  for (auto _ : state) {
    num::GradTape tape;
    const model::ModelVars vars = model::bind(tape, params, /*trainable=*/true);
    model::SampleForward fwd = model::forward_sample(tape, vars, mcfg, g,
                                                     cohort[0].tumor_patch, cohort[0].label);
    tape.backward(fwd.loss);
    benchmark::DoNotOptimize(tape.grad(vars.fusion.w_head));
  }
}

}  // namespace

BENCHMARK(BM_GenerateSubjects);
BENCHMARK(BM_BuildGraphs);
BENCHMARK(BM_ForwardBackwardSample);

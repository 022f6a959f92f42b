#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "perfgat/metrics.hpp"
#include "perfgat/model.hpp"

namespace perfgat::train {

struct TrainConfig {
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 10;
  std::size_t retrain_epochs = 20;
  std::size_t batch_size = 10;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::array<double, 3> split_ratios = {0.7, 0.1, 0.2};
  double decision_threshold = 0.5;
  std::uint64_t seed = 42;

  void validate() const;  // throws ConfigError naming the field
};

// One prepared sample: graphs plus the raw tumor patch.
struct Subject {
  graph::SpatioTemporalGraph g;
  synth::Tensor4 patch;
  int label = 0;
};

std::vector<Subject> prepare_subjects(const std::vector<synth::LabeledVolume>& cohort,
                                      double tau, std::size_t k, bool use_abs = false);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Label-stratified split by largest-remainder rounding within each class;
// deterministic in the seed, disjoint and exhaustive. Fewer than 3 minority
// samples throw DomainError.
SplitIndices split_dataset(const std::vector<int>& labels,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  std::size_t epochs_since_best = 0;
};

struct AdamState {
  std::vector<num::Matrix> m;  // aligned with model::named_tensors order
  std::vector<num::Matrix> v;
  std::size_t step = 0;
};

// Everything needed to continue an interrupted run exactly.
struct TrainState {
  model::ModelParams current;
  model::ModelParams best;
  AdamState adam;
  std::size_t epochs_done = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  bool stopped_early = false;
};

struct TrainResult {
  model::ModelParams params;  // best-validation parameters
  std::vector<EpochRecord> history;
  TrainState state;
};

// Minimizes mean cross-entropy with Adam; per-epoch shuffle order is derived
// from (seed, epoch), so a resumed run replays the exact schedule. Stops at
// max_epochs or when the best validation loss has not improved for
// early_stop_patience epochs. A non-finite loss throws NumericError naming
// epoch and batch.
TrainResult train(const model::ModelParams& init, const std::vector<Subject>& train_set,
                  const std::vector<Subject>& val_set, const TrainConfig& cfg,
                  const TrainState* resume = nullptr);

// Recombines random ordered pairs of distinct minority samples, emitting
// (u, B') and (u', B) per pair until target_count synthetic samples exist.
// Components are copied verbatim; all outputs carry the minority label.
std::vector<fusion::SampleFeatures> recombine_augment(
    const std::vector<fusion::SampleFeatures>& minority, std::size_t target_count,
    std::uint64_t seed);

struct RetrainResult {
  model::ModelParams params;
  std::vector<double> loss_history;  // per retrain epoch
  std::size_t augmented_count = 0;
};

// Decoupled retraining: freezes both graph encoders and the local encoder,
// caches per-sample features, balances the classes with recombine_augment,
// reinitializes the fusion block and retrains it for retrain_epochs.
RetrainResult retrain_classifier(const model::ModelParams& trained,
                                 const std::vector<Subject>& train_set,
                                 const TrainConfig& cfg);

// Minority-class probability per subject.
std::vector<double> score_subjects(const model::ModelParams& params,
                                   const std::vector<Subject>& subjects);

MetricsReport evaluate(const model::ModelParams& params,
                       const std::vector<Subject>& subjects, double threshold);

}  // namespace perfgat::train

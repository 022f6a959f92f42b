#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "perfgat/encoders.hpp"
#include "perfgat/fusion.hpp"
#include "perfgat/graphgen.hpp"
#include "perfgat/structlearn.hpp"
#include "perfgat/synthdata.hpp"

namespace perfgat::model {

// Architectural dimensions and the structure-learning schedule. The shared
// embedding dim ties the three encoder outputs together for fusion.
struct ModelConfig {
  std::size_t n_timepoints = 16;  // T, the input feature dim
  std::size_t embed_dim = 16;     // D
  std::size_t gsl_alpha = 2;
  std::size_t gsl_beta = 2;
  std::size_t gsl_layers = 2;
  std::size_t spatial_layers = 2;
  std::size_t patch_voxels = 64;  // p^3
  std::size_t local_hidden = 16;
  double leaky_slope = 0.2;
  double init_scale = 1.0;  // multiplier on the Glorot std

  gsl::GslConfig gsl_config() const {
    return gsl::GslConfig{gsl_alpha, gsl_beta, gsl_layers, embed_dim};
  }
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<gsl::GslLayerParams> temporal;
  std::vector<gsl::GslLayerParams> spatial;
  enc::LocalEncoderParams local;
  fusion::FusionParams fusion;
};

struct ModelVars {
  std::vector<gsl::GslLayerVars> temporal;
  std::vector<gsl::GslLayerVars> spatial;
  enc::LocalEncoderVars local;
  fusion::FusionVars fusion;
};

// Glorot-style normal initialization, deterministic in the seed; biases zero.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Re-draws only the fusion block (for decoupled classifier retraining).
void reinit_fusion(ModelParams& params, std::uint64_t seed);

// Every tensor with a stable name, in canonical order. The same order is
// used for binding, optimizer state and serialization.
std::vector<std::pair<std::string, num::Matrix*>> named_tensors(ModelParams& p);
std::vector<std::pair<std::string, const num::Matrix*>> named_tensors(const ModelParams& p);

// Which tensors belong to the fusion/classifier block (retraining trains
// exactly these).
bool is_fusion_tensor(const std::string& name);

// Binds every tensor onto the tape, as trainable params or constants, in
// canonical order. With fusion_only_trainable, encoder tensors bind as
// constants and only fusion tensors register gradients.
ModelVars bind(num::GradTape& tape, const ModelParams& p, bool trainable,
               bool fusion_only_trainable = false);

// Gradients of all trainable tensors in canonical order (zero matrices for
// constants).
std::vector<num::Matrix> collect_gradients(const num::GradTape& tape, const ModelVars& vars,
                                           const ModelParams& p);

struct SampleForward {
  num::Var loss;
  num::Var logits;
  double prob_minority = 0.0;  // softmax probability of label 1
  gsl::GslPlan plan;           // temporal edit decisions made this pass
};

// Full pipeline on one sample: temporal structure learning, spatial and
// local encoding, dual-attention fusion, cross-entropy on the label.
SampleForward forward_sample(num::GradTape& tape, const ModelVars& vars,
                             const ModelConfig& cfg, const graph::SpatioTemporalGraph& g,
                             const synth::Tensor4& patch, int label,
                             const gsl::GslPlan* frozen = nullptr);

// Encoder outputs only (no gradients); the cached unit that augmentation
// recombines.
fusion::SampleFeatures extract_features(const ModelParams& params,
                                        const graph::SpatioTemporalGraph& g,
                                        const synth::Tensor4& patch, int label);

// Fusion + classifier forward from cached features.
num::Var features_loss(num::GradTape& tape, const fusion::FusionVars& vars,
                       const fusion::SampleFeatures& f, double* prob_minority = nullptr);

double prob_minority_from_features(const ModelParams& params,
                                   const fusion::SampleFeatures& f);

}  // namespace perfgat::model

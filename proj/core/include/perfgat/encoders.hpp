#pragma once

#include <span>
#include <vector>

#include "perfgat/grad_tape.hpp"
#include "perfgat/structlearn.hpp"
#include "perfgat/synthdata.hpp"

namespace perfgat::enc {

// Spatial encoder: stacked attention layers on the fixed spatial adjacency.
// Shares the structure-learning layer machinery with alpha = beta = 0.
struct SpatialEncoderParams {
  std::vector<gsl::GslLayerParams> layers;
};

struct SpatialEncoderVars {
  std::vector<gsl::GslLayerVars> layers;
};

// Reduced local tumor encoder: per-frame linear reduction of the flattened
// voxels followed by a gated recurrent update
//   h_t = z_t (.) h_{t-1} + (1 - z_t) (.) htilde_t,
// with the final hidden state projected to the shared embedding dim.
struct LocalEncoderParams {
  num::Matrix w_reduce;  // p^3 x d_loc
  num::Matrix b_reduce;  // 1 x d_loc
  num::Matrix w_gate_h;  // d_loc x d_loc  (W_z)
  num::Matrix w_gate_in; // d_loc x d_loc  (U_z)
  num::Matrix b_gate;    // 1 x d_loc
  num::Matrix w_cand_h;  // d_loc x d_loc  (W_h)
  num::Matrix w_cand_in; // d_loc x d_loc  (U_h)
  num::Matrix b_cand;    // 1 x d_loc
  num::Matrix w_out;     // d_loc x D
  num::Matrix b_out;     // 1 x D
};

struct LocalEncoderVars {
  num::Var w_reduce, b_reduce;
  num::Var w_gate_h, w_gate_in, b_gate;
  num::Var w_cand_h, w_cand_in, b_cand;
  num::Var w_out, b_out;
};

// Z^spatial = stacked attention layers over (X, A_spatial); no edge edits.
num::Var spatial_encode(num::GradTape& tape, num::Var x, const graph::Adjacency& a_spatial,
                        std::span<const gsl::GslLayerVars> layers, double slope);

num::Matrix spatial_encode_values(const num::Matrix& x, const graph::Adjacency& a_spatial,
                                  std::span<const gsl::GslLayerParams> layers, double slope);

// u = local tumor embedding (1 x D) of a p x p x p x T patch.
num::Var local_encode(num::GradTape& tape, const synth::Tensor4& patch,
                      const LocalEncoderVars& p);

num::Vector local_encode_values(const synth::Tensor4& patch, const LocalEncoderParams& p);

}  // namespace perfgat::enc

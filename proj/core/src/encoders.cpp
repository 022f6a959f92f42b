#include "perfgat/encoders.hpp"

#include <string>

#include "perfgat/errors.hpp"

namespace perfgat::enc {

num::Var spatial_encode(num::GradTape& tape, num::Var x, const graph::Adjacency& a_spatial,
                        std::span<const gsl::GslLayerVars> layers, double slope) {
  if (a_spatial.edge_pairs() == 0) {
    throw DomainError("spatial_encode on an empty spatial graph");
  }
  gsl::GslConfig cfg;
  cfg.alpha = 0;
  cfg.beta = 0;
  cfg.max_layer = layers.size();
  cfg.hidden_dim = tape.value(layers.back().w_feat).cols();
  return gsl::run_structure_learning(tape, x, a_spatial, layers, cfg, slope).embeddings;
}

num::Matrix spatial_encode_values(const num::Matrix& x, const graph::Adjacency& a_spatial,
                                  std::span<const gsl::GslLayerParams> layers, double slope) {
  num::GradTape tape;
  std::vector<gsl::GslLayerVars> vars;
  vars.reserve(layers.size());
  for (const gsl::GslLayerParams& p : layers) {
    vars.push_back({tape.constant(p.w_attn), tape.constant(p.attn_vec),
                    tape.constant(p.w_feat)});
  }
  return tape.value(spatial_encode(tape, tape.constant(x), a_spatial, vars, slope));
}

num::Var local_encode(num::GradTape& tape, const synth::Tensor4& patch,
                      const LocalEncoderVars& p) {
  const std::size_t T = patch.timepoints();
  const std::size_t nv = patch.voxels();
  if (T == 0 || nv == 0) throw DomainError("local_encode of an empty patch");
  num::require_finite(patch.data(), "local_encode patch");
  if (tape.value(p.w_reduce).rows() != nv) {
    throw DimensionError("local_encode: reduction weights " +
                         tape.value(p.w_reduce).shape_str() + " for " + std::to_string(nv) +
                         " voxels");
  }

  // Frames as rows (T x p^3); time is the fastest axis of the patch.
  num::Matrix frames(T, nv);
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t t = 0; t < T; ++t) frames(t, v) = patch.data()[v * T + t];
  }
  const num::Var frames_v = tape.constant(frames);
  const std::size_t d = tape.value(p.w_reduce).cols();

  num::Var h = tape.constant(num::Matrix(1, d));
  for (std::size_t t = 0; t < T; ++t) {
    const num::Var r =
        tape.add_row_bias(tape.matmul(tape.row(frames_v, t), p.w_reduce), p.b_reduce);
    const num::Var z = tape.sigmoid(tape.add_row_bias(
        tape.add(tape.matmul(h, p.w_gate_h), tape.matmul(r, p.w_gate_in)), p.b_gate));
    const num::Var cand = tape.tanh_act(tape.add_row_bias(
        tape.add(tape.matmul(h, p.w_cand_h), tape.matmul(r, p.w_cand_in)), p.b_cand));
    // h <- z (.) h + (1 - z) (.) cand
    const num::Var keep = tape.hadamard(z, h);
    const num::Var take = tape.sub(cand, tape.hadamard(z, cand));
    h = tape.add(keep, take);
  }
  return tape.add_row_bias(tape.matmul(h, p.w_out), p.b_out);
}

num::Vector local_encode_values(const synth::Tensor4& patch, const LocalEncoderParams& p) {
  num::GradTape tape;
  LocalEncoderVars vars{
      tape.constant(p.w_reduce),  tape.constant(p.b_reduce), tape.constant(p.w_gate_h),
      tape.constant(p.w_gate_in), tape.constant(p.b_gate),   tape.constant(p.w_cand_h),
      tape.constant(p.w_cand_in), tape.constant(p.b_cand),   tape.constant(p.w_out),
      tape.constant(p.b_out)};
  const num::Matrix& out = tape.value(local_encode(tape, patch, vars));
  num::Vector u(out.cols());
  for (std::size_t j = 0; j < out.cols(); ++j) u[j] = out(0, j);
  return u;
}

}  // namespace perfgat::enc

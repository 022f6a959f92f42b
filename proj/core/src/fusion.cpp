#include "perfgat/fusion.hpp"

#include "perfgat/errors.hpp"

namespace perfgat::fusion {

namespace {

FusionVars bind_constants(num::GradTape& tape, const FusionParams& p) {
  return FusionVars{tape.constant(p.w_node_proj),  tape.constant(p.b_node_proj),
                    tape.constant(p.w_tumor_proj), tape.constant(p.b_tumor_proj),
                    tape.constant(p.w_sem),        tape.constant(p.b_sem),
                    tape.constant(p.q),            tape.constant(p.w_head),
                    tape.constant(p.b_head)};
}

}  // namespace

NodeAttention node_attention(num::GradTape& tape, num::Var z_spatial, num::Var u_tumor,
                             const FusionVars& p) {
  const std::size_t n = tape.value(z_spatial).rows();
  if (n == 0) throw DomainError("node_attention over zero nodes");
  const num::Var projected_nodes = tape.tanh_act(
      tape.add_row_bias(tape.matmul(z_spatial, p.w_node_proj), p.b_node_proj));
  const num::Var projected_tumor = tape.tanh_act(
      tape.add_row_bias(tape.matmul(u_tumor, p.w_tumor_proj), p.b_tumor_proj));

  std::vector<num::Var> cosines;
  cosines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cosines.push_back(tape.cosine(tape.row(projected_nodes, i), projected_tumor));
  }
  const num::Var raw = tape.gather_scalars(cosines);
  NodeAttention out;
  out.weights = tape.scale(tape.softmax(raw), static_cast<double>(n));
  out.raw_cosines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.raw_cosines.push_back(tape.value(raw)(i, 0));
  return out;
}

num::Var apply_node_attention(num::GradTape& tape, num::Var z_spatial, num::Var weights) {
  return tape.scale_rows(z_spatial, weights);
}

namespace {

num::Var semantic_score(num::GradTape& tape, num::Var z, const FusionVars& p) {
  const num::Var projected =
      tape.tanh_act(tape.add_row_bias(tape.matmul(z, p.w_sem), p.b_sem));
  return tape.mean_all(tape.matmul(projected, p.q));  // (n x 1) -> scalar
}

}  // namespace

num::Var semantic_attention(num::GradTape& tape, num::Var z_s, num::Var z_t,
                            const FusionVars& p) {
  if (!tape.value(z_s).same_shape(tape.value(z_t))) {
    throw DimensionError("semantic_attention: stream shapes " +
                         tape.value(z_s).shape_str() + " vs " + tape.value(z_t).shape_str());
  }
  const num::Var scores =
      tape.gather_scalars(std::vector<num::Var>{semantic_score(tape, z_s, p),
                                                semantic_score(tape, z_t, p)});
  return tape.softmax(scores);  // 2 x 1
}

num::Var fuse(num::GradTape& tape, num::Var z_s, num::Var z_t, num::Var betas) {
  if (!tape.value(z_s).same_shape(tape.value(z_t))) {
    throw DimensionError("fuse: stream shapes differ");
  }
  const num::Var beta_s = tape.row(betas, 0);
  const num::Var beta_t = tape.row(betas, 1);
  return tape.add(tape.mul_scalar(z_s, beta_s), tape.mul_scalar(z_t, beta_t));
}

num::Var pool_and_classify(num::GradTape& tape, num::Var z, const FusionVars& p) {
  if (tape.value(z).rows() == 0) throw DomainError("pool_and_classify of empty embedding");
  const num::Var pooled = tape.mean_rows(z);
  return tape.add_row_bias(tape.matmul(pooled, p.w_head), p.b_head);
}

num::Var fusion_forward(num::GradTape& tape, const FusionVars& p, num::Var u_tumor,
                        num::Var z_spatial, num::Var z_temporal,
                        std::pair<double, double>* betas_out) {
  const NodeAttention attn = node_attention(tape, z_spatial, u_tumor, p);
  const num::Var weighted = apply_node_attention(tape, z_spatial, attn.weights);
  const num::Var betas = semantic_attention(tape, weighted, z_temporal, p);
  if (betas_out) {
    *betas_out = {tape.value(betas)(0, 0), tape.value(betas)(1, 0)};
  }
  const num::Var fused = fuse(tape, weighted, z_temporal, betas);
  return pool_and_classify(tape, fused, p);
}

std::vector<double> node_attention_raw_values(const num::Matrix& z_spatial,
                                              const num::Vector& u_tumor,
                                              const FusionParams& p) {
  num::GradTape tape;
  FusionVars vars = bind_constants(tape, p);
  num::Var u = tape.constant(num::Matrix(1, u_tumor.len(),
                                         {u_tumor.data().begin(), u_tumor.data().end()}));
  return node_attention(tape, tape.constant(z_spatial), u, vars).raw_cosines;
}

std::vector<double> node_attention_values(const num::Matrix& z_spatial,
                                          const num::Vector& u_tumor, const FusionParams& p) {
  num::GradTape tape;
  FusionVars vars = bind_constants(tape, p);
  num::Var u = tape.constant(num::Matrix(1, u_tumor.len(),
                                         {u_tumor.data().begin(), u_tumor.data().end()}));
  const NodeAttention attn = node_attention(tape, tape.constant(z_spatial), u, vars);
  const num::Matrix& w = tape.value(attn.weights);
  std::vector<double> out;
  out.reserve(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) out.push_back(w(i, 0));
  return out;
}

std::pair<double, double> semantic_attention_values(const num::Matrix& z_s,
                                                    const num::Matrix& z_t,
                                                    const FusionParams& p) {
  num::GradTape tape;
  FusionVars vars = bind_constants(tape, p);
  const num::Var betas =
      semantic_attention(tape, tape.constant(z_s), tape.constant(z_t), vars);
  return {tape.value(betas)(0, 0), tape.value(betas)(1, 0)};
}

num::Vector logits_values(const FusionParams& p, const SampleFeatures& f) {
  num::GradTape tape;
  FusionVars vars = bind_constants(tape, p);
  num::Var u = tape.constant(num::Matrix(1, f.u_tumor.len(),
                                         {f.u_tumor.data().begin(), f.u_tumor.data().end()}));
  const num::Var logits = fusion_forward(tape, vars, u, tape.constant(f.z_spatial),
                                         tape.constant(f.z_temporal));
  const num::Matrix& m = tape.value(logits);
  num::Vector out(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out[j] = m(0, j);
  return out;
}

}  // namespace perfgat::fusion

#pragma once

#include <utility>
#include <vector>

#include "perfgat/grad_tape.hpp"
#include "perfgat/matrix.hpp"

namespace perfgat::fusion {

// Projection heads, semantic attention vector and classifier head.
struct FusionParams {
  num::Matrix w_node_proj;   // D x d_a   (projects spatial node embeddings)
  num::Matrix b_node_proj;   // 1 x d_a
  num::Matrix w_tumor_proj;  // D x d_a   (projects the tumor feature)
  num::Matrix b_tumor_proj;  // 1 x d_a
  num::Matrix w_sem;         // D x d_q   (semantic projection)
  num::Matrix b_sem;         // 1 x d_q
  num::Matrix q;             // d_q x 1   (semantic attention vector)
  num::Matrix w_head;        // D x 2
  num::Matrix b_head;        // 1 x 2
};

struct FusionVars {
  num::Var w_node_proj, b_node_proj;
  num::Var w_tumor_proj, b_tumor_proj;
  num::Var w_sem, b_sem, q;
  num::Var w_head, b_head;
};

// Per-sample encoder outputs: the unit the augmenter recombines. z_spatial
// holds the unweighted spatial embeddings (node attention is applied inside
// the fusion path, which is what retraining re-learns).
struct SampleFeatures {
  num::Vector u_tumor;     // D
  num::Matrix z_spatial;   // (N+1) x D
  num::Matrix z_temporal;  // (N+1) x D
  int label = 0;
};

// Raw node attentions a_i = cos(f_N(z_i), f_F(u)) and their normalization
// (N+1) * softmax(a), which is positive with mean 1.
struct NodeAttention {
  num::Var weights;                 // (N+1) x 1 normalized
  std::vector<double> raw_cosines;  // snapshot of a_i
};

NodeAttention node_attention(num::GradTape& tape, num::Var z_spatial, num::Var u_tumor,
                             const FusionVars& p);

// Row-wise scaling by the normalized weights.
num::Var apply_node_attention(num::GradTape& tape, num::Var z_spatial, num::Var weights);

// Convex stream weights (beta_spatial, beta_temporal) as a 2 x 1 node:
// softmax over the two pooled scores mean_i q . tanh(Z_i W + b).
num::Var semantic_attention(num::GradTape& tape, num::Var z_s, num::Var z_t,
                            const FusionVars& p);

// Z = beta_s * Z_s + beta_t * Z_t.
num::Var fuse(num::GradTape& tape, num::Var z_s, num::Var z_t, num::Var betas);

// Mean over nodes, then the linear head: 1 x 2 logits.
num::Var pool_and_classify(num::GradTape& tape, num::Var z, const FusionVars& p);

// Full fusion path over encoder outputs; returns the logits node.
num::Var fusion_forward(num::GradTape& tape, const FusionVars& p, num::Var u_tumor,
                        num::Var z_spatial, num::Var z_temporal,
                        std::pair<double, double>* betas_out = nullptr);

// Value-only helpers.
std::vector<double> node_attention_raw_values(const num::Matrix& z_spatial,
                                              const num::Vector& u_tumor,
                                              const FusionParams& p);
std::vector<double> node_attention_values(const num::Matrix& z_spatial,
                                          const num::Vector& u_tumor, const FusionParams& p);
std::pair<double, double> semantic_attention_values(const num::Matrix& z_s,
                                                    const num::Matrix& z_t,
                                                    const FusionParams& p);
num::Vector logits_values(const FusionParams& p, const SampleFeatures& f);

}  // namespace perfgat::fusion

#pragma once

#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "perfgat/grad_tape.hpp"
#include "perfgat/graphgen.hpp"
#include "perfgat/matrix.hpp"

namespace perfgat::gsl {

// Attention scores of the directed edges of one graph. Scores over the
// out-neighborhood of each source node form a softmax and sum to 1.
struct EdgeScores {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (i, j), sorted
  std::vector<double> scores;

  bool empty() const { return edges.empty(); }
  // Undirected pairs (i < j) with symmetrized score (e_ij + e_ji) / 2.
  std::vector<std::tuple<std::size_t, std::size_t, double>> undirected_pairs() const;
};

// Per-layer attention-transform, attention-vector and feature-transform
// weights. Row-vector convention: features are rows, transforms
// right-multiply, so a map from d_in to d_out is stored as d_in x d_out.
struct GslLayerParams {
  num::Matrix w_attn;    // d_in x d_out
  num::Matrix attn_vec;  // 2*d_out x 1
  num::Matrix w_feat;    // d_in x d_out
};

// Tape-side handles to one layer's parameters.
struct GslLayerVars {
  num::Var w_attn;
  num::Var attn_vec;
  num::Var w_feat;
};

struct GslConfig {
  std::size_t alpha = 2;      // undirected pairs deleted per layer
  std::size_t beta = 2;       // undirected pairs added per layer
  std::size_t max_layer = 2;
  std::size_t hidden_dim = 16;

  void validate() const;  // throws ConfigError
};

// Tape-side attention over one adjacency: per non-isolated source node a
// softmax block over its out-edges.
struct EdgeAttentionVars {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // directed, sorted
  std::vector<num::Var> blocks;            // k_i x 1 softmax per non-isolated node
  std::vector<std::size_t> block_source;   // node index per block
  std::vector<std::vector<std::size_t>> block_neighbors;  // ascending targets

  EdgeScores snapshot(const num::GradTape& tape) const;
};

// Off-diagonal complement; same nodes, exactly the absent edges.
graph::Adjacency negative_graph(const graph::Adjacency& a);

// Validates that a 0/1 matrix is symmetric with zero diagonal and converts
// it. Violations throw ContractError.
graph::Adjacency adjacency_from_matrix(const num::Matrix& m);

// Attention scores of every directed edge of `a` (pre-softmax score
// LeakyReLU(attn_vec . [x_i W || x_j W]), softmax over each source's
// out-neighborhood). A graph with no edges at all throws DomainError;
// isolated nodes simply contribute no scores.
EdgeAttentionVars edge_attention(num::GradTape& tape, num::Var x, const graph::Adjacency& a,
                                 const GslLayerVars& layer, double slope);

// Value-only convenience over a throwaway tape.
EdgeScores edge_attention_values(const num::Matrix& x, const graph::Adjacency& a,
                                 const GslLayerParams& layer, double slope);

enum class SelectMode { kLowest, kHighest };

struct Selection {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  bool clipped = false;  // count exceeded the available pairs
};

// Picks `count` undirected pairs by symmetrized score. Ties break by
// lexicographic (i, j); an oversized count clips with a warning flag.
Selection select_edges(const EdgeScores& scores, std::size_t count, SelectMode mode);

// Aggregates x'_i = sum_{j in N(i)} e_ij * (x_j W_n) over the attention's
// graph. Isolated nodes yield zero rows.
num::Var update_node_features(num::GradTape& tape, num::Var x, const EdgeAttentionVars& attn,
                              num::Var w_feat);

struct LayerEdit {
  std::vector<std::pair<std::size_t, std::size_t>> removed;
  std::vector<std::pair<std::size_t, std::size_t>> added;
  bool clipped_remove = false;
  bool clipped_add = false;
};

// One edit record per layer; replaying a plan freezes the discrete edits so
// gradients can be checked against finite differences.
using GslPlan = std::vector<LayerEdit>;

struct LayerDiagnostics {
  EdgeScores positive;      // scores on the pre-edit graph (empty when frozen)
  EdgeScores negative;      // scores on the negative graph (empty when frozen)
  EdgeScores final_scores;  // scores on the edited graph used by the update
};

struct GslResult {
  graph::Adjacency adjacency;   // after the last layer's edits
  num::Var embeddings;          // (N+1) x hidden_dim
  GslPlan edits;
  std::vector<LayerDiagnostics> diagnostics;
};

// One pass of attention-guided structure learning: per layer, score the
// current and negative graphs, delete the alpha weakest pairs, add the beta
// strongest absent pairs, re-score the edited graph with the pre-edit
// features and aggregate. Edits are decisions, not differentiable ops;
// gradients flow only through the attention used in the final aggregation.
// A layer that would leave the graph edgeless throws DomainError.
GslResult run_structure_learning(num::GradTape& tape, num::Var x, const graph::Adjacency& a,
                                 std::span<const GslLayerVars> layers, const GslConfig& cfg,
                                 double slope, const GslPlan* frozen = nullptr);

struct GslValueResult {
  graph::Adjacency adjacency;
  num::Matrix embeddings;
  GslPlan edits;
  std::vector<LayerDiagnostics> diagnostics;
};

GslValueResult run_structure_learning_values(const num::Matrix& x, const graph::Adjacency& a,
                                             std::span<const GslLayerParams> layers,
                                             const GslConfig& cfg, double slope,
                                             const GslPlan* frozen = nullptr);

}  // namespace perfgat::gsl

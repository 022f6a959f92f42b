#include "perfgat/structlearn.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "perfgat/errors.hpp"

namespace perfgat::gsl {

std::vector<std::tuple<std::size_t, std::size_t, double>> EdgeScores::undirected_pairs()
    const {
  std::map<std::pair<std::size_t, std::size_t>, double> acc;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [i, j] = edges[e];
    if (i > j) std::swap(i, j);
    acc[{i, j}] += 0.5 * scores[e];
  }
  std::vector<std::tuple<std::size_t, std::size_t, double>> out;
  out.reserve(acc.size());
  for (const auto& [pair, s] : acc) out.emplace_back(pair.first, pair.second, s);
  return out;
}

void GslConfig::validate() const {
  if (max_layer < 1) throw ConfigError("gsl.max_layer must be >= 1");
  if (hidden_dim < 1) throw ConfigError("gsl.hidden_dim must be >= 1");
}

graph::Adjacency negative_graph(const graph::Adjacency& a) {
  const std::size_t n = a.size();
  graph::Adjacency neg(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) neg.set_edge(i, j, !a.at(i, j));
  return neg;
}

graph::Adjacency adjacency_from_matrix(const num::Matrix& m) {
  if (m.rows() != m.cols()) {
    throw ContractError("adjacency matrix must be square, got " + m.shape_str());
  }
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (m(i, i) != 0.0) throw ContractError("adjacency diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      if (m(i, j) != 0.0 && m(i, j) != 1.0) {
        throw ContractError("adjacency entries must be 0 or 1");
      }
      if (m(i, j) != m(j, i)) {
        throw ContractError("adjacency must be symmetric; differs at (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
      }
    }
  }
  graph::Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a.set_edge(i, j, m(i, j) != 0.0);
  return a;
}

EdgeScores EdgeAttentionVars::snapshot(const num::GradTape& tape) const {
  EdgeScores out;
  // Per-block softmax values, flattened back to the sorted edge order.
  std::map<std::pair<std::size_t, std::size_t>, double> by_edge;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const num::Matrix& v = tape.value(blocks[b]);
    for (std::size_t k = 0; k < block_neighbors[b].size(); ++k) {
      by_edge[{block_source[b], block_neighbors[b][k]}] = v(k, 0);
    }
  }
  out.edges = edges;
  out.scores.reserve(edges.size());
  for (const auto& e : edges) out.scores.push_back(by_edge.at(e));
  return out;
}

EdgeAttentionVars edge_attention(num::GradTape& tape, num::Var x, const graph::Adjacency& a,
                                 const GslLayerVars& layer, double slope) {
  const std::size_t n = a.size();
  if (tape.value(x).rows() != n) {
    throw DimensionError("edge_attention: feature rows " +
                         std::to_string(tape.value(x).rows()) + " vs " + std::to_string(n) +
                         " nodes");
  }
  if (a.edge_pairs() == 0) throw DomainError("edge_attention on an empty graph");

  const num::Var u = tape.matmul(x, layer.w_attn);
  std::vector<num::Var> u_rows;
  u_rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) u_rows.push_back(tape.row(u, i));

  EdgeAttentionVars out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<std::size_t> nb = a.neighbors(i);
    if (nb.empty()) continue;
    std::vector<num::Var> raw;
    raw.reserve(nb.size());
    for (std::size_t j : nb) {
      out.edges.emplace_back(i, j);
      raw.push_back(tape.edge_score(layer.attn_vec, u_rows[i], u_rows[j], slope));
    }
    out.blocks.push_back(tape.softmax(tape.gather_scalars(raw)));
    out.block_source.push_back(i);
    out.block_neighbors.push_back(nb);
  }
  return out;
}

EdgeScores edge_attention_values(const num::Matrix& x, const graph::Adjacency& a,
                                 const GslLayerParams& layer, double slope) {
  num::GradTape tape;
  GslLayerVars vars{tape.constant(layer.w_attn), tape.constant(layer.attn_vec),
                    tape.constant(layer.w_feat)};
  return edge_attention(tape, tape.constant(x), a, vars, slope).snapshot(tape);
}

Selection select_edges(const EdgeScores& scores, std::size_t count, SelectMode mode) {
  auto pairs = scores.undirected_pairs();
  Selection sel;
  if (count > pairs.size()) {
    sel.clipped = true;
    count = pairs.size();
  }
  std::sort(pairs.begin(), pairs.end(), [&](const auto& p, const auto& q) {
    const double sp = std::get<2>(p), sq = std::get<2>(q);
    if (sp != sq) return mode == SelectMode::kLowest ? sp < sq : sp > sq;
    if (std::get<0>(p) != std::get<0>(q)) return std::get<0>(p) < std::get<0>(q);
    return std::get<1>(p) < std::get<1>(q);
  });
  sel.pairs.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    sel.pairs.emplace_back(std::get<0>(pairs[t]), std::get<1>(pairs[t]));
  }
  return sel;
}

num::Var update_node_features(num::GradTape& tape, num::Var x, const EdgeAttentionVars& attn,
                              num::Var w_feat) {
  const num::Var v = tape.matmul(x, w_feat);
  const std::size_t n = tape.value(v).rows();
  const std::size_t d = tape.value(v).cols();

  std::vector<num::Var> v_rows(n);
  std::vector<int> block_of(n, -1);
  for (std::size_t b = 0; b < attn.blocks.size(); ++b) {
    block_of[attn.block_source[b]] = static_cast<int>(b);
  }

  num::Var zero_row = tape.constant(num::Matrix(1, d));
  std::vector<num::Var> new_rows;
  new_rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int b = block_of[i];
    if (b < 0) {
      new_rows.push_back(zero_row);  // isolated node
      continue;
    }
    std::vector<num::Var> nb_rows;
    nb_rows.reserve(attn.block_neighbors[b].size());
    for (std::size_t j : attn.block_neighbors[b]) {
      if (!v_rows[j].valid()) v_rows[j] = tape.row(v, j);
      nb_rows.push_back(v_rows[j]);
    }
    new_rows.push_back(tape.weighted_row_sum(attn.blocks[b], nb_rows));
  }
  return tape.stack_rows(new_rows);
}

namespace {

void check_layer_shapes(const num::Matrix& x, const num::Matrix& w_attn,
                        const num::Matrix& attn_vec, const num::Matrix& w_feat,
                        std::size_t layer_index) {
  const std::string where = "structure learning layer " + std::to_string(layer_index);
  if (w_attn.rows() != x.cols()) {
    throw DimensionError(where + ": attention transform " + w_attn.shape_str() +
                         " for features " + x.shape_str());
  }
  if (attn_vec.cols() != 1 || attn_vec.rows() != 2 * w_attn.cols()) {
    throw DimensionError(where + ": attention vector " + attn_vec.shape_str());
  }
  if (w_feat.rows() != x.cols() || w_feat.cols() != w_attn.cols()) {
    throw DimensionError(where + ": feature transform " + w_feat.shape_str());
  }
}

}  // namespace

GslResult run_structure_learning(num::GradTape& tape, num::Var x, const graph::Adjacency& a,
                                 std::span<const GslLayerVars> layers, const GslConfig& cfg,
                                 double slope, const GslPlan* frozen) {
  cfg.validate();
  if (layers.size() != cfg.max_layer) {
    throw ContractError("run_structure_learning: " + std::to_string(layers.size()) +
                        " layer parameter sets for max_layer=" +
                        std::to_string(cfg.max_layer));
  }
  if (frozen && frozen->size() != cfg.max_layer) {
    throw ContractError("run_structure_learning: frozen plan has wrong layer count");
  }

  GslResult res;
  res.adjacency = a;
  num::Var feat = x;
  for (std::size_t l = 0; l < cfg.max_layer; ++l) {
    check_layer_shapes(tape.value(feat), tape.value(layers[l].w_attn),
                       tape.value(layers[l].attn_vec), tape.value(layers[l].w_feat), l);
    LayerEdit edit;
    LayerDiagnostics diag;
    const bool editing = cfg.alpha > 0 || cfg.beta > 0;
    if (frozen) {
      edit = (*frozen)[l];
    } else if (editing) {
      EdgeAttentionVars pos = edge_attention(tape, feat, res.adjacency, layers[l], slope);
      diag.positive = pos.snapshot(tape);
      Selection del = select_edges(diag.positive, cfg.alpha, SelectMode::kLowest);
      edit.removed = del.pairs;
      edit.clipped_remove = del.clipped;

      const graph::Adjacency neg = negative_graph(res.adjacency);
      if (neg.edge_pairs() > 0) {
        EdgeAttentionVars negattn = edge_attention(tape, feat, neg, layers[l], slope);
        diag.negative = negattn.snapshot(tape);
        Selection add = select_edges(diag.negative, cfg.beta, SelectMode::kHighest);
        edit.added = add.pairs;
        edit.clipped_add = add.clipped;
      } else {
        edit.clipped_add = cfg.beta > 0;
      }
    }

    // Deletions come from the present edges, additions from the absent ones,
    // so the two sets can never meet.
    for (const auto& r : edit.removed) {
      if (std::find(edit.added.begin(), edit.added.end(), r) != edit.added.end()) {
        throw ContractError("edit plan removes and adds the same pair");
      }
    }

    for (const auto& [i, j] : edit.removed) res.adjacency.set_edge(i, j, false);
    for (const auto& [i, j] : edit.added) res.adjacency.set_edge(i, j, true);
    if (res.adjacency.edge_pairs() == 0) {
      throw DomainError("structural collapse: graph became edgeless at layer " +
                        std::to_string(l));
    }

    // Re-score the edited graph with the pre-edit features; added edges take
    // part in this layer's aggregation.
    EdgeAttentionVars final_attn = edge_attention(tape, feat, res.adjacency, layers[l], slope);
    diag.final_scores = final_attn.snapshot(tape);
    feat = update_node_features(tape, feat, final_attn, layers[l].w_feat);

    res.edits.push_back(std::move(edit));
    res.diagnostics.push_back(std::move(diag));
  }
  res.embeddings = feat;
  return res;
}

GslValueResult run_structure_learning_values(const num::Matrix& x, const graph::Adjacency& a,
                                             std::span<const GslLayerParams> layers,
                                             const GslConfig& cfg, double slope,
                                             const GslPlan* frozen) {
  num::GradTape tape;
  std::vector<GslLayerVars> vars;
  vars.reserve(layers.size());
  for (const GslLayerParams& p : layers) {
    vars.push_back({tape.constant(p.w_attn), tape.constant(p.attn_vec),
                    tape.constant(p.w_feat)});
  }
  GslResult r = run_structure_learning(tape, tape.constant(x), a, vars, cfg, slope, frozen);
  return {r.adjacency, tape.value(r.embeddings), std::move(r.edits), std::move(r.diagnostics)};
}

}  // namespace perfgat::gsl

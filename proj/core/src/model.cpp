#include "perfgat/model.hpp"

#include <cmath>

#include "perfgat/errors.hpp"
#include "perfgat/rng.hpp"

namespace perfgat::model {

namespace {

num::Matrix glorot(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  const double std_dev =
      scale * std::sqrt(2.0 / static_cast<double>(rows + cols));
  num::Matrix m(rows, cols);
  for (double& v : m.data()) v = std_dev * rng.normal();
  return m;
}

gsl::GslLayerParams init_gsl_layer(Rng& rng, std::size_t d_in, std::size_t d_out,
                                   double scale) {
  gsl::GslLayerParams p;
  p.w_attn = glorot(rng, d_in, d_out, scale);
  p.attn_vec = glorot(rng, 2 * d_out, 1, scale);
  p.w_feat = glorot(rng, d_in, d_out, scale);
  return p;
}

fusion::FusionParams init_fusion(Rng& rng, const ModelConfig& cfg) {
  const std::size_t d = cfg.embed_dim;
  fusion::FusionParams f;
  f.w_node_proj = glorot(rng, d, d, cfg.init_scale);
  f.b_node_proj = num::Matrix(1, d);
  f.w_tumor_proj = glorot(rng, d, d, cfg.init_scale);
  f.b_tumor_proj = num::Matrix(1, d);
  f.w_sem = glorot(rng, d, d, cfg.init_scale);
  f.b_sem = num::Matrix(1, d);
  f.q = glorot(rng, d, 1, cfg.init_scale);
  f.w_head = glorot(rng, d, 2, cfg.init_scale);
  f.b_head = num::Matrix(1, 2);
  return f;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.gsl_layers < 1 || cfg.spatial_layers < 1) {
    throw ConfigError("model: encoder depth must be >= 1");
  }
  Rng rng(mix_seed(seed, rng_stream::kInit));
  ModelParams p;
  p.cfg = cfg;
  for (std::size_t l = 0; l < cfg.gsl_layers; ++l) {
    const std::size_t d_in = l == 0 ? cfg.n_timepoints : cfg.embed_dim;
    p.temporal.push_back(init_gsl_layer(rng, d_in, cfg.embed_dim, cfg.init_scale));
  }
  for (std::size_t l = 0; l < cfg.spatial_layers; ++l) {
    const std::size_t d_in = l == 0 ? cfg.n_timepoints : cfg.embed_dim;
    p.spatial.push_back(init_gsl_layer(rng, d_in, cfg.embed_dim, cfg.init_scale));
  }
  const std::size_t dl = cfg.local_hidden;
  p.local.w_reduce = glorot(rng, cfg.patch_voxels, dl, cfg.init_scale);
  p.local.b_reduce = num::Matrix(1, dl);
  p.local.w_gate_h = glorot(rng, dl, dl, cfg.init_scale);
  p.local.w_gate_in = glorot(rng, dl, dl, cfg.init_scale);
  p.local.b_gate = num::Matrix(1, dl);
  p.local.w_cand_h = glorot(rng, dl, dl, cfg.init_scale);
  p.local.w_cand_in = glorot(rng, dl, dl, cfg.init_scale);
  p.local.b_cand = num::Matrix(1, dl);
  p.local.w_out = glorot(rng, dl, cfg.embed_dim, cfg.init_scale);
  p.local.b_out = num::Matrix(1, cfg.embed_dim);
  p.fusion = init_fusion(rng, cfg);
  return p;
}

void reinit_fusion(ModelParams& params, std::uint64_t seed) {
  Rng rng(mix_seed(seed, rng_stream::kRetrainInit));
  params.fusion = init_fusion(rng, params.cfg);
}

namespace {

// Canonical traversal; bind() below must visit in exactly this order.
template <class Params, class Fn>
void visit(Params& p, Fn&& fn) {
  for (std::size_t l = 0; l < p.temporal.size(); ++l) {
    const std::string base = "temporal.layer" + std::to_string(l) + ".";
    fn(base + "w_attn", p.temporal[l].w_attn);
    fn(base + "attn_vec", p.temporal[l].attn_vec);
    fn(base + "w_feat", p.temporal[l].w_feat);
  }
  for (std::size_t l = 0; l < p.spatial.size(); ++l) {
    const std::string base = "spatial.layer" + std::to_string(l) + ".";
    fn(base + "w_attn", p.spatial[l].w_attn);
    fn(base + "attn_vec", p.spatial[l].attn_vec);
    fn(base + "w_feat", p.spatial[l].w_feat);
  }
  fn("local.w_reduce", p.local.w_reduce);
  fn("local.b_reduce", p.local.b_reduce);
  fn("local.w_gate_h", p.local.w_gate_h);
  fn("local.w_gate_in", p.local.w_gate_in);
  fn("local.b_gate", p.local.b_gate);
  fn("local.w_cand_h", p.local.w_cand_h);
  fn("local.w_cand_in", p.local.w_cand_in);
  fn("local.b_cand", p.local.b_cand);
  fn("local.w_out", p.local.w_out);
  fn("local.b_out", p.local.b_out);
  fn("fusion.w_node_proj", p.fusion.w_node_proj);
  fn("fusion.b_node_proj", p.fusion.b_node_proj);
  fn("fusion.w_tumor_proj", p.fusion.w_tumor_proj);
  fn("fusion.b_tumor_proj", p.fusion.b_tumor_proj);
  fn("fusion.w_sem", p.fusion.w_sem);
  fn("fusion.b_sem", p.fusion.b_sem);
  fn("fusion.q", p.fusion.q);
  fn("fusion.w_head", p.fusion.w_head);
  fn("fusion.b_head", p.fusion.b_head);
}

}  // namespace

std::vector<std::pair<std::string, num::Matrix*>> named_tensors(ModelParams& p) {
  std::vector<std::pair<std::string, num::Matrix*>> out;
  visit(p, [&](const std::string& name, num::Matrix& m) { out.emplace_back(name, &m); });
  return out;
}

std::vector<std::pair<std::string, const num::Matrix*>> named_tensors(const ModelParams& p) {
  std::vector<std::pair<std::string, const num::Matrix*>> out;
  visit(p, [&](const std::string& name, const num::Matrix& m) {
    out.emplace_back(name, &m);
  });
  return out;
}

bool is_fusion_tensor(const std::string& name) { return name.rfind("fusion.", 0) == 0; }

ModelVars bind(num::GradTape& tape, const ModelParams& p, bool trainable,
               bool fusion_only_trainable) {
  std::vector<num::Var> vars;
  visit(p, [&](const std::string& name, const num::Matrix& m) {
    const bool train = trainable && (!fusion_only_trainable || is_fusion_tensor(name));
    vars.push_back(train ? tape.param(m) : tape.constant(m));
  });

  ModelVars v;
  std::size_t k = 0;
  for (std::size_t l = 0; l < p.temporal.size(); ++l) {
    v.temporal.push_back({vars[k], vars[k + 1], vars[k + 2]});
    k += 3;
  }
  for (std::size_t l = 0; l < p.spatial.size(); ++l) {
    v.spatial.push_back({vars[k], vars[k + 1], vars[k + 2]});
    k += 3;
  }
  v.local = {vars[k],     vars[k + 1], vars[k + 2], vars[k + 3], vars[k + 4],
             vars[k + 5], vars[k + 6], vars[k + 7], vars[k + 8], vars[k + 9]};
  k += 10;
  v.fusion = {vars[k],     vars[k + 1], vars[k + 2], vars[k + 3], vars[k + 4],
              vars[k + 5], vars[k + 6], vars[k + 7], vars[k + 8]};
  return v;
}

std::vector<num::Matrix> collect_gradients(const num::GradTape& tape, const ModelVars& vars,
                                           const ModelParams& p) {
  std::vector<num::Var> flat;
  for (const auto& l : vars.temporal) {
    flat.push_back(l.w_attn);
    flat.push_back(l.attn_vec);
    flat.push_back(l.w_feat);
  }
  for (const auto& l : vars.spatial) {
    flat.push_back(l.w_attn);
    flat.push_back(l.attn_vec);
    flat.push_back(l.w_feat);
  }
  for (num::Var v : {vars.local.w_reduce, vars.local.b_reduce, vars.local.w_gate_h,
                     vars.local.w_gate_in, vars.local.b_gate, vars.local.w_cand_h,
                     vars.local.w_cand_in, vars.local.b_cand, vars.local.w_out,
                     vars.local.b_out}) {
    flat.push_back(v);
  }
  for (num::Var v : {vars.fusion.w_node_proj, vars.fusion.b_node_proj,
                     vars.fusion.w_tumor_proj, vars.fusion.b_tumor_proj, vars.fusion.w_sem,
                     vars.fusion.b_sem, vars.fusion.q, vars.fusion.w_head,
                     vars.fusion.b_head}) {
    flat.push_back(v);
  }
  (void)p;
  std::vector<num::Matrix> grads;
  grads.reserve(flat.size());
  for (num::Var v : flat) grads.push_back(tape.grad(v));
  return grads;
}

SampleForward forward_sample(num::GradTape& tape, const ModelVars& vars,
                             const ModelConfig& cfg, const graph::SpatioTemporalGraph& g,
                             const synth::Tensor4& patch, int label,
                             const gsl::GslPlan* frozen) {
  SampleForward out;
  const num::Var x = tape.constant(g.x);

  gsl::GslResult temporal = gsl::run_structure_learning(
      tape, x, g.a_temporal, vars.temporal, cfg.gsl_config(), cfg.leaky_slope, frozen);
  out.plan = temporal.edits;

  const num::Var z_spatial =
      enc::spatial_encode(tape, x, g.a_spatial, vars.spatial, cfg.leaky_slope);
  const num::Var u_tumor = enc::local_encode(tape, patch, vars.local);

  out.logits =
      fusion::fusion_forward(tape, vars.fusion, u_tumor, z_spatial, temporal.embeddings);
  out.loss = tape.cross_entropy_logits(out.logits, label);

  const num::Matrix& z = tape.value(out.logits);
  const double mx = std::max(z(0, 0), z(0, 1));
  const double e0 = std::exp(z(0, 0) - mx), e1 = std::exp(z(0, 1) - mx);
  out.prob_minority = e1 / (e0 + e1);
  return out;
}

fusion::SampleFeatures extract_features(const ModelParams& params,
                                        const graph::SpatioTemporalGraph& g,
                                        const synth::Tensor4& patch, int label) {
  num::GradTape tape;
  const ModelVars vars = bind(tape, params, /*trainable=*/false);
  const num::Var x = tape.constant(g.x);

  gsl::GslResult temporal = gsl::run_structure_learning(
      tape, x, g.a_temporal, vars.temporal, params.cfg.gsl_config(), params.cfg.leaky_slope);
  const num::Var z_spatial =
      enc::spatial_encode(tape, x, g.a_spatial, vars.spatial, params.cfg.leaky_slope);
  const num::Var u_tumor = enc::local_encode(tape, patch, vars.local);

  fusion::SampleFeatures f;
  const num::Matrix& u = tape.value(u_tumor);
  f.u_tumor = num::Vector(u.cols());
  for (std::size_t j = 0; j < u.cols(); ++j) f.u_tumor[j] = u(0, j);
  f.z_spatial = tape.value(z_spatial);
  f.z_temporal = tape.value(temporal.embeddings);
  f.label = label;
  return f;
}

num::Var features_loss(num::GradTape& tape, const fusion::FusionVars& vars,
                       const fusion::SampleFeatures& f, double* prob_minority) {
  const num::Var u = tape.constant(
      num::Matrix(1, f.u_tumor.len(), {f.u_tumor.data().begin(), f.u_tumor.data().end()}));
  const num::Var logits = fusion::fusion_forward(
      tape, vars, u, tape.constant(f.z_spatial), tape.constant(f.z_temporal));
  if (prob_minority) {
    const num::Matrix& z = tape.value(logits);
    const double mx = std::max(z(0, 0), z(0, 1));
    const double e0 = std::exp(z(0, 0) - mx), e1 = std::exp(z(0, 1) - mx);
    *prob_minority = e1 / (e0 + e1);
  }
  return tape.cross_entropy_logits(logits, f.label);
}

double prob_minority_from_features(const ModelParams& params,
                                   const fusion::SampleFeatures& f) {
  num::GradTape tape;
  fusion::FusionVars vars{
      tape.constant(params.fusion.w_node_proj),  tape.constant(params.fusion.b_node_proj),
      tape.constant(params.fusion.w_tumor_proj), tape.constant(params.fusion.b_tumor_proj),
      tape.constant(params.fusion.w_sem),        tape.constant(params.fusion.b_sem),
      tape.constant(params.fusion.q),            tape.constant(params.fusion.w_head),
      tape.constant(params.fusion.b_head)};
  double prob = 0.0;
  features_loss(tape, vars, f, &prob);
  return prob;
}

}  // namespace perfgat::model

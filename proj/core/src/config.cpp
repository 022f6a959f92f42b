#include "perfgat/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "perfgat/errors.hpp"

namespace perfgat::io {

using nlohmann::json;

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  cohort.seed = s;
  train.seed = s;
}

void RunConfig::validate() const {
  cohort.validate();
  train.validate();
  if (!(graph.tau > 0.0 && graph.tau < 1.0)) {
    throw ConfigError("graph.tau: must lie in (0,1)");
  }
  if (graph.k < 1 || graph.k > cohort.n_regions) {
    throw ConfigError("graph.k: must lie in [1, n_regions]");
  }
  if (model.max_layer < 1) throw ConfigError("model.max_layer: must be >= 1");
  if (model.spatial_layers < 1) throw ConfigError("model.spatial_layers: must be >= 1");
  if (model.hidden_dim < 1) throw ConfigError("model.hidden_dim: must be >= 1");
  if (model.local_hidden < 1) throw ConfigError("model.local_hidden: must be >= 1");
  if (model.hidden_dim != model.embed_dim) {
    throw ConfigError(
        "model.hidden_dim: must equal model.embed_dim (the fused streams share one "
        "embedding dimension)");
  }
  if (!(model.leaky_slope > 0.0 && model.leaky_slope < 1.0)) {
    throw ConfigError("model.leaky_slope: must lie in (0,1)");
  }
  if (!(model.init_scale > 0.0)) throw ConfigError("model.init_scale: must be > 0");
  if (cohort.seed != seed || train.seed != seed) {
    throw ConfigError("seed: section seeds must mirror the top-level seed");
  }
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig mc;
  mc.n_timepoints = cohort.n_timepoints;
  mc.embed_dim = model.embed_dim;
  mc.gsl_alpha = model.alpha;
  mc.gsl_beta = model.beta;
  mc.gsl_layers = model.max_layer;
  mc.spatial_layers = model.spatial_layers;
  mc.patch_voxels = cohort.patch_size * cohort.patch_size * cohort.patch_size;
  mc.local_hidden = model.local_hidden;
  mc.leaky_slope = model.leaky_slope;
  mc.init_scale = model.init_scale;
  return mc;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown config key: " + prefix + key);
    }
  }
}

template <class T>
void read_into(const json& obj, const char* key, T& out, const std::string& prefix) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + prefix + key + " has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  const json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  reject_unknown(root, {"seed", "cohort", "graph", "model", "train"}, "");

  RunConfig cfg;
  read_into(root, "seed", cfg.seed, "");

  if (root.contains("cohort")) {
    const json& c = root.at("cohort");
    if (!c.is_object()) throw ConfigError("cohort must be an object");
    reject_unknown(c,
                   {"n_subjects", "n_regions", "n_timepoints", "minority_fraction",
                    "class_effect", "patch_size", "baseline", "arrival_min", "arrival_max",
                    "shape_min", "shape_max", "rate_min", "rate_max", "dip_min", "dip_max",
                    "noise_sigma"},
                   "cohort.");
    read_into(c, "n_subjects", cfg.cohort.n_subjects, "cohort.");
    read_into(c, "n_regions", cfg.cohort.n_regions, "cohort.");
    read_into(c, "n_timepoints", cfg.cohort.n_timepoints, "cohort.");
    read_into(c, "minority_fraction", cfg.cohort.minority_fraction, "cohort.");
    read_into(c, "class_effect", cfg.cohort.class_effect, "cohort.");
    read_into(c, "patch_size", cfg.cohort.patch_size, "cohort.");
    read_into(c, "baseline", cfg.cohort.kinetics.baseline, "cohort.");
    read_into(c, "arrival_min", cfg.cohort.kinetics.arrival_min, "cohort.");
    read_into(c, "arrival_max", cfg.cohort.kinetics.arrival_max, "cohort.");
    read_into(c, "shape_min", cfg.cohort.kinetics.shape_min, "cohort.");
    read_into(c, "shape_max", cfg.cohort.kinetics.shape_max, "cohort.");
    read_into(c, "rate_min", cfg.cohort.kinetics.rate_min, "cohort.");
    read_into(c, "rate_max", cfg.cohort.kinetics.rate_max, "cohort.");
    read_into(c, "dip_min", cfg.cohort.kinetics.dip_min, "cohort.");
    read_into(c, "dip_max", cfg.cohort.kinetics.dip_max, "cohort.");
    read_into(c, "noise_sigma", cfg.cohort.kinetics.noise_sigma, "cohort.");
  }

  if (root.contains("graph")) {
    const json& g = root.at("graph");
    if (!g.is_object()) throw ConfigError("graph must be an object");
    reject_unknown(g, {"tau", "k", "use_abs_correlation"}, "graph.");
    read_into(g, "tau", cfg.graph.tau, "graph.");
    read_into(g, "k", cfg.graph.k, "graph.");
    read_into(g, "use_abs_correlation", cfg.graph.use_abs_correlation, "graph.");
  }

  if (root.contains("model")) {
    const json& m = root.at("model");
    if (!m.is_object()) throw ConfigError("model must be an object");
    reject_unknown(m,
                   {"alpha", "beta", "max_layer", "hidden_dim", "embed_dim",
                    "spatial_layers", "local_hidden", "leaky_slope", "init_scale"},
                   "model.");
    read_into(m, "alpha", cfg.model.alpha, "model.");
    read_into(m, "beta", cfg.model.beta, "model.");
    read_into(m, "max_layer", cfg.model.max_layer, "model.");
    read_into(m, "hidden_dim", cfg.model.hidden_dim, "model.");
    read_into(m, "embed_dim", cfg.model.embed_dim, "model.");
    read_into(m, "spatial_layers", cfg.model.spatial_layers, "model.");
    read_into(m, "local_hidden", cfg.model.local_hidden, "model.");
    read_into(m, "leaky_slope", cfg.model.leaky_slope, "model.");
    read_into(m, "init_scale", cfg.model.init_scale, "model.");
  }

  if (root.contains("train")) {
    const json& t = root.at("train");
    if (!t.is_object()) throw ConfigError("train must be an object");
    reject_unknown(t,
                   {"max_epochs", "early_stop_patience", "retrain_epochs", "batch_size",
                    "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "split_train",
                    "split_val", "split_test", "decision_threshold"},
                   "train.");
    read_into(t, "max_epochs", cfg.train.max_epochs, "train.");
    read_into(t, "early_stop_patience", cfg.train.early_stop_patience, "train.");
    read_into(t, "retrain_epochs", cfg.train.retrain_epochs, "train.");
    read_into(t, "batch_size", cfg.train.batch_size, "train.");
    read_into(t, "learning_rate", cfg.train.learning_rate, "train.");
    read_into(t, "adam_beta1", cfg.train.adam_beta1, "train.");
    read_into(t, "adam_beta2", cfg.train.adam_beta2, "train.");
    read_into(t, "adam_eps", cfg.train.adam_eps, "train.");
    read_into(t, "split_train", cfg.train.split_ratios[0], "train.");
    read_into(t, "split_val", cfg.train.split_ratios[1], "train.");
    read_into(t, "split_test", cfg.train.split_ratios[2], "train.");
    read_into(t, "decision_threshold", cfg.train.decision_threshold, "train.");
  }

  cfg.set_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  json root;
  root["seed"] = seed;
  root["cohort"] = {{"n_subjects", cohort.n_subjects},
                    {"n_regions", cohort.n_regions},
                    {"n_timepoints", cohort.n_timepoints},
                    {"minority_fraction", cohort.minority_fraction},
                    {"class_effect", cohort.class_effect},
                    {"patch_size", cohort.patch_size},
                    {"baseline", cohort.kinetics.baseline},
                    {"arrival_min", cohort.kinetics.arrival_min},
                    {"arrival_max", cohort.kinetics.arrival_max},
                    {"shape_min", cohort.kinetics.shape_min},
                    {"shape_max", cohort.kinetics.shape_max},
                    {"rate_min", cohort.kinetics.rate_min},
                    {"rate_max", cohort.kinetics.rate_max},
                    {"dip_min", cohort.kinetics.dip_min},
                    {"dip_max", cohort.kinetics.dip_max},
                    {"noise_sigma", cohort.kinetics.noise_sigma}};
  root["graph"] = {{"tau", graph.tau},
                   {"k", graph.k},
                   {"use_abs_correlation", graph.use_abs_correlation}};
  root["model"] = {{"alpha", model.alpha},
                   {"beta", model.beta},
                   {"max_layer", model.max_layer},
                   {"hidden_dim", model.hidden_dim},
                   {"embed_dim", model.embed_dim},
                   {"spatial_layers", model.spatial_layers},
                   {"local_hidden", model.local_hidden},
                   {"leaky_slope", model.leaky_slope},
                   {"init_scale", model.init_scale}};
  root["train"] = {{"max_epochs", train.max_epochs},
                   {"early_stop_patience", train.early_stop_patience},
                   {"retrain_epochs", train.retrain_epochs},
                   {"batch_size", train.batch_size},
                   {"learning_rate", train.learning_rate},
                   {"adam_beta1", train.adam_beta1},
                   {"adam_beta2", train.adam_beta2},
                   {"adam_eps", train.adam_eps},
                   {"split_train", train.split_ratios[0]},
                   {"split_val", train.split_ratios[1]},
                   {"split_test", train.split_ratios[2]},
                   {"decision_threshold", train.decision_threshold}};
  return root.dump(2);
}

}  // namespace perfgat::io

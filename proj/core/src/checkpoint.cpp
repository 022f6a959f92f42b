#include "perfgat/checkpoint.hpp"

#include <cmath>

#include <json.hpp>

#include "perfgat/container.hpp"
#include "perfgat/errors.hpp"

namespace perfgat::io {

using nlohmann::json;

namespace {

void add_params(ArtifactContainer& c, const std::string& prefix,
                const model::ModelParams& p) {
  for (const auto& [name, tensor] : model::named_tensors(p)) {
    c.add_matrix(prefix + name, *tensor);
  }
}

void load_params(const ArtifactContainer& c, const std::string& prefix,
                 model::ModelParams& p) {
  for (auto& [name, tensor] : model::named_tensors(p)) {
    const num::Matrix stored = c.matrix(prefix + name);
    if (!stored.same_shape(*tensor)) {
      throw DataError("checkpoint: tensor '" + name + "' has shape " + stored.shape_str() +
                      ", expected " + tensor->shape_str());
    }
    *tensor = stored;
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const model::ModelParams& deploy,
                      const train::TrainState* state, const RunConfig& cfg) {
  ArtifactContainer c;
  add_params(c, "model/", deploy);
  if (state) {
    add_params(c, "resume/current/", state->current);
    const auto tensors = model::named_tensors(state->current);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      c.add_matrix("resume/adam_m/" + tensors[i].first, state->adam.m[i]);
      c.add_matrix("resume/adam_v/" + tensors[i].first, state->adam.v[i]);
    }
  }

  json meta;
  meta["kind"] = "checkpoint";
  meta["config"] = json::parse(cfg.to_json_text());
  meta["dims"] = {{"n_timepoints", deploy.cfg.n_timepoints},
                  {"patch_voxels", deploy.cfg.patch_voxels},
                  {"embed_dim", deploy.cfg.embed_dim}};
  meta["has_state"] = state != nullptr;
  if (state) {
    meta["adam_step"] = state->adam.step;
    meta["epochs_done"] = state->epochs_done;
    meta["epochs_since_best"] = state->epochs_since_best;
    meta["stopped_early"] = state->stopped_early;
    if (std::isfinite(state->best_val_loss)) {
      meta["best_val_loss"] = state->best_val_loss;
    }
  }
  c.set_meta_json(meta.dump());
  c.write_file(path);
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path) {
  const ArtifactContainer c = ArtifactContainer::read_file(path);
  const json meta = json::parse(c.meta_json());
  if (meta.value("kind", "") != "checkpoint") {
    throw DataError("checkpoint: '" + path.string() + "' is not a checkpoint container");
  }

  LoadedCheckpoint out;
  out.config = RunConfig::from_json_text(meta.at("config").dump());
  out.model = model::init_params(out.config.model_config(), 0);
  load_params(c, "model/", out.model);

  if (meta.value("has_state", false)) {
    train::TrainState st;
    st.current = model::init_params(out.config.model_config(), 0);
    load_params(c, "resume/current/", st.current);
    st.best = out.model;
    const auto tensors = model::named_tensors(st.current);
    for (const auto& [name, tensor] : tensors) {
      st.adam.m.push_back(c.matrix("resume/adam_m/" + name));
      st.adam.v.push_back(c.matrix("resume/adam_v/" + name));
    }
    st.adam.step = meta.at("adam_step").get<std::size_t>();
    st.epochs_done = meta.at("epochs_done").get<std::size_t>();
    st.epochs_since_best = meta.at("epochs_since_best").get<std::size_t>();
    st.stopped_early = meta.at("stopped_early").get<bool>();
    st.best_val_loss = meta.contains("best_val_loss")
                           ? meta.at("best_val_loss").get<double>()
                           : std::numeric_limits<double>::infinity();
    out.state = std::move(st);
  }
  return out;
}

void check_compatible(const LoadedCheckpoint& ckpt, std::size_t n_timepoints,
                      std::size_t patch_size) {
  const std::size_t voxels = patch_size * patch_size * patch_size;
  if (ckpt.model.cfg.n_timepoints != n_timepoints) {
    throw DataError("incompatible checkpoint: n_timepoints is " +
                    std::to_string(ckpt.model.cfg.n_timepoints) + ", cohort has " +
                    std::to_string(n_timepoints));
  }
  if (ckpt.model.cfg.patch_voxels != voxels) {
    throw DataError("incompatible checkpoint: patch_voxels is " +
                    std::to_string(ckpt.model.cfg.patch_voxels) + ", cohort patch has " +
                    std::to_string(voxels));
  }
}

}  // namespace perfgat::io
